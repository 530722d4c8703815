#pragma once

#include <array>
#include <string>
#include <vector>

#include "xtrl/config.hpp"
#include "xtrl/env.hpp"
#include "xtrl/nn.hpp"
#include "xtrl/ppo.hpp"

namespace xtrl::harness {

// Full default run configuration, every key documented inline.
std::string default_config_text();

NetConfig net_config(const Config& cfg);
PpoConfig ppo_config(const Config& cfg);
// Lesson-specific episode settings (terrain, phi_max, step limit) merged with
// the config's terrain/vehicle/reward/world sections.
EpisodeConfig episode_config(const Config& cfg, int lesson);
// Per-lesson learning rates, (25, 10, 10, 1) x 1e-5 by default.
std::vector<double> lesson_learning_rates(const Config& cfg);
std::vector<long> lesson_budgets(const Config& cfg);

struct EpisodeReport {
  int index = 0;
  double d0 = 0.0;
  double episode_return = 0.0;
  double normalized_return = 0.0;
  int steps = 0;
  Termination reason = Termination::kNone;
  double mean_abs_roll_deg = 0.0;
  bool reached = false;
  bool alarm = false;  // normalized return above the 1.05 accounting bound
};

struct EvalSummary {
  std::vector<EpisodeReport> episodes;
  double success_rate = 0.0;
  double mean_normalized = 0.0;
  double sd_normalized = 0.0;
  double mean_abs_roll_deg = 0.0;
  int alarms = 0;
};

// Terrain descriptor strings shared by the eval commands, trace headers and
// replay: "slope:<deg>", "gauss:<h>:<sigma>", "perlin:<seed>",
// "obstacles:<seed>:<n_big>:<n_small>", "dem:<path>".
TerrainSpec parse_terrain_descriptor(const std::string& desc, const Config& cfg);

struct RunEpisodeOptions {
  bool deterministic = true;     // mean actions; otherwise sample with rng
  Rng* rng = nullptr;
  std::ostream* trace = nullptr; // per-step CSV rows + termination footer
  bool export_values = true;     // include critic estimates in the trace
};

// Drives one already-reset episode to termination.
EpisodeReport run_episode(Environment& env, const ActorCritic& policy,
                          const RunEpisodeOptions& opt);

struct TrainResult {
  std::string best_checkpoint;
  std::string final_checkpoint;
  std::string metrics_csv;
  std::string eval_csv;
  std::string manifest;
  long total_steps = 0;
  double best_eval_normalized = 0.0;
};

// Runs the configured lessons in order, warm-starting each from the best
// checkpoint of the previous one, evaluating every eval.interval steps on a
// held-out terrain with deterministic spawns/targets and mean actions.
TrainResult train(const Config& cfg, const std::string& out_dir);

// 40 episodes on a planar slope, headings 2 pi k / 40, target 20 m dead
// ahead. Writes report CSV + traces; logs the published reference values
// next to the measured ones without asserting them.
EvalSummary eval_slopes(const Config& cfg, const std::string& checkpoint_path, double angle_deg,
                        const std::string& out_dir);

// Same placements on an obstacle terrain; exports per-step value estimates.
EvalSummary eval_obstacles(const Config& cfg, const std::string& checkpoint_path,
                           const std::string& terrain_desc, const std::string& out_dir);

struct LegReport {
  int index = 0;
  TargetPose waypoint;
  bool reached = false;
  double normalized_return = 0.0;
  int steps = 0;
  Termination reason = Termination::kNone;
};

// Sequential waypoint route; a missed waypoint advances to the next leg.
std::vector<LegReport> eval_waypoints(const Config& cfg, const std::string& checkpoint_path,
                                      const std::string& route_file,
                                      const std::string& terrain_desc,
                                      const std::string& out_dir);

struct SweepCell {
  double friction = 0.0;
  double load_kg = 0.0;
  double mean_normalized = 0.0;
  double sd_normalized = 0.0;
  // target, timeout, rollover, chassis-contact, overshoot
  std::array<int, 5> termination_histogram{};
};

// friction x load grid, 40 episodes per cell with random 20 m targets.
std::vector<SweepCell> sweep_domain(const Config& cfg, const std::string& checkpoint_path,
                                    const std::vector<double>& frictions,
                                    const std::vector<double>& loads_kg,
                                    const std::string& out_dir);

struct ReplayResult {
  int steps = 0;
  double max_position_deviation = 0.0;
  Termination reason = Termination::kNone;
};

// Re-executes a recorded trace and reports the worst position deviation.
ReplayResult replay(const std::string& trace_path, const Config& cfg);

// Waypoint route file: one `x y heading_deg` per line.
std::vector<TargetPose> load_route(const std::string& path);

}  // namespace xtrl::harness
