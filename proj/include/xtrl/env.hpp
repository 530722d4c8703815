#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xtrl/heightfield.hpp"
#include "xtrl/reward.hpp"
#include "xtrl/rng.hpp"
#include "xtrl/vehicle.hpp"

namespace xtrl {

struct TargetPose {
  double x = 0.0, y = 0.0;  // world, m
  double heading = 0.0;     // rad
};

// Fixed observation layout. Indices are stable across episodes and versions.
namespace obs_layout {
constexpr int kHeightMap = 0;      // 600: 30x20 local height map, row-major
constexpr int kTarget = 600;       // 3: target (x, y) in vehicle frame, heading error
constexpr int kVelocities = 603;   // 3: forward, lateral, yaw rate
constexpr int kAttitude = 606;     // 2: roll, pitch
constexpr int kArticulation = 608; // 2: articulation angles
constexpr int kPistons = 610;      // 6: normalized piston displacements
constexpr int kSlipLong = 616;     // 6: longitudinal slips
constexpr int kSlipAngle = 622;    // 6: slip angles
constexpr int kLoads = 628;        // 6: normalized wheel loads
constexpr int kDim = 634;
}  // namespace obs_layout

using Observation = std::vector<double>;  // length obs_layout::kDim

enum class Termination { kNone, kTarget, kTimeout, kRollover, kChassisContact, kOvershoot };
const char* to_string(Termination t);

// Terrain generation settings for one lesson (procedural lessons regenerate
// per episode; DEM lessons cycle through the listed files).
struct TerrainSpec {
  enum class Kind { kPerlin, kPerlinObstacles, kDem, kFixed };
  Kind kind = Kind::kPerlin;
  PerlinParams perlin;
  int n_impassable = 0;
  int n_small = 0;
  double impassable_height_min = 1.0, impassable_height_max = 1.75;
  double small_height_min = 0.25, small_height_max = 0.6;
  double obstacle_size_min = 0.5, obstacle_size_max = 3.5;
  std::vector<std::string> dem_paths;
  std::shared_ptr<const HeightField> fixed;  // used when kind == kFixed
};

struct EpisodeConfig {
  TerrainSpec terrain;
  double phi_max = kPi / 3.0;
  int max_steps = 400;
  double spawn_half_extent = 1.0;   // spawn position in [-e, e]^2
  double target_distance = 20.0;    // m
  double roll_limit_deg = 25.0;
  double overshoot_margin = 2.0;    // m beyond the target along track
  double spawn_height_range_max = 1.2;  // m; rougher footprints resample the spawn
  RewardConstants reward;
  VehicleConfig vehicle;
  WorldParams world;
};

// Curriculum defaults for lessons 1..4.
EpisodeConfig lesson_config(int lesson);

// Bearing with density proportional to phi^2 on [-phi_max, phi_max], target
// 20 m out, heading uniform within +-phi_max/2 of the bearing.
TargetPose sample_target(double phi_max, Rng& rng, double spawn_x, double spawn_y,
                         double spawn_heading, double distance = 20.0);

struct StepResult {
  Observation obs;
  RewardBreakdown reward;
  bool done = false;
  Termination reason = Termination::kNone;
};

// One training/evaluation episode driver: spawn, settle, observe, step at
// 12 Hz (5 physics substeps), reward and terminate. Single-owner; run many
// instances concurrently with independent seeds.
class Environment {
 public:
  static constexpr int kPhysicsPerControl = 5;

  Environment(EpisodeConfig cfg, uint64_t seed);

  // Starts a new episode; optionally reseeds the episode stream first.
  Observation reset();
  Observation reset(uint64_t seed);

  // Deterministic reset for evaluation: fixed spawn pose and target bearing
  // fraction u in [-1, 1] (phi = u * phi_max), heading offset fraction in
  // [-1, 1]. Terrain regeneration still uses the episode seed.
  Observation reset_deterministic(double spawn_x, double spawn_y, double spawn_heading,
                                  double bearing_fraction, double heading_fraction,
                                  uint64_t terrain_seed);

  // Fully pinned reset (used by trace replay).
  Observation reset_exact(double spawn_x, double spawn_y, double spawn_heading,
                          const TargetPose& target, uint64_t terrain_seed);

  // Continues the current episode toward a new target without respawning:
  // resets the step counter, the progress baseline and the overshoot line.
  Observation retarget(const TargetPose& target, int max_steps);

  StepResult step(const Action& action);
  Observation observe() const;

  const TargetPose& target() const { return target_; }
  double initial_distance() const { return d0_; }
  double distance_to_target() const;
  double heading_error() const;
  VehicleState vehicle_state() const { return vehicle_->state(); }
  const Vehicle& vehicle() const { return *vehicle_; }
  Vehicle& vehicle() { return *vehicle_; }
  World& world() { return *world_; }
  const HeightField& terrain() const { return *terrain_; }
  int steps_taken() const { return steps_; }
  bool done() const { return done_; }
  const EpisodeConfig& config() const { return cfg_; }

  // Rigid payload for the domain sweep; applied on every subsequent reset.
  void set_payload(double mass_kg) { payload_mass_ = mass_kg; }
  double spawn_x() const { return spawn_x_; }
  double spawn_y() const { return spawn_y_; }
  uint64_t last_terrain_seed() const { return terrain_seed_; }

 private:
  void build_terrain(uint64_t seed, double spawn_x, double spawn_y);
  void spawn_and_settle(double x, double y, double heading);
  void begin_episode();
  bool spawn_clear(double x, double y) const;

  EpisodeConfig cfg_;
  Rng rng_;
  std::shared_ptr<const HeightField> terrain_;
  std::vector<std::shared_ptr<const HeightField>> dem_cache_;
  std::unique_ptr<World> world_;
  std::unique_ptr<Vehicle> vehicle_;
  TargetPose target_;
  double spawn_x_ = 0.0, spawn_y_ = 0.0;
  double d0_ = 0.0;
  double d_prev_ = 0.0;
  double along_track_limit_ = 0.0;
  Vec3 track_dir_;
  int steps_ = 0;
  bool done_ = true;
  double payload_mass_ = 0.0;
};

}  // namespace xtrl
