#include "xtrl/env.hpp"

#include <algorithm>
#include <cmath>

#include "xtrl/errors.hpp"

namespace xtrl {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::kNone: return "none";
    case Termination::kTarget: return "target";
    case Termination::kTimeout: return "timeout";
    case Termination::kRollover: return "rollover";
    case Termination::kChassisContact: return "chassis-contact";
    case Termination::kOvershoot: return "overshoot";
  }
  return "?";
}

EpisodeConfig lesson_config(int lesson) {
  if (lesson < 1 || lesson > 4) throw ConfigError("lesson must be in 1..4");
  EpisodeConfig cfg;
  cfg.terrain.perlin.amplitude_m = 0.3;
  cfg.terrain.perlin.frequency = 0.05;
  cfg.terrain.perlin.octaves = 4;
  switch (lesson) {
    case 1:
      cfg.terrain.kind = TerrainSpec::Kind::kPerlin;
      cfg.phi_max = kPi / 3.0;
      cfg.max_steps = 400;
      break;
    case 2:
      cfg.terrain.kind = TerrainSpec::Kind::kPerlinObstacles;
      cfg.terrain.n_impassable = 8;
      cfg.terrain.n_small = 0;
      cfg.phi_max = kPi / 9.0;
      cfg.max_steps = 400;
      break;
    case 3:
      cfg.terrain.kind = TerrainSpec::Kind::kPerlinObstacles;
      // hillier base noise than lessons 1-2
      cfg.terrain.perlin.amplitude_m = 0.6;
      cfg.terrain.perlin.frequency = 0.075;
      cfg.terrain.n_impassable = 6;
      cfg.terrain.n_small = 6;
      cfg.phi_max = kPi / 9.0;
      cfg.max_steps = 400;
      break;
    case 4:
      cfg.terrain.kind = TerrainSpec::Kind::kDem;
      cfg.phi_max = kPi / 3.0;
      cfg.max_steps = 500;
      break;
  }
  return cfg;
}

TargetPose sample_target(double phi_max, Rng& rng, double spawn_x, double spawn_y,
                         double spawn_heading, double distance) {
  if (phi_max <= 0.0 || phi_max > kPi) throw ConfigError("phi_max must be in (0, pi]");
  // density ~ phi^2 on [-phi_max, phi_max] via inverse CDF
  double u = rng.uniform(-1.0, 1.0);
  double phi = phi_max * std::cbrt(u);
  double bearing = spawn_heading + phi;
  TargetPose t;
  t.x = spawn_x + distance * std::cos(bearing);
  t.y = spawn_y + distance * std::sin(bearing);
  t.heading = wrap_angle(bearing + rng.uniform(-phi_max / 2.0, phi_max / 2.0));
  return t;
}

Environment::Environment(EpisodeConfig cfg, uint64_t seed) : cfg_(std::move(cfg)), rng_(seed) {}

double Environment::distance_to_target() const {
  Vec3 ref = vehicle_->reference_position();
  return std::hypot(target_.x - ref.x, target_.y - ref.y);
}

double Environment::heading_error() const {
  double roll, pitch, yaw;
  vehicle_->reference_attitude(roll, pitch, yaw);
  return wrap_angle(target_.heading - yaw);
}

void Environment::build_terrain(uint64_t seed, double spawn_x, double spawn_y) {
  switch (cfg_.terrain.kind) {
    case TerrainSpec::Kind::kFixed:
      if (!cfg_.terrain.fixed) throw ConfigError("fixed terrain requested but none provided");
      terrain_ = cfg_.terrain.fixed;
      return;
    case TerrainSpec::Kind::kDem: {
      if (cfg_.terrain.dem_paths.empty())
        throw ConfigError("DEM terrain requested but no files listed");
      if (dem_cache_.empty()) {
        for (const auto& p : cfg_.terrain.dem_paths)
          dem_cache_.push_back(std::make_shared<HeightField>(load_dem(p).recentered()));
      }
      size_t idx = static_cast<size_t>(seed % dem_cache_.size());
      terrain_ = dem_cache_[idx];
      return;
    }
    case TerrainSpec::Kind::kPerlin: {
      terrain_ = std::make_shared<HeightField>(generate_perlin(seed, cfg_.terrain.perlin));
      return;
    }
    case TerrainSpec::Kind::kPerlinObstacles: {
      HeightField base = generate_perlin(seed, cfg_.terrain.perlin);
      // obstacle corridor: from a little past the spawn up to the target,
      // inflated laterally
      double dx = target_.x - spawn_x, dy = target_.y - spawn_y;
      double len = std::hypot(dx, dy);
      double ux = dx / len, uy = dy / len;
      double sx = spawn_x + 4.0 * ux, sy = spawn_y + 4.0 * uy;
      Rect region;
      region.x_min = std::min(sx, target_.x) - 3.0;
      region.x_max = std::max(sx, target_.x) + 3.0;
      region.y_min = std::min(sy, target_.y) - 3.0;
      region.y_max = std::max(sy, target_.y) + 3.0;
      region.x_min = std::max(region.x_min, base.origin_x());
      region.y_min = std::max(region.y_min, base.origin_y());
      region.x_max = std::min(region.x_max, base.max_x());
      region.y_max = std::min(region.y_max, base.max_y());

      const TerrainSpec& ts = cfg_.terrain;
      uint64_t obstacle_seed = seed ^ 0x9e3779b97f4a7c15ULL;
      HeightField with_big =
          add_ellipsoids(base, ts.n_impassable, obstacle_seed, region, ts.obstacle_size_min,
                         ts.obstacle_size_max, ts.impassable_height_min, ts.impassable_height_max);
      HeightField with_all =
          add_ellipsoids(with_big, ts.n_small, obstacle_seed + 1, region, ts.obstacle_size_min,
                         ts.obstacle_size_max, ts.small_height_min, ts.small_height_max);
      terrain_ = std::make_shared<HeightField>(std::move(with_all));
      return;
    }
  }
}

bool Environment::spawn_clear(double x, double y) const {
  // footprint height range check over a generous vehicle-sized box
  double range_min = 1e30, range_max = -1e30;
  for (int i = -4; i <= 4; ++i) {
    for (int j = -2; j <= 2; ++j) {
      double h = terrain_->sample_height_clamped(x + i * 0.9, y + j * 0.85);
      range_min = std::min(range_min, h);
      range_max = std::max(range_max, h);
    }
  }
  return range_max - range_min <= cfg_.spawn_height_range_max;
}

void Environment::spawn_and_settle(double x, double y, double heading) {
  world_ = std::make_unique<World>(cfg_.world);
  world_->set_terrain(terrain_);

  // place so the reference point starts at (x, y)
  const VehicleConfig& vc = cfg_.vehicle;
  double ref_local_x = vc.seg_length[1] / 2.0 + vc.seg_length[0] / 2.0 + vc.ref_offset_x;
  double bx = x - std::cos(heading) * ref_local_x;
  double by = y - std::sin(heading) * ref_local_x;
  vehicle_ = std::make_unique<Vehicle>(*world_, vc, bx, by, heading);
  if (payload_mass_ > 0.0) vehicle_->attach_payload(payload_mass_);

  // drop and settle for one simulated second under the levelling controller
  vehicle_->apply_action(Action{});
  for (int i = 0; i < 60; ++i) vehicle_->substep();
}

Observation Environment::reset(uint64_t seed) {
  rng_.reseed(seed);
  return reset();
}

Observation Environment::reset() {
  for (int attempt = 0;; ++attempt) {
    double x0 = rng_.uniform(-cfg_.spawn_half_extent, cfg_.spawn_half_extent);
    double y0 = rng_.uniform(-cfg_.spawn_half_extent, cfg_.spawn_half_extent);
    double psi0 = rng_.uniform(0.0, 2.0 * kPi);
    target_ = sample_target(cfg_.phi_max, rng_, x0, y0, psi0, cfg_.target_distance);
    uint64_t terrain_seed = rng_.next_u64();
    build_terrain(terrain_seed, x0, y0);
    if (!spawn_clear(x0, y0)) {
      if (attempt >= 9)
        throw ConfigError("could not find a clear spawn after 10 attempts");
      continue;
    }
    spawn_x_ = x0;
    spawn_y_ = y0;
    spawn_and_settle(x0, y0, psi0);
    break;
  }

  double dx = target_.x - spawn_x_, dy = target_.y - spawn_y_;
  double len = std::hypot(dx, dy);
  track_dir_ = {dx / len, dy / len, 0.0};
  along_track_limit_ = len + cfg_.overshoot_margin;
  d0_ = distance_to_target();
  d_prev_ = d0_;
  steps_ = 0;
  done_ = false;
  return observe();
}

Observation Environment::reset_deterministic(double spawn_x, double spawn_y,
                                             double spawn_heading, double bearing_fraction,
                                             double heading_fraction, uint64_t terrain_seed) {
  double phi = bearing_fraction * cfg_.phi_max;
  double bearing = spawn_heading + phi;
  target_.x = spawn_x + cfg_.target_distance * std::cos(bearing);
  target_.y = spawn_y + cfg_.target_distance * std::sin(bearing);
  target_.heading = wrap_angle(bearing + heading_fraction * cfg_.phi_max / 2.0);

  build_terrain(terrain_seed, spawn_x, spawn_y);
  spawn_x_ = spawn_x;
  spawn_y_ = spawn_y;
  spawn_and_settle(spawn_x, spawn_y, spawn_heading);

  double dx = target_.x - spawn_x_, dy = target_.y - spawn_y_;
  double len = std::hypot(dx, dy);
  track_dir_ = {dx / len, dy / len, 0.0};
  along_track_limit_ = len + cfg_.overshoot_margin;
  d0_ = distance_to_target();
  d_prev_ = d0_;
  steps_ = 0;
  done_ = false;
  return observe();
}

StepResult Environment::step(const Action& action) {
  if (done_) throw ProtocolError("step() called on a finished episode");

  vehicle_->apply_action(action);
  vehicle_->begin_control_interval();
  for (int i = 0; i < kPhysicsPerControl; ++i) vehicle_->substep();
  ++steps_;

  VehicleState st = vehicle_->state();
  double d_t = distance_to_target();
  double psi = heading_error();

  const RigidBody& front = world_->body(vehicle_->front_body());
  Vec3 v_ref = front.point_velocity(vehicle_->reference_position());
  double v_planar = std::hypot(v_ref.x, v_ref.y);

  StepResult result;
  result.reward = reward::compose(d_prev_, d_t, psi, st.roll, v_planar, st.load, st.slip_long,
                                  st.slip_angle, st.work_joints, st.work_max,
                                  st.sidewall_contacts, cfg_.reward);
  d_prev_ = d_t;

  bool at_target = d_t < cfg_.reward.target_distance_tol &&
                   std::abs(psi) < deg2rad(cfg_.reward.target_heading_tol_deg);
  double along = (st.position.x - spawn_x_) * track_dir_.x +
                 (st.position.y - spawn_y_) * track_dir_.y;

  if (at_target) {
    result.reason = Termination::kTarget;
  } else if (std::abs(st.roll) > deg2rad(cfg_.roll_limit_deg)) {
    result.reason = Termination::kRollover;
  } else if (vehicle_->chassis_contact()) {
    result.reason = Termination::kChassisContact;
  } else if (along > along_track_limit_) {
    result.reason = Termination::kOvershoot;
  } else if (steps_ >= cfg_.max_steps) {
    result.reason = Termination::kTimeout;
  }
  result.done = result.reason != Termination::kNone;
  done_ = result.done;
  result.obs = observe();
  return result;
}

Observation Environment::observe() const {
  if (!vehicle_) throw ProtocolError("observe() before reset()");
  Observation obs(obs_layout::kDim, 0.0);

  VehicleState st = vehicle_->state();
  Vec3 ref = st.position;
  double h_ref = terrain_->sample_height_clamped(ref.x, ref.y);
  LocalMap map = local_height_map(*terrain_, ref.x, ref.y, st.yaw, h_ref);
  std::copy(map.values.begin(), map.values.end(), obs.begin() + obs_layout::kHeightMap);

  double dx = target_.x - ref.x, dy = target_.y - ref.y;
  double c = std::cos(st.yaw), s = std::sin(st.yaw);
  obs[obs_layout::kTarget + 0] = c * dx + s * dy;
  obs[obs_layout::kTarget + 1] = -s * dx + c * dy;
  obs[obs_layout::kTarget + 2] = wrap_angle(target_.heading - st.yaw);

  obs[obs_layout::kVelocities + 0] = st.v_forward;
  obs[obs_layout::kVelocities + 1] = st.v_lateral;
  obs[obs_layout::kVelocities + 2] = st.yaw_rate;
  obs[obs_layout::kAttitude + 0] = st.roll;
  obs[obs_layout::kAttitude + 1] = st.pitch;
  obs[obs_layout::kArticulation + 0] = st.articulation[0];
  obs[obs_layout::kArticulation + 1] = st.articulation[1];
  for (int i = 0; i < 6; ++i) {
    obs[obs_layout::kPistons + i] = st.piston[i];
    obs[obs_layout::kSlipLong + i] = st.slip_long[i];
    obs[obs_layout::kSlipAngle + i] = st.slip_angle[i];
    obs[obs_layout::kLoads + i] = st.load[i];
  }
  return obs;
}

}  // namespace xtrl
