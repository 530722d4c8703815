#include "xtrl/vehicle.hpp"

#include <algorithm>
#include <cmath>

#include "xtrl/errors.hpp"

namespace xtrl {

namespace {

Mat3 box_inertia(double mass, double lx, double ly, double lz) {
  double k = mass / 12.0;
  return Mat3::diagonal(k * (ly * ly + lz * lz), k * (lx * lx + lz * lz),
                        k * (lx * lx + ly * ly));
}

Mat3 sphere_inertia(double mass, double r) {
  double i = 0.4 * mass * r * r;
  return Mat3::diagonal(i, i, i);
}

}  // namespace

Vehicle::Vehicle(World& world, const VehicleConfig& cfg, double x, double y, double yaw)
    : world_(&world), cfg_(cfg) {
  double split_sum = cfg.frame_split[0] + cfg.frame_split[1] + cfg.frame_split[2];
  if (std::abs(split_sum - 1.0) > 1e-6)
    throw ConfigError("vehicle frame mass split must sum to 1");
  double frame_total = cfg.total_mass - 6.0 * cfg.wheel_mass - 6.0 * cfg.arm_mass;
  if (frame_total <= 0.0) throw ConfigError("vehicle component masses exceed total mass");

  const double neutral = deg2rad(cfg.arm_neutral_deg);
  const double half_track = cfg.track_width / 2.0;
  // frame segment centers along x; articulation hinges sit at the gaps
  const double seg_x[3] = {cfg.seg_length[1] / 2.0 + cfg.seg_length[0] / 2.0, 0.0,
                           -(cfg.seg_length[1] / 2.0 + cfg.seg_length[2] / 2.0)};
  const double hinge_x[2] = {cfg.seg_length[1] / 2.0, -cfg.seg_length[1] / 2.0};
  // wheel pair positions (front, mid, rear)
  const double wheel_x[3] = {cfg.seg_length[1] / 2.0 + cfg.seg_length[0] / 2.0 + 0.25, 0.0,
                             -(cfg.seg_length[1] / 2.0 + cfg.seg_length[2] / 2.0 + 0.25)};
  const double pivot_dx = cfg.arm_length * std::cos(neutral);  // pivot ahead of wheel
  const double arm_drop = cfg.arm_length * std::sin(neutral);
  const double pivot_z = cfg.wheel_radius + arm_drop;  // also the frame center height

  Quat q_yaw = Quat::from_yaw(yaw);
  auto place = [&](double lx, double ly, double lz) {
    Vec3 world_xy = q_yaw.rotate({lx, ly, 0.0});
    return Vec3{x + world_xy.x, y + world_xy.y, lz};
  };

  // ground clearance: lift everything so the lowest wheel sits just above the
  // terrain under it
  double z_shift = 0.0;
  if (world.terrain()) {
    double max_need = -1e30;
    for (int p = 0; p < 3; ++p) {
      for (double side : {half_track, -half_track}) {
        Vec3 wpos = place(wheel_x[p], side, cfg.wheel_radius);
        double h = world.terrain()->sample_height_clamped(wpos.x, wpos.y);
        max_need = std::max(max_need, h - (wpos.z - cfg.wheel_radius));
      }
    }
    z_shift = max_need + 0.05;
  }

  const char* seg_name[3] = {"frame_front", "frame_mid", "frame_rear"};
  for (int s = 0; s < 3; ++s) {
    RigidBody b;
    b.name = seg_name[s];
    b.mass = cfg.frame_split[s] * frame_total;
    b.inertia = box_inertia(b.mass, cfg.seg_length[s], cfg.frame_width, cfg.frame_depth);
    b.pos = place(seg_x[s], 0.0, pivot_z + z_shift);
    b.orn = q_yaw;
    b.sphere_radius = cfg.belly_radius;
    b.sphere_offset = {0.0, 0.0, -cfg.belly_drop};
    frame_[s] = world.add_body(b);
  }

  const char* side_name[2] = {"l", "r"};
  for (int p = 0; p < 3; ++p) {
    for (int s = 0; s < 2; ++s) {
      int i = p * 2 + s;                       // FL FR ML MR RL RR
      double ly = s == 0 ? half_track : -half_track;
      double wx = wheel_x[p];
      double px = wx + pivot_dx;

      RigidBody arm;
      arm.name = std::string("arm_") + std::to_string(p) + side_name[s];
      arm.mass = cfg.arm_mass;
      double irod = cfg.arm_mass * cfg.arm_length * cfg.arm_length / 12.0;
      arm.inertia = Mat3::diagonal(irod, irod, irod);
      arm.pos = place((px + wx) / 2.0, ly, pivot_z - arm_drop / 2.0 + z_shift);
      arm.orn = q_yaw;
      arms_[i] = world.add_body(arm);

      RigidBody wheel;
      wheel.name = std::string("wheel_") + std::to_string(p) + side_name[s];
      wheel.mass = cfg.wheel_mass;
      wheel.inertia = sphere_inertia(cfg.wheel_mass, cfg.wheel_radius);
      wheel.pos = place(wx, ly, cfg.wheel_radius + z_shift);
      wheel.orn = q_yaw;
      wheel.sphere_radius = cfg.wheel_radius;
      wheels_[i] = world.add_body(wheel);

      // suspension hinge: segment -> arm, lateral axis
      HingeJoint susp;
      susp.name = "susp_" + std::to_string(i);
      int seg = frame_[p];
      susp.parent = seg;
      susp.child = arms_[i];
      susp.anchor_parent = {px - seg_x[p], ly, 0.0};
      susp.anchor_child = {pivot_dx / 2.0, 0.0, arm_drop / 2.0};
      susp.axis_parent = {0, 1, 0};
      susp.axis_child = {0, 1, 0};
      susp.ref_parent = {1, 0, 0};
      susp.ref_child = {1, 0, 0};
      susp.has_limits = true;
      susp.lo = -deg2rad(cfg.susp_range_deg);
      susp.hi = deg2rad(cfg.susp_range_deg);
      susp_joints_[i] = world.add_hinge(susp);

      // wheel hinge: arm -> wheel
      HingeJoint wj;
      wj.name = "wheel_" + std::to_string(i);
      wj.parent = arms_[i];
      wj.child = wheels_[i];
      wj.anchor_parent = {-pivot_dx / 2.0, 0.0, -arm_drop / 2.0};
      wj.anchor_child = {0, 0, 0};
      wj.axis_parent = {0, 1, 0};
      wj.axis_child = {0, 1, 0};
      wj.ref_parent = {1, 0, 0};
      wj.ref_child = {1, 0, 0};
      wheel_joints_[i] = world.add_hinge(wj);
    }
  }

  // frame articulation hinges about the vertical axis
  for (int a = 0; a < 2; ++a) {
    HingeJoint art;
    art.name = a == 0 ? "artic_front" : "artic_rear";
    art.parent = frame_[1];
    art.child = a == 0 ? frame_[0] : frame_[2];
    art.anchor_parent = {hinge_x[a], 0.0, 0.0};
    art.anchor_child = {hinge_x[a] - seg_x[a == 0 ? 0 : 2], 0.0, 0.0};
    art.axis_parent = {0, 0, 1};
    art.axis_child = {0, 0, 1};
    art.ref_parent = {1, 0, 0};
    art.ref_child = {1, 0, 0};
    art.has_limits = true;
    art.lo = -deg2rad(cfg.artic_range_deg);
    art.hi = deg2rad(cfg.artic_range_deg);
    artic_joints_[a] = world.add_hinge(art);
  }
}

void Vehicle::apply_action(const Action& action) {
  for (double a : action)
    if (!std::isfinite(a)) throw InvalidActionError("action contains a non-finite component");
  Action a = action;
  for (double& v : a) v = std::clamp(v, -1.0, 1.0);

  artic_target_[0] = a[0] * deg2rad(cfg_.artic_range_deg);
  artic_target_[1] = a[1] * deg2rad(cfg_.artic_range_deg);
  for (int i = 0; i < 6; ++i) susp_target_[i] = a[2 + i] * deg2rad(cfg_.susp_range_deg);
  for (int i = 0; i < 6; ++i) wheel_torque_[i] = a[8 + i] * cfg_.wheel_torque_limit;
}

void Vehicle::update_motors() {
  World& w = *world_;
  for (int a = 0; a < 2; ++a) {
    double angle = w.hinge_angle(artic_joints_[a]);
    double speed = std::clamp(cfg_.kp * (artic_target_[a] - angle), -cfg_.artic_max_speed,
                              cfg_.artic_max_speed);
    w.set_motor(artic_joints_[a], speed, cfg_.artic_torque_limit);
  }
  for (int i = 0; i < 6; ++i) {
    double angle = w.hinge_angle(susp_joints_[i]);
    double speed = std::clamp(cfg_.kp * (susp_target_[i] - angle), -cfg_.susp_max_speed,
                              cfg_.susp_max_speed);
    w.set_motor(susp_joints_[i], speed, cfg_.susp_torque_limit());
  }
  for (int i = 0; i < 6; ++i) {
    double tau = wheel_torque_[i];
    double omega = w.hinge_speed(wheel_joints_[i]);
    if (std::abs(omega) > cfg_.wheel_speed_clamp && tau * omega > 0.0) tau = 0.0;
    if (tau == 0.0)
      w.set_motor(wheel_joints_[i], 0.0, 0.0);
    else
      w.set_motor(wheel_joints_[i], tau > 0.0 ? 1e9 : -1e9, std::abs(tau));
  }
}

void Vehicle::substep() {
  update_motors();
  world_->step();
  for (int j : {artic_joints_[0], artic_joints_[1]}) {
    const HingeJoint& hj = world_->hinge(j);
    work_accum_ += std::abs(hj.applied_effort * hj.last_speed) * World::kDt;
  }
  for (int i = 0; i < 6; ++i) {
    const HingeJoint& sj = world_->hinge(susp_joints_[i]);
    work_accum_ += std::abs(sj.applied_effort * sj.last_speed) * World::kDt;
    const HingeJoint& wj = world_->hinge(wheel_joints_[i]);
    work_accum_ += std::abs(wj.applied_effort * wj.last_speed) * World::kDt;
  }
}

void Vehicle::begin_control_interval() { work_accum_ = 0.0; }

void Vehicle::compute_slip(double v_forward, double wheel_omega, double radius, double heading_x,
                           double heading_y, double vel_x, double vel_y, double v_eps,
                           double& lambda, double& alpha) {
  double surface = wheel_omega * radius;
  if (std::abs(v_forward) < v_eps && std::abs(surface) < v_eps) {
    lambda = 0.0;
  } else {
    lambda = (v_forward - surface) / std::max(std::abs(v_forward), v_eps);
    lambda = std::clamp(lambda, -10.0, 10.0);
  }

  double speed = std::hypot(vel_x, vel_y);
  if (speed < v_eps) {
    alpha = 0.0;
  } else {
    double cross = heading_x * vel_y - heading_y * vel_x;
    double dot = heading_x * vel_x + heading_y * vel_y;
    alpha = std::atan2(cross, dot);
  }
}

std::array<double, 6> Vehicle::wheel_loads() const {
  std::array<double, 6> loads{};
  double weight = cfg_.total_mass * world_->params().gravity;
  if (payload_body_ >= 0) weight += world_->body(payload_body_).mass * world_->params().gravity;
  for (const auto& c : world_->last_contacts()) {
    for (int i = 0; i < 6; ++i) {
      if (c.body == wheels_[i]) loads[i] += c.normal_force / weight;
    }
  }
  return loads;
}

int Vehicle::sidewall_contacts() const {
  int count = 0;
  for (const auto& c : world_->last_contacts()) {
    for (int i = 0; i < 6; ++i) {
      if (c.body != wheels_[i]) continue;
      const RigidBody& wb = world_->body(wheels_[i]);
      Vec3 axis = wb.orn.rotate({0, 1, 0});
      Vec3 d = (c.position - wb.pos).normalized();
      double angle = std::acos(std::clamp(std::abs(d.dot(axis)), 0.0, 1.0));
      if (angle < deg2rad(60.0)) ++count;
    }
  }
  return count;
}

std::pair<double, double> Vehicle::joint_work() const {
  double w_max = (2.0 * cfg_.artic_torque_limit * cfg_.artic_max_speed +
                  6.0 * cfg_.susp_torque_limit() * cfg_.susp_max_speed +
                  6.0 * cfg_.wheel_torque_limit * cfg_.wheel_speed_clamp) *
                 cfg_.control_dt;
  return {work_accum_, w_max};
}

bool Vehicle::chassis_contact() const {
  for (const auto& c : world_->last_contacts())
    for (int s = 0; s < 3; ++s)
      if (c.body == frame_[s]) return true;
  return false;
}

double Vehicle::total_wheel_normal_force() const {
  double sum = 0.0;
  for (const auto& c : world_->last_contacts())
    for (int i = 0; i < 6; ++i)
      if (c.body == wheels_[i]) sum += c.normal_force;
  return sum;
}

Vec3 Vehicle::reference_position() const {
  const RigidBody& f = world_->body(frame_[0]);
  return f.to_world({cfg_.ref_offset_x, 0.0, 0.0});
}

void Vehicle::reference_attitude(double& roll, double& pitch, double& yaw) const {
  world_->body(frame_[0]).orn.to_euler(roll, pitch, yaw);
}

void Vehicle::frame_velocities(double& forward, double& lateral, double& yaw_rate) const {
  const RigidBody& f = world_->body(frame_[0]);
  Vec3 ref = f.to_world({cfg_.ref_offset_x, 0.0, 0.0});
  Vec3 v = f.point_velocity(ref);
  Vec3 v_body = f.orn.rotate_inv(v);
  forward = v_body.x;
  lateral = v_body.y;
  Vec3 w_body = f.orn.rotate_inv(f.ang_vel);
  yaw_rate = w_body.z;
}

void Vehicle::attach_payload(double mass_kg) {
  if (payload_body_ >= 0) throw ProtocolError("payload already attached");
  const RigidBody& rear = world_->body(frame_[2]);
  RigidBody load;
  load.name = "payload";
  load.mass = mass_kg;
  load.inertia = box_inertia(mass_kg, 2.0, 1.8, 1.2);
  load.pos = rear.to_world({0.0, 0.0, 1.0});
  load.orn = rear.orn;
  payload_body_ = world_->add_body(load);

  HingeJoint weld;
  weld.name = "payload_weld";
  weld.parent = frame_[2];
  weld.child = payload_body_;
  weld.anchor_parent = {0.0, 0.0, 1.0};
  weld.anchor_child = {0.0, 0.0, 0.0};
  weld.axis_parent = {0, 0, 1};
  weld.axis_child = {0, 0, 1};
  weld.ref_parent = {1, 0, 0};
  weld.ref_child = {1, 0, 0};
  weld.has_limits = true;
  weld.lo = weld.hi = 0.0;
  world_->add_hinge(weld);
}

VehicleState Vehicle::state() const {
  VehicleState st;
  st.position = reference_position();
  reference_attitude(st.roll, st.pitch, st.yaw);
  frame_velocities(st.v_forward, st.v_lateral, st.yaw_rate);

  for (int a = 0; a < 2; ++a) st.articulation[a] = world_->hinge_angle(artic_joints_[a]);

  double range = deg2rad(cfg_.susp_range_deg);
  for (int i = 0; i < 6; ++i) {
    double q = world_->hinge_angle(susp_joints_[i]);
    st.piston[i] = std::clamp((q + range) / (2.0 * range), 0.0, 1.0);
    st.wheel_speed[i] = world_->hinge_speed(wheel_joints_[i]);
  }

  st.load = wheel_loads();
  st.sidewall_contacts = sidewall_contacts();

  for (int i = 0; i < 6; ++i) {
    const RigidBody& wb = world_->body(wheels_[i]);
    const RigidBody& ab = world_->body(arms_[i]);
    Vec3 heading = ab.orn.rotate({1, 0, 0});
    double hn = std::hypot(heading.x, heading.y);
    double hx = hn > 1e-9 ? heading.x / hn : 1.0;
    double hy = hn > 1e-9 ? heading.y / hn : 0.0;
    double v_fwd = wb.lin_vel.x * hx + wb.lin_vel.y * hy;
    compute_slip(v_fwd, st.wheel_speed[i], cfg_.wheel_radius, hx, hy, wb.lin_vel.x, wb.lin_vel.y,
                 cfg_.v_eps, st.slip_long[i], st.slip_angle[i]);
  }

  auto [w, wmax] = joint_work();
  st.work_joints = w;
  st.work_max = wmax;
  return st;
}

}  // namespace xtrl
