#pragma once

#include <array>
#include <cstdint>

#include "xtrl/simcore.hpp"

namespace xtrl {

// 14 components in [-1, 1]: [art_front, art_rear, piston 1..6, wheel torque 1..6].
using Action = std::array<double, 14>;

// Geometric and actuation constants of the vehicle model. All defaults are
// overridable through the run configuration.
struct VehicleConfig {
  double total_mass = 16800.0;       // kg
  double wheel_mass = 350.0;         // kg each
  double arm_mass = 150.0;           // kg each
  // remaining mass split over front/mid/rear frame segments
  std::array<double, 3> frame_split{0.40, 0.25, 0.35};

  std::array<double, 3> seg_length{2.5, 2.0, 2.5};  // m, front/mid/rear
  double frame_width = 2.0;          // m, for inertia
  double frame_depth = 0.8;          // m, vertical extent for inertia
  double track_width = 2.2;          // m between left and right wheel centers
  double wheel_radius = 0.8;         // m
  double arm_length = 1.0;           // m, suspension arm pivot to wheel center
  double arm_neutral_deg = 25.0;     // arm angle below horizontal at neutral
  double susp_range_deg = 40.0;      // +- range of the suspension hinge
  double artic_range_deg = 40.0;     // +- range of the frame articulation

  double artic_torque_limit = 50e3;  // N m
  double wheel_torque_limit = 20e3;  // N m
  double piston_force_limit = 270e3; // N
  double piston_lever_arm = 0.4;     // m; hinge torque limit = force * lever

  double kp = 5.0;                   // P controller gain, 1/s
  double artic_max_speed = 0.5;      // rad/s
  double susp_max_speed = 0.5;       // rad/s
  double wheel_speed_clamp = 1.5;    // rad/s; accelerating torque above this is cut

  double ref_offset_x = 0.95;        // reference frame, ahead of front segment center
  double belly_radius = 0.45;        // m, chassis-contact sphere per segment
  double belly_drop = 0.2;           // m below segment center
  double v_eps = 0.05;               // m/s, low speed slip guard
  double control_dt = 5.0 / 60.0;    // s, one action interval

  double susp_torque_limit() const { return piston_force_limit * piston_lever_arm; }
};

struct VehicleState {
  Vec3 position;                 // reference frame, world
  double roll = 0.0, pitch = 0.0, yaw = 0.0;
  double v_forward = 0.0, v_lateral = 0.0, yaw_rate = 0.0;
  std::array<double, 2> articulation{};      // rad
  std::array<double, 6> piston{};            // normalized [0, 1]
  std::array<double, 6> wheel_speed{};       // rad/s
  std::array<double, 6> slip_long{};         // lambda
  std::array<double, 6> slip_angle{};        // alpha, rad
  std::array<double, 6> load{};              // fraction of vehicle weight
  int sidewall_contacts = 0;
  double work_joints = 0.0;      // J over the last control interval
  double work_max = 0.0;         // J, analytic bound per control interval
};

// The assembled 15-body vehicle: 3 frame segments, 6 suspension arms,
// 6 wheels, with 2 articulation hinges, 6 suspension hinges and 6 wheel
// hinges. Owned by exactly one World.
class Vehicle {
 public:
  // Builds the model into the world at the given planar pose. Wheels are
  // placed just above the terrain; call settle() or run the environment's
  // settling phase afterwards.
  Vehicle(World& world, const VehicleConfig& cfg, double x, double y, double yaw);

  // Stores motor targets for the next control interval. Components are
  // clamped to [-1, 1]; non-finite values raise InvalidActionError.
  void apply_action(const Action& action);

  // One 1/60 s physics step under the current targets: runs the P
  // controllers, enforces the wheel torque clamp, steps the world and
  // accumulates joint work.
  void substep();

  // Marks the start of a control interval (resets the work accumulator).
  void begin_control_interval();

  VehicleState state() const;

  // Slip of one wheel. Exposed for direct kinematic checks.
  static void compute_slip(double v_forward, double wheel_omega, double radius,
                           double heading_x, double heading_y, double vel_x, double vel_y,
                           double v_eps, double& lambda, double& alpha);

  std::array<double, 6> wheel_loads() const;
  int sidewall_contacts() const;
  // (accumulated work, analytic bound) for the current control interval.
  std::pair<double, double> joint_work() const;

  // True when a frame segment touches the terrain (wheels and arms excluded).
  bool chassis_contact() const;

  // Sum of wheel-ground normal forces, N.
  double total_wheel_normal_force() const;

  // Reference frame pose: position of the point 30 cm behind the cabin and
  // the front segment attitude.
  Vec3 reference_position() const;
  void reference_attitude(double& roll, double& pitch, double& yaw) const;
  // Planar velocity of the reference point in the front segment frame.
  void frame_velocities(double& forward, double& lateral, double& yaw_rate) const;

  // Rigidly attaches a payload block on the rear segment (sweep load case).
  void attach_payload(double mass_kg);

  const VehicleConfig& config() const { return cfg_; }
  World& world() { return *world_; }

  int front_body() const { return frame_[0]; }
  int wheel_body(int i) const { return wheels_[i]; }
  int wheel_joint(int i) const { return wheel_joints_[i]; }
  int susp_joint(int i) const { return susp_joints_[i]; }
  int artic_joint(int i) const { return artic_joints_[i]; }

 private:
  void update_motors();

  World* world_;
  VehicleConfig cfg_;
  std::array<int, 3> frame_{};       // front, mid, rear body ids
  std::array<int, 6> arms_{};        // FL, FR, ML, MR, RL, RR
  std::array<int, 6> wheels_{};
  std::array<int, 2> artic_joints_{};
  std::array<int, 6> susp_joints_{};
  std::array<int, 6> wheel_joints_{};
  int payload_body_ = -1;

  std::array<double, 2> artic_target_{};   // rad
  std::array<double, 6> susp_target_{};    // rad
  std::array<double, 6> wheel_torque_{};   // N m
  double work_accum_ = 0.0;
};

}  // namespace xtrl
