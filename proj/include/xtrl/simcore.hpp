#pragma once

#include <memory>
#include <string>
#include <vector>

#include "xtrl/heightfield.hpp"
#include "xtrl/math.hpp"

namespace xtrl {

struct RigidBody {
  std::string name;
  double mass = 1.0;            // kg
  Mat3 inertia = Mat3::identity();  // body frame, kg m^2
  Vec3 pos;                     // world, m
  Quat orn;                     // world
  Vec3 lin_vel;                 // world, m/s
  Vec3 ang_vel;                 // world, rad/s
  double sphere_radius = 0.0;   // collision sphere; <= 0 means no collision shape
  Vec3 sphere_offset;           // sphere center in body frame

  // derived, refreshed every step
  double inv_mass = 1.0;
  Mat3 inv_inertia_body = Mat3::identity();
  Mat3 inv_inertia_world = Mat3::identity();

  Vec3 point_velocity(const Vec3& world_point) const {
    return lin_vel + ang_vel.cross(world_point - pos);
  }
  Vec3 to_world(const Vec3& local) const { return pos + orn.rotate(local); }
};

struct MotorState {
  bool enabled = false;
  double target_speed = 0.0;   // rad/s along the hinge axis
  double effort_limit = 0.0;   // N m
};

// Hinge between parent and child. Anchors/axes in each body frame; the ref
// vectors (perpendicular to the axis) define the zero of the measured angle.
struct HingeJoint {
  std::string name;
  int parent = -1;
  int child = -1;
  Vec3 anchor_parent, anchor_child;
  Vec3 axis_parent{0, 0, 1}, axis_child{0, 0, 1};
  Vec3 ref_parent{1, 0, 0}, ref_child{1, 0, 0};
  bool has_limits = false;
  double lo = 0.0, hi = 0.0;   // rad; lo == hi locks the axis (weld)
  MotorState motor;

  // solver results from the last step
  double applied_effort = 0.0;   // motor torque actually applied, N m
  double last_angle = 0.0;       // rad
  double last_speed = 0.0;       // rad/s
};

struct ContactPoint {
  Vec3 position;
  Vec3 normal;            // unit, pointing from terrain into the body
  double penetration = 0.0;
  double normal_force = 0.0;      // N, filled after the solve
  double tangential_force = 0.0;  // N
  int body = -1;
  int other = -1;         // -1 = terrain
};

struct WorldParams {
  double gravity = 9.81;          // m/s^2, downward
  double friction = 0.7;          // Coulomb mu
  int solver_iterations = 20;
  double baumgarte = 0.2;
  double contact_slop = 0.005;    // m of tolerated penetration
  double max_velocity = 1e3;      // divergence guard, m/s
};

// Fixed-step (1/60 s) rigid multibody world. Single-owner: one environment
// mutates it; independent worlds may run concurrently.
class World {
 public:
  static constexpr double kDt = 1.0 / 60.0;

  explicit World(WorldParams params = {});

  void set_terrain(std::shared_ptr<const HeightField> terrain) { terrain_ = std::move(terrain); }
  const HeightField* terrain() const { return terrain_.get(); }

  int add_body(const RigidBody& body);
  int add_hinge(const HingeJoint& joint);

  RigidBody& body(int i) { return bodies_[i]; }
  const RigidBody& body(int i) const { return bodies_[i]; }
  HingeJoint& hinge(int i) { return joints_[i]; }
  const HingeJoint& hinge(int i) const { return joints_[i]; }
  int body_count() const { return static_cast<int>(bodies_.size()); }
  int hinge_count() const { return static_cast<int>(joints_.size()); }

  // Speed-constraint motor: during the next solves the motor applies the
  // minimal torque, capped at effort_limit, driving the joint speed toward
  // target_speed. A torque command of tau is expressed as target speed
  // sign(tau)*inf with limit |tau|.
  void set_motor(int joint, double target_speed, double effort_limit);

  double hinge_angle(int joint) const;
  double hinge_speed(int joint) const;

  // Sphere vs. triangulated-heightfield contacts, merged to the single
  // deepest point per body. Forces are zero until the next step() fills them.
  std::vector<ContactPoint> detect_contacts() const;

  // Advance one 1/60 s step: detect contacts, solve joints + contacts +
  // motors iteratively, integrate. Throws SimulationUnstableError on
  // divergence.
  void step();

  const std::vector<ContactPoint>& last_contacts() const { return contacts_; }
  long step_count() const { return step_count_; }
  const WorldParams& params() const { return params_; }
  WorldParams& params() { return params_; }

  // Kinetic + gravitational potential energy of all bodies.
  double total_energy() const;

 private:
  void refresh_derived(RigidBody& b) const;
  double measure_angle(const HingeJoint& j) const;

  WorldParams params_;
  std::shared_ptr<const HeightField> terrain_;
  std::vector<RigidBody> bodies_;
  std::vector<HingeJoint> joints_;
  std::vector<ContactPoint> contacts_;
  long step_count_ = 0;
};

}  // namespace xtrl
