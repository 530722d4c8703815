#include "xtrl/simcore.hpp"

#include <algorithm>
#include <cmath>

#include "xtrl/errors.hpp"

namespace xtrl {

World::World(WorldParams params) : params_(params) {}

int World::add_body(const RigidBody& body) {
  if (body.mass <= 0.0) throw ConfigError("body mass must be positive");
  bodies_.push_back(body);
  RigidBody& b = bodies_.back();
  b.inv_mass = 1.0 / b.mass;
  b.inv_inertia_body = b.inertia.inverse();
  refresh_derived(b);
  return static_cast<int>(bodies_.size()) - 1;
}

int World::add_hinge(const HingeJoint& joint) {
  if (joint.parent < 0 || joint.parent >= body_count() || joint.child < 0 ||
      joint.child >= body_count())
    throw ConfigError("hinge references unknown body");
  joints_.push_back(joint);
  joints_.back().axis_parent = joints_.back().axis_parent.normalized();
  joints_.back().axis_child = joints_.back().axis_child.normalized();
  joints_.back().last_angle = measure_angle(joints_.back());
  return static_cast<int>(joints_.size()) - 1;
}

void World::set_motor(int joint, double target_speed, double effort_limit) {
  if (joint < 0 || joint >= hinge_count()) throw ConfigError("set_motor: unknown joint");
  if (effort_limit < 0.0) throw ConfigError("set_motor: negative effort limit");
  MotorState& m = joints_[joint].motor;
  m.enabled = effort_limit > 0.0;
  m.target_speed = target_speed;
  m.effort_limit = effort_limit;
}

double World::hinge_angle(int joint) const { return measure_angle(joints_[joint]); }

double World::hinge_speed(int joint) const {
  const HingeJoint& j = joints_[joint];
  const RigidBody& a = bodies_[j.parent];
  const RigidBody& b = bodies_[j.child];
  Vec3 axis = a.orn.rotate(j.axis_parent);
  return (b.ang_vel - a.ang_vel).dot(axis);
}

void World::refresh_derived(RigidBody& b) const {
  Mat3 r = b.orn.to_matrix();
  b.inv_inertia_world = r * b.inv_inertia_body * r.transposed();
}

double World::measure_angle(const HingeJoint& j) const {
  const RigidBody& a = bodies_[j.parent];
  const RigidBody& b = bodies_[j.child];
  Vec3 axis = a.orn.rotate(j.axis_parent);
  Vec3 ua = a.orn.rotate(j.ref_parent);
  Vec3 ub = b.orn.rotate(j.ref_child);
  // project refs onto the plane perpendicular to the axis
  ua = (ua - axis * ua.dot(axis)).normalized();
  ub = (ub - axis * ub.dot(axis)).normalized();
  return std::atan2(ua.cross(ub).dot(axis), ua.dot(ub));
}

namespace {

// Closest point on triangle abc to point p (Ericson 5.1.5).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    double v = d1 / (d1 - d3);
    return a + ab * v;
  }

  Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    double w = d2 / (d2 - d6);
    return a + ac * w;
  }

  double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + (c - b) * w;
  }

  double denom = 1.0 / (va + vb + vc);
  double v = vb * denom, w = vc * denom;
  return a + ab * v + ac * w;
}

struct TriangleHit {
  bool valid = false;
  double penetration = 0.0;
  Vec3 point, normal;
};

TriangleHit sphere_vs_triangle(const Vec3& center, double radius, const Vec3& a, const Vec3& b,
                               const Vec3& c) {
  TriangleHit hit;
  Vec3 tn = (b - a).cross(c - a);
  if (tn.z < 0.0) tn = -tn;
  tn = tn.normalized();

  Vec3 cp = closest_point_on_triangle(center, a, b, c);
  Vec3 d = center - cp;
  double dist = d.norm();
  if (dist < 1e-12) {
    hit.valid = true;
    hit.penetration = radius;
    hit.point = cp;
    hit.normal = tn;
    return hit;
  }
  Vec3 n = d / dist;
  if (n.dot(tn) < 0.0) {
    // center below the surface: push out along the triangle normal
    hit.valid = true;
    hit.penetration = radius + dist;
    hit.point = cp;
    hit.normal = tn;
    return hit;
  }
  if (dist < radius) {
    hit.valid = true;
    hit.penetration = radius - dist;
    hit.point = cp;
    hit.normal = n;
  }
  return hit;
}

}  // namespace

std::vector<ContactPoint> World::detect_contacts() const {
  std::vector<ContactPoint> contacts;
  if (!terrain_) return contacts;
  const HeightField& hf = *terrain_;

  for (int bi = 0; bi < body_count(); ++bi) {
    const RigidBody& body = bodies_[bi];
    if (body.sphere_radius <= 0.0) continue;
    Vec3 c = body.to_world(body.sphere_offset);
    double r = body.sphere_radius;

    int ix0 = static_cast<int>(std::floor((c.x - r - hf.origin_x()) / hf.dx()));
    int ix1 = static_cast<int>(std::floor((c.x + r - hf.origin_x()) / hf.dx()));
    int iy0 = static_cast<int>(std::floor((c.y - r - hf.origin_y()) / hf.dy()));
    int iy1 = static_cast<int>(std::floor((c.y + r - hf.origin_y()) / hf.dy()));
    ix0 = std::clamp(ix0, 0, hf.nx() - 2);
    ix1 = std::clamp(ix1, 0, hf.nx() - 2);
    iy0 = std::clamp(iy0, 0, hf.ny() - 2);
    iy1 = std::clamp(iy1, 0, hf.ny() - 2);
    if (c.x + r < hf.origin_x() || c.x - r > hf.max_x() || c.y + r < hf.origin_y() ||
        c.y - r > hf.max_y())
      continue;

    TriangleHit best;
    for (int iy = iy0; iy <= iy1; ++iy) {
      for (int ix = ix0; ix <= ix1; ++ix) {
        double x0 = hf.origin_x() + ix * hf.dx(), x1 = x0 + hf.dx();
        double y0 = hf.origin_y() + iy * hf.dy(), y1 = y0 + hf.dy();
        Vec3 p00{x0, y0, hf.at(ix, iy)};
        Vec3 p10{x1, y0, hf.at(ix + 1, iy)};
        Vec3 p01{x0, y1, hf.at(ix, iy + 1)};
        Vec3 p11{x1, y1, hf.at(ix + 1, iy + 1)};
        // same diagonal split as sample_height
        for (const TriangleHit& hit : {sphere_vs_triangle(c, r, p00, p10, p11),
                                       sphere_vs_triangle(c, r, p00, p11, p01)}) {
          if (hit.valid && (!best.valid || hit.penetration > best.penetration)) best = hit;
        }
      }
    }
    if (best.valid) {
      ContactPoint cp;
      cp.position = best.point;
      cp.normal = best.normal;
      cp.penetration = best.penetration;
      cp.body = bi;
      cp.other = -1;
      contacts.push_back(cp);
    }
  }
  return contacts;
}

namespace {

struct JointSolveData {
  Vec3 ra, rb;          // world, from COM to anchors
  Vec3 c_point;         // anchor error pb - pa
  Vec3 axis;            // world hinge axis (parent)
  Vec3 d1, d2;          // angular row directions for axis alignment
  double c1 = 0.0, c2 = 0.0;  // alignment errors
  Mat3 k_point;
  double k_align[2][2] = {{0, 0}, {0, 0}};
  double m_axis = 0.0;  // effective mass about the axis
  double angle = 0.0;
  double motor_impulse = 0.0;
  double limit_impulse = 0.0;
  int limit_side = 0;   // -1 below lo, +1 above hi, 2 weld, 0 inactive
};

struct ContactSolveData {
  Vec3 r;
  Vec3 t1, t2;
  double m_n = 0.0, m_t1 = 0.0, m_t2 = 0.0;
  double bias = 0.0;
  double impulse_n = 0.0;
  double impulse_t1 = 0.0, impulse_t2 = 0.0;
};

inline void apply_impulse(RigidBody& b, const Vec3& impulse, const Vec3& r) {
  b.lin_vel += impulse * b.inv_mass;
  b.ang_vel += b.inv_inertia_world * r.cross(impulse);
}

inline void apply_angular_impulse(RigidBody& b, const Vec3& impulse) {
  b.ang_vel += b.inv_inertia_world * impulse;
}

}  // namespace

void World::step() {
  const double dt = kDt;
  const double inv_dt = 1.0 / dt;
  const double beta = params_.baumgarte;

  for (auto& b : bodies_) {
    refresh_derived(b);
    b.lin_vel.z -= params_.gravity * dt;
  }

  contacts_ = detect_contacts();

  // --- prepare joints ---
  std::vector<JointSolveData> jd(joints_.size());
  for (size_t i = 0; i < joints_.size(); ++i) {
    HingeJoint& j = joints_[i];
    RigidBody& a = bodies_[j.parent];
    RigidBody& b = bodies_[j.child];
    JointSolveData& d = jd[i];

    Vec3 pa = a.to_world(j.anchor_parent);
    Vec3 pb = b.to_world(j.anchor_child);
    d.ra = pa - a.pos;
    d.rb = pb - b.pos;
    d.c_point = pb - pa;

    Mat3 identity_scaled = Mat3::diagonal(a.inv_mass + b.inv_mass, a.inv_mass + b.inv_mass,
                                          a.inv_mass + b.inv_mass);
    Mat3 sa = Mat3::skew(d.ra);
    Mat3 sb = Mat3::skew(d.rb);
    d.k_point = identity_scaled - sa * a.inv_inertia_world * sa - sb * b.inv_inertia_world * sb;

    d.axis = a.orn.rotate(j.axis_parent);
    Vec3 nb = b.orn.rotate(j.axis_child);
    // orthonormal basis perpendicular to the parent axis
    Vec3 p = std::abs(d.axis.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    p = (p - d.axis * p.dot(d.axis)).normalized();
    Vec3 q = d.axis.cross(p);
    d.c1 = p.dot(nb);
    d.c2 = q.dot(nb);
    d.d1 = nb.cross(p);
    d.d2 = nb.cross(q);
    Mat3 isum = a.inv_inertia_world + b.inv_inertia_world;
    d.k_align[0][0] = d.d1.dot(isum * d.d1);
    d.k_align[0][1] = d.d1.dot(isum * d.d2);
    d.k_align[1][0] = d.k_align[0][1];
    d.k_align[1][1] = d.d2.dot(isum * d.d2);

    double ka = d.axis.dot(isum * d.axis);
    d.m_axis = ka > 1e-12 ? 1.0 / ka : 0.0;

    d.angle = measure_angle(j);
    if (j.has_limits) {
      if (j.lo == j.hi) d.limit_side = 2;
      else if (d.angle < j.lo) d.limit_side = -1;
      else if (d.angle > j.hi) d.limit_side = 1;
    }
  }

  // --- prepare contacts ---
  std::vector<ContactSolveData> cd(contacts_.size());
  for (size_t i = 0; i < contacts_.size(); ++i) {
    ContactPoint& c = contacts_[i];
    RigidBody& b = bodies_[c.body];
    ContactSolveData& d = cd[i];
    d.r = c.position - b.pos;

    Vec3 n = c.normal;
    Vec3 tmp = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    d.t1 = (tmp - n * tmp.dot(n)).normalized();
    d.t2 = n.cross(d.t1);

    auto eff_mass = [&](const Vec3& dir) {
      Vec3 rxd = d.r.cross(dir);
      double k = b.inv_mass + dir.dot((b.inv_inertia_world * rxd).cross(d.r));
      return k > 1e-12 ? 1.0 / k : 0.0;
    };
    d.m_n = eff_mass(n);
    d.m_t1 = eff_mass(d.t1);
    d.m_t2 = eff_mass(d.t2);
    d.bias = beta * inv_dt * std::max(0.0, c.penetration - params_.contact_slop);
  }

  // --- solve ---
  for (int it = 0; it < params_.solver_iterations; ++it) {
    for (size_t i = 0; i < joints_.size(); ++i) {
      HingeJoint& j = joints_[i];
      JointSolveData& d = jd[i];
      RigidBody& a = bodies_[j.parent];
      RigidBody& b = bodies_[j.child];

      // motor along the axis
      if (j.motor.enabled && d.m_axis > 0.0) {
        double rel = (b.ang_vel - a.ang_vel).dot(d.axis);
        double lam = d.m_axis * (j.motor.target_speed - rel);
        double max_imp = j.motor.effort_limit * dt;
        double next = std::clamp(d.motor_impulse + lam, -max_imp, max_imp);
        double delta = next - d.motor_impulse;
        d.motor_impulse = next;
        apply_angular_impulse(b, d.axis * delta);
        apply_angular_impulse(a, d.axis * -delta);
      }

      // angle limit / weld along the axis
      if (d.limit_side != 0 && d.m_axis > 0.0) {
        double rel = (b.ang_vel - a.ang_vel).dot(d.axis);
        double violation = d.limit_side == -1 ? d.angle - j.lo
                          : d.limit_side == 1 ? d.angle - j.hi
                                              : d.angle - j.lo;
        double lam = d.m_axis * (-rel - beta * inv_dt * violation);
        double next = d.limit_impulse + lam;
        if (d.limit_side == -1) next = std::max(0.0, next);
        if (d.limit_side == 1) next = std::min(0.0, next);
        double delta = next - d.limit_impulse;
        d.limit_impulse = next;
        apply_angular_impulse(b, d.axis * delta);
        apply_angular_impulse(a, d.axis * -delta);
      }

      // axis alignment (2 angular rows)
      {
        Vec3 wrel = b.ang_vel - a.ang_vel;
        double rhs[2] = {-(wrel.dot(d.d1) + beta * inv_dt * d.c1),
                         -(wrel.dot(d.d2) + beta * inv_dt * d.c2)};
        double lam[2];
        solve2x2(d.k_align, rhs, lam);
        Vec3 ang = d.d1 * lam[0] + d.d2 * lam[1];
        apply_angular_impulse(b, ang);
        apply_angular_impulse(a, -ang);
      }

      // anchor point (3 rows)
      {
        Vec3 jv = b.lin_vel + b.ang_vel.cross(d.rb) - a.lin_vel - a.ang_vel.cross(d.ra);
        Vec3 rhs = -(jv + d.c_point * (beta * inv_dt));
        Vec3 lam = solve3x3(d.k_point, rhs);
        apply_impulse(b, lam, d.rb);
        apply_impulse(a, -lam, d.ra);
      }
    }

    for (size_t i = 0; i < contacts_.size(); ++i) {
      ContactPoint& c = contacts_[i];
      ContactSolveData& d = cd[i];
      RigidBody& b = bodies_[c.body];

      // normal, non-penetration
      {
        double vn = (b.lin_vel + b.ang_vel.cross(d.r)).dot(c.normal);
        double lam = d.m_n * (d.bias - vn);
        double next = std::max(0.0, d.impulse_n + lam);
        double delta = next - d.impulse_n;
        d.impulse_n = next;
        apply_impulse(b, c.normal * delta, d.r);
      }

      // friction box solve + cone projection
      double max_f = params_.friction * d.impulse_n;
      {
        double vt = (b.lin_vel + b.ang_vel.cross(d.r)).dot(d.t1);
        double lam = -d.m_t1 * vt;
        double next = std::clamp(d.impulse_t1 + lam, -max_f, max_f);
        double delta = next - d.impulse_t1;
        d.impulse_t1 = next;
        apply_impulse(b, d.t1 * delta, d.r);
      }
      {
        double vt = (b.lin_vel + b.ang_vel.cross(d.r)).dot(d.t2);
        double lam = -d.m_t2 * vt;
        double next = std::clamp(d.impulse_t2 + lam, -max_f, max_f);
        double delta = next - d.impulse_t2;
        d.impulse_t2 = next;
        apply_impulse(b, d.t2 * delta, d.r);
      }
      double tmag = std::sqrt(d.impulse_t1 * d.impulse_t1 + d.impulse_t2 * d.impulse_t2);
      if (tmag > max_f && tmag > 1e-12) {
        double scale = max_f / tmag;
        double n1 = d.impulse_t1 * scale, n2 = d.impulse_t2 * scale;
        Vec3 delta = d.t1 * (n1 - d.impulse_t1) + d.t2 * (n2 - d.impulse_t2);
        d.impulse_t1 = n1;
        d.impulse_t2 = n2;
        apply_impulse(b, delta, d.r);
      }
    }
  }

  // --- record solver outputs ---
  for (size_t i = 0; i < joints_.size(); ++i) {
    HingeJoint& j = joints_[i];
    j.applied_effort = jd[i].motor_impulse * inv_dt;
    j.last_angle = jd[i].angle;
    j.last_speed = (bodies_[j.child].ang_vel - bodies_[j.parent].ang_vel).dot(jd[i].axis);
  }
  for (size_t i = 0; i < contacts_.size(); ++i) {
    contacts_[i].normal_force = cd[i].impulse_n * inv_dt;
    contacts_[i].tangential_force =
        std::sqrt(cd[i].impulse_t1 * cd[i].impulse_t1 + cd[i].impulse_t2 * cd[i].impulse_t2) *
        inv_dt;
  }

  // --- integrate ---
  for (auto& b : bodies_) {
    b.pos += b.lin_vel * dt;
    Quat omega(0.0, b.ang_vel.x, b.ang_vel.y, b.ang_vel.z);
    Quat dq = omega * b.orn;
    b.orn.w += 0.5 * dt * dq.w;
    b.orn.x += 0.5 * dt * dq.x;
    b.orn.y += 0.5 * dt * dq.y;
    b.orn.z += 0.5 * dt * dq.z;
    b.orn.normalize();
  }

  ++step_count_;

  for (const auto& b : bodies_) {
    if (b.lin_vel.norm() > params_.max_velocity || b.ang_vel.norm() > params_.max_velocity ||
        !std::isfinite(b.lin_vel.norm()))
      throw SimulationUnstableError(step_count_, "solver divergence: body '" + b.name +
                                                     "' exceeded velocity limit");
  }
}

double World::total_energy() const {
  double e = 0.0;
  for (const auto& b : bodies_) {
    Mat3 r = b.orn.to_matrix();
    Mat3 inertia_world = r * b.inertia * r.transposed();
    e += 0.5 * b.mass * b.lin_vel.norm2();
    e += 0.5 * b.ang_vel.dot(inertia_world * b.ang_vel);
    e += b.mass * params_.gravity * b.pos.z;
  }
  return e;
}

}  // namespace xtrl
