#include "xtrl/reward.hpp"

#include <algorithm>
#include <cmath>

#include "xtrl/errors.hpp"

namespace xtrl::reward {

double progress(double d_prev, double d_t, const RewardConstants& k) {
  return (d_prev - d_t) * k.f_control;
}

double heading_factor(double psi, double d_t, const RewardConstants& k) {
  double d = std::max(d_t, 0.01);
  double z = psi / (d / k.k_d);
  return std::exp(-0.5 * z * z);
}

double roll_factor(double phi, const RewardConstants& k) {
  if (std::abs(phi) <= deg2rad(k.roll_threshold_deg)) return 1.0;
  double z = phi / k.k_phi;
  return std::exp(-0.5 * z * z);
}

double speed_factor(double v, const RewardConstants& k) {
  return std::min(1.0, std::exp(k.k_speed * (k.v_lim - std::abs(v))));
}

double force_factor(const std::array<double, 6>& loads, const RewardConstants& k) {
  double mean = 0.0;
  for (double l : loads) mean += l;
  mean /= 6.0;
  double var = 0.0;
  for (double l : loads) var += (l - mean) * (l - mean);
  var /= 6.0;
  double sigma = std::sqrt(var);
  double z = sigma / k.k_forces;
  return std::exp(-0.5 * z * z);
}

void slip_factors(const std::array<double, 6>& lambda, const std::array<double, 6>& alpha,
                  double& r_long, double& r_lat, const RewardConstants& k) {
  r_long = 1.0;
  r_lat = 1.0;
  double alpha_clip = kPi / k.k_alpha;
  for (int i = 0; i < 6; ++i) {
    double zl = lambda[i] / k.k_lambda;
    r_long *= std::exp(-0.5 * zl * zl);
    double a = std::clamp(alpha[i], -alpha_clip, alpha_clip);
    r_lat *= 0.5 * std::cos(k.k_alpha * a) + 0.5;
  }
}

double energy_term(double w_joints, double w_max, const RewardConstants& k) {
  if (w_max <= 0.0) throw ConfigError("energy_term: w_max must be positive");
  return k.k_energy * w_joints / w_max;
}

double sidewall_term(int n, const RewardConstants& k) { return k.k_sidewall * n; }

double target_bonus(double d_t, double psi, const RewardConstants& k) {
  bool at_target =
      d_t < k.target_distance_tol && std::abs(psi) < deg2rad(k.target_heading_tol_deg);
  return at_target ? k.k_tar() : 0.0;
}

double max_return(double d0, const RewardConstants& k) { return d0 * k.f_control + k.k_tar(); }

RewardBreakdown compose(double d_prev, double d_t, double psi, double phi, double v,
                        const std::array<double, 6>& loads, const std::array<double, 6>& lambda,
                        const std::array<double, 6>& alpha, double w_joints, double w_max,
                        int n_sidewall, const RewardConstants& k) {
  RewardBreakdown r;
  r.r_tar = target_bonus(d_t, psi, k);
  r.r_prog = progress(d_prev, d_t, k);
  r.r_head = heading_factor(psi, d_t, k);
  r.r_roll = roll_factor(phi, k);
  r.r_speed = speed_factor(v, k);
  r.r_forces = force_factor(loads, k);
  slip_factors(lambda, alpha, r.r_slip_long, r.r_slip_lat, k);
  r.r_energy = energy_term(w_joints, w_max, k);
  r.r_side = sidewall_term(n_sidewall, k);
  r.total = r.r_tar +
            r.r_prog * r.r_roll * r.r_speed * r.r_forces *
                (r.r_head + r.r_slip_long + r.r_slip_lat) / 3.0 +
            r.r_energy + r.r_side;
  return r;
}

}  // namespace xtrl::reward
