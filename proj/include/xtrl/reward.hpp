#pragma once

#include <array>

#include "xtrl/math.hpp"

namespace xtrl {

// Shaping constants. Immutable per run; every value is logged with the run
// manifest.
struct RewardConstants {
  double f_control = 12.0;        // Hz
  double nominal_d0 = 20.0;       // m, nominal initial target distance
  double k_d = 5.0;               // m, heading sharpness scale
  double roll_threshold_deg = 5.0;
  double k_phi = kPi / 16.0;
  double v_lim = 0.8;             // m/s
  double k_speed = 2.0;
  double k_forces = 0.1;          // dimensionless, over normalized loads
  double k_lambda = 0.3;
  double k_alpha = 6.0;
  double k_energy = -1.0;
  double k_sidewall = -0.2;
  double target_distance_tol = 0.3;   // m
  double target_heading_tol_deg = 9.0;

  // Target bonus sized so it is exactly 5% of the resulting maximum return
  // at the nominal initial distance.
  double k_tar() const { return (0.05 / 0.95) * nominal_d0 * f_control; }
};

struct RewardBreakdown {
  double r_tar = 0.0;
  double r_prog = 0.0;
  double r_head = 0.0;
  double r_roll = 0.0;
  double r_speed = 0.0;
  double r_forces = 0.0;
  double r_slip_long = 0.0;
  double r_slip_lat = 0.0;
  double r_energy = 0.0;
  double r_side = 0.0;
  double total = 0.0;
};

namespace reward {

// (d_prev - d_t) * f_control
double progress(double d_prev, double d_t, const RewardConstants& k = {});

// exp(-0.5 (psi / (d_t / k_d))^2); d_t clamped below at 0.01 m
double heading_factor(double psi, double d_t, const RewardConstants& k = {});

// 1 inside the 5 deg band, exp(-0.5 (phi/k_phi)^2) outside
double roll_factor(double phi, const RewardConstants& k = {});

// min(1, exp(k_speed (v_lim - |v|)))
double speed_factor(double v, const RewardConstants& k = {});

// exp(-0.5 (sigma/k_forces)^2) with sigma the population std of the loads
double force_factor(const std::array<double, 6>& loads, const RewardConstants& k = {});

// (prod exp(-0.5 (lambda_i/k_lambda)^2), prod 0.5 cos(k_alpha alpha_i) + 0.5);
// alpha clipped at +-pi/k_alpha
void slip_factors(const std::array<double, 6>& lambda, const std::array<double, 6>& alpha,
                  double& r_long, double& r_lat, const RewardConstants& k = {});

// k_energy * w_joints / w_max
double energy_term(double w_joints, double w_max, const RewardConstants& k = {});

// k_sidewall * n
double sidewall_term(int n, const RewardConstants& k = {});

// k_tar when within (0.3 m, 9 deg) of the target, else 0
double target_bonus(double d_t, double psi, const RewardConstants& k = {});

// d0 * f_control + k_tar, the analytic maximum undiscounted return
double max_return(double d0, const RewardConstants& k = {});

// All terms plus the composed scalar:
// r = r_tar + r_prog r_roll r_speed r_forces (r_head + r_slip_long + r_slip_lat)/3
//       + r_energy + r_side
RewardBreakdown compose(double d_prev, double d_t, double psi, double phi, double v,
                        const std::array<double, 6>& loads, const std::array<double, 6>& lambda,
                        const std::array<double, 6>& alpha, double w_joints, double w_max,
                        int n_sidewall, const RewardConstants& k = {});

}  // namespace reward
}  // namespace xtrl
