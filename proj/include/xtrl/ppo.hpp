#pragma once

#include <cstdint>
#include <vector>

#include "xtrl/nn.hpp"
#include "xtrl/rng.hpp"

namespace xtrl {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;            // shared by policy and value
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int epochs = 10;
  int minibatch = 800;
  int horizon = 1280;           // transitions per update across all workers
  double lr = 25e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
};

// Per-step trajectory storage for one update, laid out as n_streams
// contiguous segments of steps_per_stream transitions each.
class RolloutBuffer {
 public:
  RolloutBuffer(int obs_dim, int act_dim, int n_streams, int steps_per_stream);

  int size() const { return n_streams_ * steps_per_stream_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  int n_streams() const { return n_streams_; }
  int steps_per_stream() const { return steps_per_stream_; }

  // Records one transition. value_next is V(s_{t+1}) used in the TD residual
  // (0 for absorbing terminations, the bootstrap value for truncations and
  // segment ends); chain is false when the GAE recursion must stop at t.
  void record(int stream, int t, const double* obs, const double* action, double logprob,
              double value, double reward, bool done, double value_next, bool chain);

  // Fills advantages and returns.
  void compute_advantages(double gamma, double lambda);

  const double* obs_at(int idx) const { return obs_.data() + static_cast<size_t>(idx) * obs_dim_; }
  const double* action_at(int idx) const {
    return actions_.data() + static_cast<size_t>(idx) * act_dim_;
  }
  double logprob_at(int idx) const { return logprobs_[idx]; }
  double value_at(int idx) const { return values_[idx]; }
  double reward_at(int idx) const { return rewards_[idx]; }
  double advantage_at(int idx) const { return advantages_[idx]; }
  double return_at(int idx) const { return returns_[idx]; }
  bool advantages_ready() const { return advantages_ready_; }

 private:
  int obs_dim_, act_dim_, n_streams_, steps_per_stream_;
  std::vector<double> obs_, actions_;
  std::vector<double> logprobs_, values_, rewards_, value_next_;
  std::vector<uint8_t> dones_, chain_;
  std::vector<double> advantages_, returns_;
  bool advantages_ready_ = false;
};

// GAE(lambda) recursion:
//   delta_t = r_t + gamma V(s_{t+1}) (1 - done_t) - V(s_t)
//   A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}
// bootstrap is V(s_T) when the final transition is a truncation, else unused.
void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                 const std::vector<uint8_t>& dones, double bootstrap, double gamma, double lambda,
                 std::vector<double>& advantages, std::vector<double>& returns);

// min(ratio * A, g(clip, A)) with g = (1 +- clip) A, averaged over the batch.
double clipped_policy_objective(const std::vector<double>& ratios,
                                const std::vector<double>& advantages, double clip);

// -policy_objective + value_coef * clipped value error - entropy_coef * entropy.
double total_loss(double policy_objective, double value_error, double entropy,
                  const PpoConfig& cfg);

struct UpdateDiagnostics {
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double explained_variance = 0.0;
  double policy_objective = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;
  bool aborted = false;  // non-finite loss, parameters restored
};

// 10 epochs of shuffled minibatches over the buffer. On a non-finite loss the
// update aborts and the previous parameters are kept.
class PpoUpdater {
 public:
  PpoUpdater(ActorCritic& policy, const PpoConfig& cfg, uint64_t seed);

  UpdateDiagnostics update(RolloutBuffer& buffer);
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  const PpoConfig& config() const { return cfg_; }

 private:
  ActorCritic& policy_;
  PpoConfig cfg_;
  Adam adam_;
  Rng rng_;
};

}  // namespace xtrl
