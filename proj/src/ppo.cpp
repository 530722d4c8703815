#include "xtrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xtrl/errors.hpp"

namespace xtrl {

RolloutBuffer::RolloutBuffer(int obs_dim, int act_dim, int n_streams, int steps_per_stream)
    : obs_dim_(obs_dim), act_dim_(act_dim), n_streams_(n_streams),
      steps_per_stream_(steps_per_stream) {
  size_t n = static_cast<size_t>(size());
  obs_.assign(n * obs_dim_, 0.0);
  actions_.assign(n * act_dim_, 0.0);
  logprobs_.assign(n, 0.0);
  values_.assign(n, 0.0);
  rewards_.assign(n, 0.0);
  value_next_.assign(n, 0.0);
  dones_.assign(n, 0);
  chain_.assign(n, 0);
  advantages_.assign(n, 0.0);
  returns_.assign(n, 0.0);
}

void RolloutBuffer::record(int stream, int t, const double* obs, const double* action,
                           double logprob, double value, double reward, bool done,
                           double value_next, bool chain) {
  if (stream < 0 || stream >= n_streams_ || t < 0 || t >= steps_per_stream_)
    throw ProtocolError("rollout record out of range");
  size_t idx = static_cast<size_t>(stream) * steps_per_stream_ + t;
  std::copy(obs, obs + obs_dim_, obs_.begin() + idx * obs_dim_);
  std::copy(action, action + act_dim_, actions_.begin() + idx * act_dim_);
  logprobs_[idx] = logprob;
  values_[idx] = value;
  rewards_[idx] = reward;
  dones_[idx] = done ? 1 : 0;
  value_next_[idx] = value_next;
  chain_[idx] = chain ? 1 : 0;
  advantages_ready_ = false;
}

void RolloutBuffer::compute_advantages(double gamma, double lambda) {
  for (int s = 0; s < n_streams_; ++s) {
    double a_next = 0.0;
    for (int t = steps_per_stream_ - 1; t >= 0; --t) {
      size_t idx = static_cast<size_t>(s) * steps_per_stream_ + t;
      double delta = rewards_[idx] + gamma * value_next_[idx] - values_[idx];
      double a = delta + gamma * lambda * (chain_[idx] ? a_next : 0.0);
      advantages_[idx] = a;
      returns_[idx] = a + values_[idx];
      a_next = a;
    }
  }
  advantages_ready_ = true;
}

void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                 const std::vector<uint8_t>& dones, double bootstrap, double gamma, double lambda,
                 std::vector<double>& advantages, std::vector<double>& returns) {
  size_t n = rewards.size();
  if (values.size() != n || dones.size() != n)
    throw ConfigError("compute_gae: array length mismatch");
  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
  double a_next = 0.0;
  for (size_t k = n; k-- > 0;) {
    bool done = dones[k] != 0;
    double v_next = done ? 0.0 : (k + 1 < n ? values[k + 1] : bootstrap);
    double delta = rewards[k] + gamma * v_next - values[k];
    double chain = (!done && k + 1 < n) ? 1.0 : 0.0;
    a_next = delta + gamma * lambda * chain * a_next;
    advantages[k] = a_next;
    returns[k] = a_next + values[k];
  }
}

double clipped_policy_objective(const std::vector<double>& ratios,
                                const std::vector<double>& advantages, double clip) {
  if (ratios.size() != advantages.size())
    throw ConfigError("clipped_policy_objective: length mismatch");
  double sum = 0.0;
  size_t used = 0;
  for (size_t i = 0; i < ratios.size(); ++i) {
    if (!std::isfinite(ratios[i])) continue;  // skip and count below
    double a = advantages[i];
    double g = a >= 0.0 ? (1.0 + clip) * a : (1.0 - clip) * a;
    sum += std::min(ratios[i] * a, g);
    ++used;
  }
  return used > 0 ? sum / static_cast<double>(used) : 0.0;
}

double total_loss(double policy_objective, double value_error, double entropy,
                  const PpoConfig& cfg) {
  return -policy_objective + cfg.value_coef * value_error - cfg.entropy_coef * entropy;
}

PpoUpdater::PpoUpdater(ActorCritic& policy, const PpoConfig& cfg, uint64_t seed)
    : policy_(policy), cfg_(cfg),
      adam_(policy.parameters(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps), rng_(seed) {}

UpdateDiagnostics PpoUpdater::update(RolloutBuffer& buffer) {
  const int n = buffer.size();
  const int act_dim = policy_.action_dim();
  UpdateDiagnostics diag;

  if (!buffer.advantages_ready()) buffer.compute_advantages(cfg_.gamma, cfg_.gae_lambda);

  std::vector<double> adv(n);
  for (int i = 0; i < n; ++i) adv[i] = buffer.advantage_at(i);
  if (cfg_.normalize_advantages) {
    double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    double std = std::sqrt(var / n);
    for (double& a : adv) a = (a - mean) / (std + 1e-8);
  }

  // explained variance of the behavior-policy value fit
  {
    double mean_r = 0.0;
    for (int i = 0; i < n; ++i) mean_r += buffer.return_at(i);
    mean_r /= n;
    double var_r = 0.0, var_e = 0.0;
    for (int i = 0; i < n; ++i) {
      double r = buffer.return_at(i);
      double e = r - buffer.value_at(i);
      var_r += (r - mean_r) * (r - mean_r);
      var_e += e * e;
    }
    diag.explained_variance = var_r > 1e-12 ? 1.0 - var_e / var_r : 0.0;
  }

  // snapshot for abort-and-restore on a non-finite loss
  std::vector<std::vector<double>> snapshot;
  for (Tensor* p : policy_.parameters()) snapshot.push_back(p->v);

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  std::vector<double> mu(act_dim), dmu(act_dim), dmu_lp(act_dim), dls_lp(act_dim);
  ActorCritic::Trace trace;

  double sum_ratio = 0.0, sum_clipped = 0.0, sum_kl = 0.0;
  double sum_pobj = 0.0, sum_vloss = 0.0, sum_entropy = 0.0, sum_gnorm = 0.0;
  long count_samples = 0, count_batches = 0;

  Tensor& log_std = policy_.log_std_tensor();

  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    // Fisher-Yates with the update's own stream
    for (int i = n - 1; i > 0; --i) {
      int j = static_cast<int>(rng_.uniform_index(static_cast<uint64_t>(i) + 1));
      std::swap(perm[i], perm[j]);
    }

    for (int start = 0; start < n; start += cfg_.minibatch) {
      int end = std::min(start + cfg_.minibatch, n);
      int batch = end - start;
      policy_.zero_grad();

      double batch_pobj = 0.0, batch_verr = 0.0;
      for (int s = start; s < end; ++s) {
        int idx = perm[s];
        const double* obs = buffer.obs_at(idx);
        double value;
        policy_.forward(obs, mu.data(), &value, &trace);
        double logp = gaussian_logprob(mu.data(), log_std.v.data(), buffer.action_at(idx),
                                       act_dim, dmu_lp.data(), dls_lp.data());
        double logp_old = buffer.logprob_at(idx);
        double ratio = std::exp(logp - logp_old);
        double a = adv[idx];

        sum_ratio += ratio;
        sum_kl += logp_old - logp;
        if (std::abs(ratio - 1.0) > cfg_.clip) sum_clipped += 1.0;
        ++count_samples;

        // policy objective and its gradient through logp (zero when the
        // clipped branch achieves the min)
        double g = a >= 0.0 ? (1.0 + cfg_.clip) * a : (1.0 - cfg_.clip) * a;
        double surr = ratio * a;
        double dobj_dlogp = 0.0;
        if (surr <= g) {
          batch_pobj += surr;
          dobj_dlogp = ratio * a;
        } else {
          batch_pobj += g;
        }

        // clipped value error
        double v_old = buffer.value_at(idx);
        double ret = buffer.return_at(idx);
        double v_clip = v_old + std::clamp(value - v_old, -cfg_.clip, cfg_.clip);
        double e1 = (value - ret) * (value - ret);
        double e2 = (v_clip - ret) * (v_clip - ret);
        double dval;
        if (e1 >= e2) {
          batch_verr += e1;
          dval = 2.0 * (value - ret);
        } else {
          batch_verr += e2;
          dval = std::abs(value - v_old) < cfg_.clip ? 2.0 * (v_clip - ret) : 0.0;
        }

        double inv_b = 1.0 / batch;
        double pol_coef = -dobj_dlogp * inv_b;  // minimize -objective
        for (int k = 0; k < act_dim; ++k) {
          dmu[k] = pol_coef * dmu_lp[k];
          log_std.g[k] += pol_coef * dls_lp[k];
          log_std.g[k] += -cfg_.entropy_coef * inv_b;  // entropy bonus
        }
        double dvalue = cfg_.value_coef * dval * inv_b;
        policy_.backward(trace, dmu.data(), dvalue);
      }

      double entropy = gaussian_entropy(log_std.v.data(), act_dim);
      double pobj = batch_pobj / batch;
      double verr = batch_verr / batch;
      double loss = total_loss(pobj, verr, entropy, cfg_);
      if (!std::isfinite(loss)) {
        auto params = policy_.parameters();
        for (size_t i = 0; i < params.size(); ++i) params[i]->v = snapshot[i];
        diag.aborted = true;
        return diag;
      }
      sum_pobj += pobj;
      sum_vloss += verr;
      sum_entropy += entropy;
      ++count_batches;

      sum_gnorm += adam_.step(cfg_.lr, cfg_.max_grad_norm);
    }
  }

  diag.mean_ratio = sum_ratio / count_samples;
  diag.clip_fraction = sum_clipped / count_samples;
  diag.approx_kl = sum_kl / count_samples;
  diag.policy_objective = sum_pobj / count_batches;
  diag.value_loss = sum_vloss / count_batches;
  diag.entropy = sum_entropy / count_batches;
  diag.grad_norm = sum_gnorm / count_batches;
  return diag;
}

}  // namespace xtrl
