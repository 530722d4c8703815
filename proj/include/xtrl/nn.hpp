#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xtrl/rng.hpp"

namespace xtrl {

// Dense value + gradient buffer. 64-bit throughout: training at desk scale is
// CPU bound on small networks and the tests rely on 1e-10 class tolerances.
struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> v;
  std::vector<double> g;

  Tensor() = default;
  Tensor(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
    size_t total = 1;
    for (int d : shape) total *= static_cast<size_t>(d);
    v.assign(total, 0.0);
    g.assign(total, 0.0);
  }
  size_t size() const { return v.size(); }
  void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

struct DenseLayer {
  Tensor w;  // out x in
  Tensor b;  // out

  DenseLayer() = default;
  DenseLayer(const std::string& name, int in, int out);
  int in() const { return w.shape[1]; }
  int out() const { return w.shape[0]; }

  void forward(const double* in, double* out) const;
  // Accumulates parameter gradients; din (size in) may be null.
  void backward(const double* in, const double* dout, double* din);

  void init_orthogonal(Rng& rng, double gain);
};

struct Conv2dLayer {
  int in_c = 1, out_c = 1, kh = 3, kw = 3;
  Tensor w;  // out_c x in_c x kh x kw
  Tensor b;  // out_c

  Conv2dLayer() = default;
  Conv2dLayer(const std::string& name, int in_channels, int out_channels);

  // Valid convolution, stride 1: (in_c, h, w) -> (out_c, h-2, w-2).
  void forward(const double* in, int h, int w_in, double* out) const;
  void backward(const double* in, int h, int w_in, const double* dout, double* din);

  void init_uniform_fan_in(Rng& rng);
};

inline void tanh_forward(const double* in, double* out, int n) {
  for (int i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
}
// Uses the activation output y, so layers only need to cache post-activations.
inline void tanh_backward(const double* y, const double* dy, double* dx, int n) {
  for (int i = 0; i < n; ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
}

// log N(a | mu, diag(sigma^2)); optional gradients w.r.t. mu and log sigma.
double gaussian_logprob(const double* mu, const double* log_std, const double* action, int n,
                        double* dmu = nullptr, double* dlog_std = nullptr);

// Entropy of the diagonal Gaussian: sum_k (1/2 + 1/2 log 2pi + log sigma_k).
double gaussian_entropy(const double* log_std, int n);

struct NetConfig {
  int map_h = 30, map_w = 20;  // height map shape fed to the conv encoder
  int aux_dim = 34;            // remaining observation components
  int action_dim = 14;
  int conv1_filters = 16;
  int conv2_filters = 32;
  int encoder_out = 64;
  int trunk_width = 128;
  double init_log_std = 0.0;

  int obs_dim() const { return map_h * map_w + aux_dim; }
};

// Shared CNN height encoder, separate actor/critic trunks, tanh-squashed mean
// head and a state-independent log-std vector. forward() is const and
// reentrant: rollout workers may share one frozen instance.
class ActorCritic {
 public:
  ActorCritic(const NetConfig& cfg, uint64_t seed);

  const NetConfig& net_config() const { return cfg_; }
  int obs_dim() const { return cfg_.obs_dim(); }
  int action_dim() const { return cfg_.action_dim; }

  // Activation cache for one forward pass; required by backward().
  struct Trace {
    bool valid = false;
    std::vector<double> map_in;
    std::vector<double> c1, c2, enc;      // post-tanh activations
    std::vector<double> concat;           // encoder output + aux inputs
    std::vector<double> a1, a2, mu_pre, mu;
    std::vector<double> v1, v2;
    double value = 0.0;
  };

  // mu: action_dim, tanh squashed into (-1, 1). value scalar.
  void forward(const double* obs, double* mu, double* value, Trace* trace = nullptr) const;
  void policy_mean(const double* obs, double* mu) const;
  double state_value(const double* obs) const;

  const std::vector<double>& log_std() const { return log_std_.v; }
  std::vector<double>& log_std_values() { return log_std_.v; }
  Tensor& log_std_tensor() { return log_std_; }

  // Reverse pass for one sample. dmu is dLoss/dmu (post squash), dvalue is
  // dLoss/dvalue. Accumulates into the parameter gradient buffers. Throws
  // ProtocolError when the trace was not produced by forward().
  void backward(const Trace& trace, const double* dmu, double dvalue);

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  size_t parameter_count() const;
  void zero_grad();

  // Deep copy of all parameter values from another instance of identical shape.
  void copy_parameters_from(const ActorCritic& other);

 private:
  NetConfig cfg_;
  int c1h_, c1w_, c2h_, c2w_, flat_;
  Conv2dLayer conv1_, conv2_;
  DenseLayer enc_fc_;
  DenseLayer actor1_, actor2_, actor_out_;
  DenseLayer critic1_, critic2_, critic_out_;
  Tensor log_std_;
};

// Adaptive-moment SGD over a parameter list, with optional global norm cap.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  // Applies one step from the accumulated gradients. Returns the global
  // gradient norm before capping.
  double step(double lr, double max_grad_norm = 0.0);
  void reset();

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace xtrl
