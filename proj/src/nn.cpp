#include "xtrl/nn.hpp"

#include <algorithm>
#include <cmath>

#include "xtrl/errors.hpp"
#include "xtrl/math.hpp"

namespace xtrl {

DenseLayer::DenseLayer(const std::string& name, int in, int out)
    : w(name + ".w", {out, in}), b(name + ".b", {out}) {}

void DenseLayer::forward(const double* in, double* out) const {
  const int ni = this->in(), no = this->out();
  for (int o = 0; o < no; ++o) {
    const double* row = w.v.data() + static_cast<size_t>(o) * ni;
    double s = b.v[o];
    for (int i = 0; i < ni; ++i) s += row[i] * in[i];
    out[o] = s;
  }
}

void DenseLayer::backward(const double* in, const double* dout, double* din) {
  const int ni = this->in(), no = this->out();
  if (din) std::fill(din, din + ni, 0.0);
  for (int o = 0; o < no; ++o) {
    const double d = dout[o];
    b.g[o] += d;
    double* grow = w.g.data() + static_cast<size_t>(o) * ni;
    const double* row = w.v.data() + static_cast<size_t>(o) * ni;
    for (int i = 0; i < ni; ++i) {
      grow[i] += d * in[i];
      if (din) din[i] += d * row[i];
    }
  }
}

void DenseLayer::init_orthogonal(Rng& rng, double gain) {
  const int rows = out(), cols = in();
  // Gram-Schmidt over the smaller dimension, gain-scaled.
  std::vector<std::vector<double>> basis;
  int nvec = std::min(rows, cols);
  int dim = std::max(rows, cols);
  basis.reserve(nvec);
  for (int k = 0; k < nvec; ++k) {
    std::vector<double> v(dim);
    for (;;) {
      for (auto& x : v) x = rng.normal();
      for (const auto& u : basis) {
        double d = 0.0;
        for (int i = 0; i < dim; ++i) d += v[i] * u[i];
        for (int i = 0; i < dim; ++i) v[i] -= d * u[i];
      }
      double n2 = 0.0;
      for (double x : v) n2 += x * x;
      if (n2 > 1e-12) {
        double inv = 1.0 / std::sqrt(n2);
        for (auto& x : v) x *= inv;
        break;
      }
    }
    basis.push_back(v);
  }
  for (int o = 0; o < rows; ++o)
    for (int i = 0; i < cols; ++i)
      w.v[static_cast<size_t>(o) * cols + i] =
          gain * (rows <= cols ? basis[o][i] : basis[i][o]);
  std::fill(b.v.begin(), b.v.end(), 0.0);
}

Conv2dLayer::Conv2dLayer(const std::string& name, int in_channels, int out_channels)
    : in_c(in_channels), out_c(out_channels), w(name + ".w", {out_channels, in_channels, 3, 3}),
      b(name + ".b", {out_channels}) {}

void Conv2dLayer::forward(const double* in, int h, int w_in, double* out) const {
  const int oh = h - kh + 1, ow = w_in - kw + 1;
  for (int oc = 0; oc < out_c; ++oc) {
    double* oplane = out + static_cast<size_t>(oc) * oh * ow;
    for (int i = 0; i < oh * ow; ++i) oplane[i] = b.v[oc];
    for (int ic = 0; ic < in_c; ++ic) {
      const double* iplane = in + static_cast<size_t>(ic) * h * w_in;
      const double* kern = w.v.data() + ((static_cast<size_t>(oc) * in_c + ic) * kh * kw);
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double s = 0.0;
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx)
              s += kern[ky * kw + kx] * iplane[(oy + ky) * w_in + (ox + kx)];
          oplane[oy * ow + ox] += s;
        }
      }
    }
  }
}

void Conv2dLayer::backward(const double* in, int h, int w_in, const double* dout, double* din) {
  const int oh = h - kh + 1, ow = w_in - kw + 1;
  if (din) std::fill(din, din + static_cast<size_t>(in_c) * h * w_in, 0.0);
  for (int oc = 0; oc < out_c; ++oc) {
    const double* dplane = dout + static_cast<size_t>(oc) * oh * ow;
    for (int i = 0; i < oh * ow; ++i) b.g[oc] += dplane[i];
    for (int ic = 0; ic < in_c; ++ic) {
      const double* iplane = in + static_cast<size_t>(ic) * h * w_in;
      double* dip = din ? din + static_cast<size_t>(ic) * h * w_in : nullptr;
      const size_t kbase = (static_cast<size_t>(oc) * in_c + ic) * kh * kw;
      const double* kern = w.v.data() + kbase;
      double* kgrad = w.g.data() + kbase;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double d = dplane[oy * ow + ox];
          if (d == 0.0) continue;
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              kgrad[ky * kw + kx] += d * iplane[(oy + ky) * w_in + (ox + kx)];
              if (dip) dip[(oy + ky) * w_in + (ox + kx)] += d * kern[ky * kw + kx];
            }
          }
        }
      }
    }
  }
}

void Conv2dLayer::init_uniform_fan_in(Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(in_c) * kh * kw);
  for (auto& x : w.v) x = rng.uniform(-bound, bound);
  std::fill(b.v.begin(), b.v.end(), 0.0);
}

double gaussian_logprob(const double* mu, const double* log_std, const double* action, int n,
                        double* dmu, double* dlog_std) {
  constexpr double kLog2Pi = 1.8378770664093453;
  double lp = 0.0;
  for (int k = 0; k < n; ++k) {
    double sigma = std::exp(log_std[k]);
    double z = (action[k] - mu[k]) / sigma;
    lp += -0.5 * z * z - log_std[k] - 0.5 * kLog2Pi;
    if (dmu) dmu[k] = z / sigma;
    if (dlog_std) dlog_std[k] = z * z - 1.0;
  }
  return lp;
}

double gaussian_entropy(const double* log_std, int n) {
  constexpr double kLog2Pi = 1.8378770664093453;
  double h = 0.0;
  for (int k = 0; k < n; ++k) h += 0.5 + 0.5 * kLog2Pi + log_std[k];
  return h;
}

ActorCritic::ActorCritic(const NetConfig& cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg.map_h < 5 || cfg.map_w < 5)
    throw ConfigError("height map must be at least 5x5 for two valid 3x3 convolutions");
  c1h_ = cfg.map_h - 2;
  c1w_ = cfg.map_w - 2;
  c2h_ = c1h_ - 2;
  c2w_ = c1w_ - 2;
  flat_ = cfg.conv2_filters * c2h_ * c2w_;

  conv1_ = Conv2dLayer("conv1", 1, cfg.conv1_filters);
  conv2_ = Conv2dLayer("conv2", cfg.conv1_filters, cfg.conv2_filters);
  enc_fc_ = DenseLayer("enc_fc", flat_, cfg.encoder_out);
  int concat = cfg.encoder_out + cfg.aux_dim;
  actor1_ = DenseLayer("actor1", concat, cfg.trunk_width);
  actor2_ = DenseLayer("actor2", cfg.trunk_width, cfg.trunk_width);
  actor_out_ = DenseLayer("actor_out", cfg.trunk_width, cfg.action_dim);
  critic1_ = DenseLayer("critic1", concat, cfg.trunk_width);
  critic2_ = DenseLayer("critic2", cfg.trunk_width, cfg.trunk_width);
  critic_out_ = DenseLayer("critic_out", cfg.trunk_width, 1);
  log_std_ = Tensor("log_std", {cfg.action_dim});

  Rng rng(seed);
  conv1_.init_uniform_fan_in(rng);
  conv2_.init_uniform_fan_in(rng);
  enc_fc_.init_orthogonal(rng, 1.0);
  actor1_.init_orthogonal(rng, 1.0);
  actor2_.init_orthogonal(rng, 1.0);
  actor_out_.init_orthogonal(rng, 0.01);  // near-neutral initial actions
  critic1_.init_orthogonal(rng, 1.0);
  critic2_.init_orthogonal(rng, 1.0);
  critic_out_.init_orthogonal(rng, 1.0);
  std::fill(log_std_.v.begin(), log_std_.v.end(), cfg.init_log_std);
}

void ActorCritic::forward(const double* obs, double* mu, double* value, Trace* trace) const {
  const int map_n = cfg_.map_h * cfg_.map_w;
  const int concat_n = cfg_.encoder_out + cfg_.aux_dim;

  Trace local;
  Trace& t = trace ? *trace : local;
  t.map_in.assign(obs, obs + map_n);
  t.c1.resize(static_cast<size_t>(cfg_.conv1_filters) * c1h_ * c1w_);
  t.c2.resize(static_cast<size_t>(cfg_.conv2_filters) * c2h_ * c2w_);
  t.enc.resize(cfg_.encoder_out);
  t.concat.resize(concat_n);
  t.a1.resize(cfg_.trunk_width);
  t.a2.resize(cfg_.trunk_width);
  t.mu_pre.resize(cfg_.action_dim);
  t.mu.resize(cfg_.action_dim);
  t.v1.resize(cfg_.trunk_width);
  t.v2.resize(cfg_.trunk_width);

  conv1_.forward(t.map_in.data(), cfg_.map_h, cfg_.map_w, t.c1.data());
  tanh_forward(t.c1.data(), t.c1.data(), static_cast<int>(t.c1.size()));
  conv2_.forward(t.c1.data(), c1h_, c1w_, t.c2.data());
  tanh_forward(t.c2.data(), t.c2.data(), static_cast<int>(t.c2.size()));
  enc_fc_.forward(t.c2.data(), t.enc.data());
  tanh_forward(t.enc.data(), t.enc.data(), cfg_.encoder_out);

  std::copy(t.enc.begin(), t.enc.end(), t.concat.begin());
  std::copy(obs + map_n, obs + map_n + cfg_.aux_dim, t.concat.begin() + cfg_.encoder_out);

  actor1_.forward(t.concat.data(), t.a1.data());
  tanh_forward(t.a1.data(), t.a1.data(), cfg_.trunk_width);
  actor2_.forward(t.a1.data(), t.a2.data());
  tanh_forward(t.a2.data(), t.a2.data(), cfg_.trunk_width);
  actor_out_.forward(t.a2.data(), t.mu_pre.data());
  tanh_forward(t.mu_pre.data(), t.mu.data(), cfg_.action_dim);

  critic1_.forward(t.concat.data(), t.v1.data());
  tanh_forward(t.v1.data(), t.v1.data(), cfg_.trunk_width);
  critic2_.forward(t.v1.data(), t.v2.data());
  tanh_forward(t.v2.data(), t.v2.data(), cfg_.trunk_width);
  double v;
  critic_out_.forward(t.v2.data(), &v);
  t.value = v;
  t.valid = true;

  if (mu) std::copy(t.mu.begin(), t.mu.end(), mu);
  if (value) *value = v;
}

void ActorCritic::policy_mean(const double* obs, double* mu) const { forward(obs, mu, nullptr); }

double ActorCritic::state_value(const double* obs) const {
  double v;
  forward(obs, nullptr, &v);
  return v;
}

void ActorCritic::backward(const Trace& t, const double* dmu, double dvalue) {
  if (!t.valid) throw ProtocolError("backward() without a recorded forward trace");
  const int concat_n = cfg_.encoder_out + cfg_.aux_dim;

  std::vector<double> dconcat(concat_n, 0.0);
  std::vector<double> buf1(cfg_.trunk_width), buf2(cfg_.trunk_width);

  if (dmu) {
    std::vector<double> dmu_pre(cfg_.action_dim);
    tanh_backward(t.mu.data(), dmu, dmu_pre.data(), cfg_.action_dim);
    std::vector<double> da2(cfg_.trunk_width);
    actor_out_.backward(t.a2.data(), dmu_pre.data(), da2.data());
    tanh_backward(t.a2.data(), da2.data(), buf2.data(), cfg_.trunk_width);
    std::vector<double> da1(cfg_.trunk_width);
    actor2_.backward(t.a1.data(), buf2.data(), da1.data());
    tanh_backward(t.a1.data(), da1.data(), buf1.data(), cfg_.trunk_width);
    std::vector<double> dc(concat_n);
    actor1_.backward(t.concat.data(), buf1.data(), dc.data());
    for (int i = 0; i < concat_n; ++i) dconcat[i] += dc[i];
  }

  if (dvalue != 0.0) {
    std::vector<double> dv2(cfg_.trunk_width);
    critic_out_.backward(t.v2.data(), &dvalue, dv2.data());
    tanh_backward(t.v2.data(), dv2.data(), buf2.data(), cfg_.trunk_width);
    std::vector<double> dv1(cfg_.trunk_width);
    critic2_.backward(t.v1.data(), buf2.data(), dv1.data());
    tanh_backward(t.v1.data(), dv1.data(), buf1.data(), cfg_.trunk_width);
    std::vector<double> dc(concat_n);
    critic1_.backward(t.concat.data(), buf1.data(), dc.data());
    for (int i = 0; i < concat_n; ++i) dconcat[i] += dc[i];
  }

  // shared encoder picks up contributions from both heads
  std::vector<double> denc_post(dconcat.begin(), dconcat.begin() + cfg_.encoder_out);
  std::vector<double> denc(cfg_.encoder_out);
  tanh_backward(t.enc.data(), denc_post.data(), denc.data(), cfg_.encoder_out);
  std::vector<double> dflat(flat_);
  enc_fc_.backward(t.c2.data(), denc.data(), dflat.data());
  std::vector<double> dc2(t.c2.size());
  tanh_backward(t.c2.data(), dflat.data(), dc2.data(), static_cast<int>(t.c2.size()));
  std::vector<double> dc1(t.c1.size());
  conv2_.backward(t.c1.data(), c1h_, c1w_, dc2.data(), dc1.data());
  std::vector<double> dc1_pre(t.c1.size());
  tanh_backward(t.c1.data(), dc1.data(), dc1_pre.data(), static_cast<int>(t.c1.size()));
  conv1_.backward(t.map_in.data(), cfg_.map_h, cfg_.map_w, dc1_pre.data(), nullptr);
}

std::vector<Tensor*> ActorCritic::parameters() {
  return {&conv1_.w,  &conv1_.b,  &conv2_.w,  &conv2_.b,  &enc_fc_.w,     &enc_fc_.b,
          &actor1_.w, &actor1_.b, &actor2_.w, &actor2_.b, &actor_out_.w,  &actor_out_.b,
          &log_std_,  &critic1_.w, &critic1_.b, &critic2_.w, &critic2_.b, &critic_out_.w,
          &critic_out_.b};
}

std::vector<const Tensor*> ActorCritic::parameters() const {
  auto mut = const_cast<ActorCritic*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

size_t ActorCritic::parameter_count() const {
  size_t n = 0;
  for (const Tensor* t : parameters()) n += t->size();
  return n;
}

void ActorCritic::zero_grad() {
  for (Tensor* t : parameters()) t->zero_grad();
}

void ActorCritic::copy_parameters_from(const ActorCritic& other) {
  auto dst = parameters();
  auto src = other.parameters();
  if (dst.size() != src.size()) throw ProtocolError("parameter shape mismatch");
  for (size_t i = 0; i < dst.size(); ++i) {
    if (dst[i]->size() != src[i]->size()) throw ProtocolError("parameter shape mismatch");
    dst[i]->v = src[i]->v;
  }
}

Adam::Adam(std::vector<Tensor*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Tensor* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

double Adam::step(double lr, double max_grad_norm) {
  double norm2 = 0.0;
  for (Tensor* p : params_)
    for (double g : p->g) norm2 += g * g;
  double norm = std::sqrt(norm2);
  double scale = 1.0;
  if (max_grad_norm > 0.0 && norm > max_grad_norm) scale = max_grad_norm / norm;

  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor* p = params_[i];
    for (size_t k = 0; k < p->size(); ++k) {
      double g = p->g[k] * scale;
      m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g;
      v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g * g;
      double mhat = m_[i][k] / bc1;
      double vhat = v_[i][k] / bc2;
      p->v[k] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
  return norm;
}

void Adam::reset() {
  for (auto& m : m_) std::fill(m.begin(), m.end(), 0.0);
  for (auto& v : v_) std::fill(v.begin(), v.end(), 0.0);
  t_ = 0;
}

}  // namespace xtrl
