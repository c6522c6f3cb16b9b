#pragma once
// Latent DDIM over the flattened joint vector [s ; d^1 ; ... ; d^V], trained
// with ε-prediction and sampled deterministically (η = 0).

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "seqdiff/encoder/encoder.hpp"
#include "seqdiff/nn.hpp"

namespace seqdiff::prior {

using ag::Var;

struct LatentPriorConfig {
  std::size_t steps = 1000;  // T
  double beta_start = 1e-4;
  double beta_end = 2e-2;
  std::size_t mlp_layers = 4;
  std::size_t mlp_hidden = 256;
  std::size_t joint_dim = 0;
  std::size_t time_embed_dim = 64;

  void validate() const {
    if (steps < 1) throw ConfigError("latent prior: T must be at least 1");
    if (joint_dim == 0) throw ConfigError("latent prior: joint_dim must be positive");
    if (!(beta_start > 0 && beta_end < 1 && beta_start <= beta_end)) throw ConfigError("latent prior: bad beta range");
    if (mlp_layers == 0 || mlp_hidden == 0) throw ConfigError("latent prior: MLP must be non-empty");
  }
};

/// Linear β schedule and its cumulative products; index t runs 1..T and
/// alpha_bar(0) = 1.
class BetaSchedule {
 public:
  BetaSchedule(std::size_t steps, double beta_start, double beta_end) : abar_(steps + 1, 1.0) {
    for (std::size_t t = 1; t <= steps; ++t) {
      const double beta =
          steps == 1 ? beta_start
                     : beta_start + (beta_end - beta_start) * static_cast<double>(t - 1) / static_cast<double>(steps - 1);
      abar_[t] = abar_[t - 1] * (1.0 - beta);
    }
  }
  explicit BetaSchedule(const LatentPriorConfig& c) : BetaSchedule(c.steps, c.beta_start, c.beta_end) {}

  std::size_t steps() const { return abar_.size() - 1; }
  double alpha_bar(std::size_t t) const {
    if (t > steps()) throw DomainError("alpha_bar: step out of range");
    return abar_[t];
  }

 private:
  std::vector<double> abar_;
};

/// [s ; d^1 ; ... ; d^V] per sequence.
template <class T>
Tensor<T> flatten_latents(const encoder::FactorValues<T>& z) {
  const std::size_t b = z.stat.rows(), h = z.stat.cols(), k = z.dyn.cols(), v = z.frames;
  require(z.dyn.rows() == b * v, "flatten_latents: dynamic rows must equal B * V");
  Tensor<T> out(b, h + v * k);
  for (std::size_t i = 0; i < b; ++i) {
    std::copy(z.stat.row(i), z.stat.row(i) + h, out.row(i));
    for (std::size_t t = 0; t < v; ++t) std::copy(z.dyn.row(i * v + t), z.dyn.row(i * v + t) + k, out.row(i) + h + t * k);
  }
  return out;
}

template <class T>
encoder::FactorValues<T> unflatten_latents(const Tensor<T>& flat, std::size_t h, std::size_t k, std::size_t v) {
  require(flat.cols() == h + v * k, "unflatten_latents: width must equal h + V*k");
  encoder::FactorValues<T> z;
  z.frames = v;
  z.stat = Tensor<T>(flat.rows(), h);
  z.dyn = Tensor<T>(flat.rows() * v, k);
  for (std::size_t i = 0; i < flat.rows(); ++i) {
    std::copy(flat.row(i), flat.row(i) + h, z.stat.row(i));
    for (std::size_t t = 0; t < v; ++t) std::copy(flat.row(i) + h + t * k, flat.row(i) + h + (t + 1) * k, z.dyn.row(i * v + t));
  }
  return z;
}

/// Per-dimension z-score over a pool; near-constant dimensions keep scale 1.
template <class T>
struct Standardizer {
  std::vector<double> mean, scale;

  static Standardizer fit(const Tensor<T>& pool) {
    require(pool.rows() > 0, "standardizer: empty pool");
    Standardizer s;
    const std::size_t n = pool.rows(), d = pool.cols();
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += pool(r, j);
    }
    for (auto& m : s.mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < d; ++j) s.scale[j] += (pool(r, j) - s.mean[j]) * (pool(r, j) - s.mean[j]);
    }
    for (auto& v : s.scale) {
      v = std::sqrt(v / static_cast<double>(n));
      if (v < 1e-8) v = 1.0;
    }
    return s;
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> y(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t j = 0; j < x.cols(); ++j) y(r, j) = static_cast<T>((x(r, j) - mean[j]) / scale[j]);
    }
    return y;
  }
  Tensor<T> inverse(const Tensor<T>& y) const {
    Tensor<T> x(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      for (std::size_t j = 0; j < y.cols(); ++j) x(r, j) = static_cast<T>(y(r, j) * scale[j] + mean[j]);
    }
    return x;
  }
};

/// ε_φ(z_t, t): residual MLP; every block is modulated by a per-step scale
/// and shift computed from the time embedding.
template <class T>
class EpsilonNet {
 public:
  EpsilonNet() = default;
  EpsilonNet(nn::ParamSet<T>& ps, const std::string& name, const LatentPriorConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    const std::size_t w = cfg.mlp_hidden;
    temb1_ = nn::Linear<T>(ps, name + ".temb1", cfg.time_embed_dim, w, rng);
    temb2_ = nn::Linear<T>(ps, name + ".temb2", w, w, rng);
    in_ = nn::Linear<T>(ps, name + ".in", cfg.joint_dim, w, rng);
    for (std::size_t l = 0; l < cfg.mlp_layers; ++l) {
      const std::string bn = name + ".block" + std::to_string(l);
      blocks_.push_back(Block{nn::Linear<T>(ps, bn + ".t", w, 2 * w, rng, true, 0.5), nn::Linear<T>(ps, bn + ".fc1", w, w, rng),
                              nn::Linear<T>(ps, bn + ".fc2", w, w, rng, true, 0.5)});
    }
    out_ = nn::Linear<T>(ps, name + ".out", w, cfg.joint_dim, rng, true, 0.5);
  }

  const LatentPriorConfig& config() const { return cfg_; }

  Var<T> operator()(const Var<T>& z, const std::vector<std::size_t>& t) const {
    require(z.cols() == cfg_.joint_dim && t.size() == z.rows(), "epsilon net: shape mismatch");
    std::vector<T> tv(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) tv[i] = static_cast<T>(static_cast<double>(t[i]) / cfg_.steps);
    auto e = Var<T>::constant(nn::sinusoidal_embedding<T>(tv, cfg_.time_embed_dim, 1000.0));
    auto temb = ag::silu(temb2_(ag::silu(temb1_(e))));
    auto h = in_(z);
    const std::size_t w = cfg_.mlp_hidden;
    for (const auto& b : blocks_) {
      auto mod = b.t(temb);
      auto u = b.fc1(ag::silu(h));
      u = ag::add(ag::mul(u, ag::add_scalar(ag::slice_cols(mod, 0, w), T(1))), ag::slice_cols(mod, w, w));
      h = ag::add(h, b.fc2(ag::silu(u)));
    }
    return out_(ag::silu(h));
  }

 private:
  struct Block {
    nn::Linear<T> t, fc1, fc2;
  };
  LatentPriorConfig cfg_;
  nn::Linear<T> temb1_, temb2_, in_, out_;
  std::vector<Block> blocks_;
};

/// z_t = √ᾱ_t z_0 + √(1 − ᾱ_t) ε, row-wise t.
template <class T>
Tensor<T> forward_noise(const Tensor<T>& z0, const std::vector<std::size_t>& t, const Tensor<T>& eps,
                        const BetaSchedule& sched) {
  require(z0.same_shape(eps) && t.size() == z0.rows(), "forward_noise: shape mismatch");
  Tensor<T> zt(z0.rows(), z0.cols());
  for (std::size_t r = 0; r < z0.rows(); ++r) {
    if (t[r] < 1 || t[r] > sched.steps()) throw DomainError("latent step out of range");
    const double a = sched.alpha_bar(t[r]);
    const T sa = static_cast<T>(std::sqrt(a)), sb = static_cast<T>(std::sqrt(1.0 - a));
    for (std::size_t j = 0; j < z0.cols(); ++j) zt(r, j) = sa * z0(r, j) + sb * eps(r, j);
  }
  return zt;
}

/// Squared-error ε-prediction objective, averaged over elements. `net` is
/// any callable (Var z_t, steps) -> Var ε̂.
template <class T, class Net>
Var<T> latent_ddim_loss(const Tensor<T>& z0, const std::vector<std::size_t>& t, const Tensor<T>& eps, const Net& net,
                        const BetaSchedule& sched) {
  const Tensor<T> zt = forward_noise(z0, t, eps, sched);
  return ag::mse(net(Var<T>::constant(zt), t), Var<T>::constant(eps));
}

/// Uniform DDIM sub-sequence 1 = τ_1 < ... < τ_S = T.
inline std::vector<std::size_t> ddim_timesteps(std::size_t total, std::size_t steps) {
  if (steps == 0 || steps > total) throw DomainError("ddim: step count must be in [1, T]");
  if (steps == 1) return {total};
  std::vector<std::size_t> ts(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    ts[k] = 1 + static_cast<std::size_t>(
                    std::llround(static_cast<double>(k) * static_cast<double>(total - 1) / static_cast<double>(steps - 1)));
  }
  return ts;
}

/// Deterministic DDIM update from level t to level t_prev given a noise estimate.
template <class T>
void ddim_update(Tensor<T>& z, const Tensor<T>& eps_hat, double abar_t, double abar_prev) {
  const double sa = std::sqrt(abar_t), sb = std::sqrt(1.0 - abar_t);
  const double pa = std::sqrt(abar_prev), pb = std::sqrt(1.0 - abar_prev);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double x0 = (static_cast<double>(z[i]) - sb * eps_hat[i]) / sa;
    z[i] = static_cast<T>(pa * x0 + pb * eps_hat[i]);
  }
}

/// Reverse DDIM from N(0, I) in standardized space.
template <class T>
Tensor<T> ddim_sample(const EpsilonNet<T>& net, const BetaSchedule& sched, std::size_t n, std::size_t steps, Rng& rng) {
  ag::NoGradGuard guard;
  const std::size_t d = net.config().joint_dim;
  Tensor<T> z(n, d);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = static_cast<T>(rng.normal());
  const auto ts = ddim_timesteps(sched.steps(), steps);
  for (std::size_t k = ts.size(); k-- > 0;) {
    const std::size_t t = ts[k];
    const std::size_t t_prev = k == 0 ? 0 : ts[k - 1];
    const auto eps_hat = net(Var<T>::constant(z), std::vector<std::size_t>(n, t)).value();
    ddim_update(z, eps_hat, sched.alpha_bar(t), sched.alpha_bar(t_prev));
  }
  return z;
}

struct PriorTrainConfig {
  std::size_t iterations = 4000;
  std::size_t batch = 128;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  /// Cosine decay of lr to this fraction over `iterations`.
  double final_lr_fraction = 0.05;
};

/// A trained prior over one block of coordinates, with its standardizer.
template <class T>
struct DdimPrior {
  nn::ParamSet<T> params;
  EpsilonNet<T> net;
  Standardizer<T> standardizer;
  LatentPriorConfig config;

  DdimPrior() = default;
  DdimPrior(const DdimPrior&) = delete;
  DdimPrior& operator=(const DdimPrior&) = delete;

  void init(const LatentPriorConfig& cfg, const std::string& name, Rng& rng) {
    config = cfg;
    net = EpsilonNet<T>(params, name, cfg, rng);
  }

  /// Fits the standardizer on `pool` and runs minibatch AdamW. `on_loss`
  /// receives (iteration, loss) when set.
  void train(const Tensor<T>& pool, const PriorTrainConfig& tc, Rng& rng,
             const std::function<void(std::size_t, double)>& on_loss = {}) {
    require(pool.cols() == config.joint_dim, "prior train: pool width mismatch");
    standardizer = Standardizer<T>::fit(pool);
    const Tensor<T> data = standardizer.forward(pool);
    const BetaSchedule sched(config);
    nn::AdamW<T> opt(params, nn::AdamWConfig{tc.lr, 0.9, 0.999, 1e-8, tc.weight_decay});
    const std::size_t b = std::min(tc.batch, data.rows());
    for (std::size_t it = 0; it < tc.iterations; ++it) {
      const double progress = static_cast<double>(it) / static_cast<double>(tc.iterations);
      const double f = tc.final_lr_fraction;
      opt.set_lr(tc.lr * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress))));
      Tensor<T> z0(b, data.cols()), eps(b, data.cols());
      std::vector<std::size_t> t(b);
      for (std::size_t r = 0; r < b; ++r) {
        const std::size_t src = rng.index(data.rows());
        std::copy(data.row(src), data.row(src) + data.cols(), z0.row(r));
        t[r] = 1 + rng.index(sched.steps());
        for (std::size_t j = 0; j < data.cols(); ++j) eps(r, j) = static_cast<T>(rng.normal());
      }
      params.zero_grad();
      auto loss = latent_ddim_loss(z0, t, eps, net, sched);
      const double lv = static_cast<double>(loss.value()[0]);
      if (!std::isfinite(lv)) throw DomainError("latent prior: non-finite loss");
      ag::backward(loss);
      opt.step();
      if (on_loss) on_loss(it, lv);
    }
  }

  Tensor<T> sample(std::size_t n, std::size_t steps, Rng& rng) const {
    return standardizer.inverse(ddim_sample(net, BetaSchedule(config), n, steps, rng));
  }
};

/// Two priors over disjoint coordinate blocks [0, split) and [split, D),
/// sampled independently and concatenated.
template <class T>
struct IndependentPrior {
  DdimPrior<T> stat, dyn;
  std::size_t split = 0;

  void init(const LatentPriorConfig& cfg, std::size_t static_dim, Rng& rng) {
    require(static_dim > 0 && static_dim < cfg.joint_dim, "independent prior: bad split");
    split = static_dim;
    auto cs = cfg, cd = cfg;
    cs.joint_dim = static_dim;
    cd.joint_dim = cfg.joint_dim - static_dim;
    stat.init(cs, "prior_s", rng);
    dyn.init(cd, "prior_d", rng);
  }

  void train(const Tensor<T>& pool, const PriorTrainConfig& tc, Rng& rng) {
    Tensor<T> a(pool.rows(), split), b(pool.rows(), pool.cols() - split);
    for (std::size_t r = 0; r < pool.rows(); ++r) {
      std::copy(pool.row(r), pool.row(r) + split, a.row(r));
      std::copy(pool.row(r) + split, pool.row(r) + pool.cols(), b.row(r));
    }
    stat.train(a, tc, rng);
    dyn.train(b, tc, rng);
  }

  Tensor<T> sample(std::size_t n, std::size_t steps, Rng& rng) const {
    const auto a = stat.sample(n, steps, rng);
    const auto b = dyn.sample(n, steps, rng);
    Tensor<T> out(n, a.cols() + b.cols());
    for (std::size_t r = 0; r < n; ++r) {
      std::copy(a.row(r), a.row(r) + a.cols(), out.row(r));
      std::copy(b.row(r), b.row(r) + b.cols(), out.row(r) + a.cols());
    }
    return out;
  }
};

}  // namespace seqdiff::prior
