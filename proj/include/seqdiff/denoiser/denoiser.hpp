#pragma once
// Conditional denoiser D(x_t; σ, z) = c_skip x_t + c_out F(c_in x_t, z, c_noise),
// with F conditioned on z = [s ; d^τ] through adaptive group normalization.

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "seqdiff/diffusion/core.hpp"
#include "seqdiff/frame.hpp"
#include "seqdiff/nn.hpp"

namespace seqdiff::denoiser {

using ag::Var;

/// AdaGN(h) = z_scale ⊙ (t_scale ⊙ GroupNorm(h) + t_bias), per channel and
/// broadcast over each channel's spatial extent.
template <class T>
Var<T> adagn(const Var<T>& features, std::size_t channels, std::size_t groups, const Var<T>& z_scale,
             const Var<T>& t_scale, const Var<T>& t_bias) {
  if (channels % groups != 0) throw ConfigError("adagn: channel count not divisible by group count");
  auto normed = ag::group_norm(features, groups, channels);
  auto modulated = ag::channel_affine(normed, t_scale, &t_bias);
  return ag::channel_affine<T>(modulated, z_scale, nullptr);
}

/// Learned producer of the AdaGN modulation vectors. Scales are offset by one
/// so a freshly initialized block starts near plain group normalization.
template <class T>
struct AdaGnBlock {
  nn::Linear<T> z_map, t_map;
  std::size_t channels = 0, groups = 0;

  AdaGnBlock() = default;
  AdaGnBlock(nn::ParamSet<T>& ps, const std::string& name, std::size_t ch, std::size_t grp, std::size_t cond_dim,
             std::size_t temb_dim, Rng& rng)
      : channels(ch), groups(grp) {
    if (ch % grp != 0) throw ConfigError("adagn: channel count not divisible by group count");
    z_map = nn::Linear<T>(ps, name + ".z", cond_dim, ch, rng, true, 0.1);
    t_map = nn::Linear<T>(ps, name + ".t", temb_dim, 2 * ch, rng, true, 0.1);
  }

  Var<T> operator()(const Var<T>& h, const Var<T>& temb, const Var<T>& cond) const {
    auto ts = t_map(temb);
    auto t_scale = ag::add_scalar(ag::slice_cols(ts, 0, channels), T(1));
    auto t_bias = ag::slice_cols(ts, channels, channels);
    auto z_scale = ag::add_scalar(z_map(cond), T(1));
    return adagn(h, channels, groups, z_scale, t_scale, t_bias);
  }
};

enum class Backbone { mlp, unet };

inline std::string to_string(Backbone b) { return b == Backbone::mlp ? "mlp" : "unet"; }

struct DenoiserNetConfig {
  FrameShape frame;
  std::size_t cond_dim = 0;       // h + k
  Backbone backbone = Backbone::mlp;
  std::size_t width = 256;        // MLP hidden width
  std::size_t blocks = 3;         // MLP residual blocks
  std::size_t base_channels = 16; // U-Net channels at full resolution
  std::size_t groups = 8;
  std::size_t embed_dim = 32;     // sinusoidal features of c_noise
  std::size_t temb_dim = 64;
};

/// Raw network F(c_in x_t, z, c_noise). Frame-local: row r of the output
/// reads only row r of the input and conditioning.
template <class T>
class DenoiserNet {
 public:
  DenoiserNet() = default;
  DenoiserNet(nn::ParamSet<T>& ps, const std::string& name, DenoiserNetConfig cfg, Rng& rng) : cfg_(cfg) {
    const std::size_t e = cfg.embed_dim, te = cfg.temb_dim;
    temb1_ = nn::Linear<T>(ps, name + ".temb1", e, te, rng);
    temb2_ = nn::Linear<T>(ps, name + ".temb2", te, te, rng);
    if (cfg.backbone == Backbone::mlp) {
      build_mlp(ps, name, rng);
    } else {
      if (!cfg.frame.is_image()) throw ConfigError("unet backbone requires image frames");
      if (cfg.frame.height % 4 != 0 || cfg.frame.width % 4 != 0) throw ConfigError("unet needs H, W divisible by 4");
      build_unet(ps, name, rng);
    }
  }

  const DenoiserNetConfig& config() const { return cfg_; }

  Var<T> time_embedding(const std::vector<T>& c_noise) const {
    auto e = Var<T>::constant(nn::sinusoidal_embedding<T>(c_noise, cfg_.embed_dim, 8.0));
    return temb2_(ag::silu(temb1_(e)));
  }

  Var<T> operator()(const Var<T>& input, const std::vector<T>& c_noise, const Var<T>& cond) const {
    require(input.cols() == cfg_.frame.dim(), "denoiser: frame width mismatch");
    require(cond.rows() == input.rows() && cond.cols() == cfg_.cond_dim, "denoiser: conditioning shape mismatch");
    require(c_noise.size() == input.rows(), "denoiser: one noise level per row");
    auto temb = ag::silu(time_embedding(c_noise));
    return cfg_.backbone == Backbone::mlp ? forward_mlp(input, temb, cond) : forward_unet(input, temb, cond);
  }

 private:
  struct MlpBlock {
    AdaGnBlock<T> norm;
    nn::Linear<T> fc1, fc2;
  };

  struct ResBlock {
    std::size_t in_ch = 0, out_ch = 0, h = 0, w = 0;
    nn::Conv2d<T> conv1, conv2, skip;
    AdaGnBlock<T> norm;
    bool has_skip = false;
  };

  void build_mlp(nn::ParamSet<T>& ps, const std::string& name, Rng& rng) {
    const std::size_t d = cfg_.frame.dim(), w = cfg_.width;
    fc_in_ = nn::Linear<T>(ps, name + ".in", d, w, rng);
    for (std::size_t b = 0; b < cfg_.blocks; ++b) {
      const std::string bn = name + ".block" + std::to_string(b);
      mlp_blocks_.push_back(MlpBlock{AdaGnBlock<T>(ps, bn + ".adagn", w, cfg_.groups, cfg_.cond_dim, cfg_.temb_dim, rng),
                                     nn::Linear<T>(ps, bn + ".fc1", w, w, rng),
                                     nn::Linear<T>(ps, bn + ".fc2", w, w, rng, true, 0.5)});
    }
    fc_out_ = nn::Linear<T>(ps, name + ".out", w, d, rng, true, 0.5);
  }

  Var<T> forward_mlp(const Var<T>& x, const Var<T>& temb, const Var<T>& cond) const {
    auto h = fc_in_(x);
    for (const auto& b : mlp_blocks_) {
      auto u = ag::silu(b.norm(h, temb, cond));
      u = b.fc2(ag::silu(b.fc1(u)));
      h = ag::add(h, u);
    }
    return fc_out_(ag::silu(ag::group_norm(h, cfg_.groups, cfg_.width)));
  }

  ResBlock make_res(nn::ParamSet<T>& ps, const std::string& name, std::size_t in_ch, std::size_t out_ch, std::size_t h,
                    std::size_t w, Rng& rng) {
    ResBlock r;
    r.in_ch = in_ch;
    r.out_ch = out_ch;
    r.h = h;
    r.w = w;
    r.conv1 = nn::Conv2d<T>(ps, name + ".conv1", ag::ConvGeometry{in_ch, h, w, out_ch, 3, 1, 1}, rng);
    r.norm = AdaGnBlock<T>(ps, name + ".adagn", out_ch, cfg_.groups, cfg_.cond_dim, cfg_.temb_dim, rng);
    r.conv2 = nn::Conv2d<T>(ps, name + ".conv2", ag::ConvGeometry{out_ch, h, w, out_ch, 3, 1, 1}, rng, 0.5);
    if (in_ch != out_ch) {
      r.has_skip = true;
      r.skip = nn::Conv2d<T>(ps, name + ".skip", ag::ConvGeometry{in_ch, h, w, out_ch, 1, 1, 0}, rng);
    }
    return r;
  }

  Var<T> run_res(const ResBlock& r, const Var<T>& x, const Var<T>& temb, const Var<T>& cond) const {
    const std::size_t gin = std::min(cfg_.groups, r.in_ch);
    auto h = r.conv1(ag::silu(ag::group_norm(x, gin, r.in_ch)));
    h = r.conv2(ag::silu(r.norm(h, temb, cond)));
    return ag::add(r.has_skip ? r.skip(x) : x, h);
  }

  void build_unet(nn::ParamSet<T>& ps, const std::string& name, Rng& rng) {
    const auto& f = cfg_.frame;
    const std::size_t c0 = cfg_.base_channels, c1 = 2 * cfg_.base_channels;
    const std::size_t h0 = f.height, w0 = f.width, h1 = h0 / 2, w1 = w0 / 2, h2 = h1 / 2, w2 = w1 / 2;
    coords_ = Tensor<T>(1, 2 * h0 * w0);
    for (std::size_t i = 0; i < h0; ++i) {
      for (std::size_t j = 0; j < w0; ++j) {
        coords_(0, i * w0 + j) = static_cast<T>(2.0 * j / (w0 - 1) - 1.0);
        coords_(0, h0 * w0 + i * w0 + j) = static_cast<T>(2.0 * i / (h0 - 1) - 1.0);
      }
    }
    conv_in_ = nn::Conv2d<T>(ps, name + ".conv_in", ag::ConvGeometry{f.channels + 2, h0, w0, c0, 3, 1, 1}, rng);
    res_.push_back(make_res(ps, name + ".down0", c0, c0, h0, w0, rng));
    down_.push_back(nn::Conv2d<T>(ps, name + ".ds0", ag::ConvGeometry{c0, h0, w0, c0, 3, 2, 1}, rng));
    res_.push_back(make_res(ps, name + ".down1", c0, c1, h1, w1, rng));
    down_.push_back(nn::Conv2d<T>(ps, name + ".ds1", ag::ConvGeometry{c1, h1, w1, c1, 3, 2, 1}, rng));
    res_.push_back(make_res(ps, name + ".mid0", c1, c1, h2, w2, rng));
    res_.push_back(make_res(ps, name + ".mid1", c1, c1, h2, w2, rng));
    res_.push_back(make_res(ps, name + ".up1", 2 * c1, c1, h1, w1, rng));
    res_.push_back(make_res(ps, name + ".up0", c1 + c0, c0, h0, w0, rng));
    conv_out_ = nn::Conv2d<T>(ps, name + ".conv_out", ag::ConvGeometry{c0, h0, w0, f.channels, 3, 1, 1}, rng, 0.5);
  }

  Var<T> forward_unet(const Var<T>& x, const Var<T>& temb, const Var<T>& cond) const {
    const auto& f = cfg_.frame;
    const std::size_t c0 = cfg_.base_channels, c1 = 2 * cfg_.base_channels;
    Tensor<T> grid(x.rows(), coords_.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) std::copy(coords_.row(0), coords_.row(0) + coords_.cols(), grid.row(r));
    auto h = conv_in_(ag::concat_cols<T>({x, Var<T>::constant(std::move(grid))}));
    auto skip0 = run_res(res_[0], h, temb, cond);
    auto skip1 = run_res(res_[1], down_[0](skip0), temb, cond);
    auto m = run_res(res_[2], down_[1](skip1), temb, cond);
    m = run_res(res_[3], m, temb, cond);
    auto u = ag::upsample2x(m, c1, f.height / 4, f.width / 4);
    u = run_res(res_[4], ag::concat_cols<T>({u, skip1}), temb, cond);
    u = ag::upsample2x(u, c1, f.height / 2, f.width / 2);
    u = run_res(res_[5], ag::concat_cols<T>({u, skip0}), temb, cond);
    return conv_out_(ag::silu(ag::group_norm(u, std::min(cfg_.groups, c0), c0)));
  }

  DenoiserNetConfig cfg_;
  nn::Linear<T> temb1_, temb2_;
  nn::Linear<T> fc_in_, fc_out_;
  std::vector<MlpBlock> mlp_blocks_;
  nn::Conv2d<T> conv_in_, conv_out_;
  Tensor<T> coords_;  // x and y ramps in [-1, 1], appended as input channels
  std::vector<nn::Conv2d<T>> down_;
  std::vector<ResBlock> res_;
};

/// Inference-time interface consumed by the samplers. x_t is [n x D]; every
/// row shares the noise level σ; cond is [n x (h + k)].
template <class T>
class ConditionalDenoiser {
 public:
  virtual ~ConditionalDenoiser() = default;
  virtual Tensor<T> denoise(const Tensor<T>& x_t, double sigma, const Tensor<T>& cond) const = 0;
};

/// D built from a DenoiserNet and the preconditioning coefficients.
template <class T>
class NetworkDenoiser final : public ConditionalDenoiser<T> {
 public:
  NetworkDenoiser(const DenoiserNet<T>& net, diffusion::DenoiserConfig cfg) : net_(&net), cfg_(cfg) {}

  struct Output {
    Tensor<T> x0_hat;
    Tensor<T> f_raw;
  };

  Output denoise_full(const Tensor<T>& x_t, double sigma, const Tensor<T>& cond) const {
    ag::NoGradGuard guard;
    const auto c = diffusion::precondition_coeffs(sigma, cfg_);
    Tensor<T> in = x_t;
    kernels::table<T>().scale(in.size(), static_cast<T>(c.c_in), in.data());
    std::vector<T> c_noise(x_t.rows(), static_cast<T>(c.c_noise));
    auto f = (*net_)(Var<T>::constant(std::move(in)), c_noise, Var<T>::constant(cond));
    Output out{Tensor<T>(x_t.rows(), x_t.cols()), f.value()};
    const T skip = static_cast<T>(c.c_skip), cout = static_cast<T>(c.c_out);
    for (std::size_t i = 0; i < out.x0_hat.size(); ++i) out.x0_hat[i] = skip * x_t[i] + cout * out.f_raw[i];
    return out;
  }

  Tensor<T> denoise(const Tensor<T>& x_t, double sigma, const Tensor<T>& cond) const override {
    return denoise_full(x_t, sigma, cond).x0_hat;
  }

  const diffusion::DenoiserConfig& config() const { return cfg_; }

 private:
  const DenoiserNet<T>* net_;
  diffusion::DenoiserConfig cfg_;
};

/// Exact posterior mean for data ~ N(μ, s² I) under Gaussian noise:
/// D(x_t; σ) = (s² x_t + σ² μ) / (s² + σ²). Ignores the conditioning.
template <class T>
class GaussianDenoiser final : public ConditionalDenoiser<T> {
 public:
  GaussianDenoiser(std::vector<double> mu, double s2) : mu_(std::move(mu)), s2_(s2) {
    if (!(s2 > 0)) throw DomainError("analytic_gaussian_denoiser: s2 must be positive");
  }

  Tensor<T> denoise(const Tensor<T>& x_t, double sigma, const Tensor<T>&) const override {
    require(x_t.cols() == mu_.size(), "gaussian denoiser: dimension mismatch");
    const double v = sigma * sigma;
    Tensor<T> out(x_t.rows(), x_t.cols());
    for (std::size_t r = 0; r < x_t.rows(); ++r) {
      for (std::size_t c = 0; c < x_t.cols(); ++c) {
        out(r, c) = static_cast<T>((s2_ * static_cast<double>(x_t(r, c)) + v * mu_[c]) / (s2_ + v));
      }
    }
    return out;
  }

  const std::vector<double>& mean() const { return mu_; }
  double variance() const { return s2_; }

 private:
  std::vector<double> mu_;
  double s2_;
};

template <class T>
std::unique_ptr<GaussianDenoiser<T>> analytic_gaussian_denoiser(std::vector<double> mu, double s2) {
  return std::make_unique<GaussianDenoiser<T>>(std::move(mu), s2);
}

}  // namespace seqdiff::denoiser
