#pragma once
// Sequential semantic encoder: per-frame features, a causal recurrent
// summarizer, one static code from the last state and per-frame dynamic codes
// from a second causal pass.

#include <string>
#include <vector>

#include "seqdiff/frame.hpp"
#include "seqdiff/nn.hpp"

namespace seqdiff::encoder {

using ag::Var;

enum class FrameBackbone { mlp, conv };

inline std::string to_string(FrameBackbone b) { return b == FrameBackbone::mlp ? "mlp" : "conv"; }

struct EncoderConfig {
  FrameShape frame;
  FrameBackbone backbone = FrameBackbone::mlp;
  std::size_t frame_feature_dim = 128;
  std::size_t hidden_dim = 128;
  std::size_t static_dim = 32;  // h
  std::size_t dynamic_dim = 4;  // k
  bool share_static = true;

  void validate() const {
    if (frame.dim() == 0 || frame_feature_dim == 0 || hidden_dim == 0 || static_dim == 0 || dynamic_dim == 0) {
      throw ConfigError("encoder dimensions must be positive");
    }
    if (dynamic_dim > static_dim) throw ConfigError("encoder: dynamic_dim must not exceed static_dim");
    if (backbone == FrameBackbone::conv && !frame.is_image()) throw ConfigError("conv backbone requires image frames");
    if (backbone == FrameBackbone::conv && (frame.height % 8 != 0 || frame.width % 8 != 0)) {
      throw ConfigError("conv backbone needs H, W divisible by 8");
    }
  }
};

/// Batched factors. Frame rows are ordered b * V + τ. With a shared static
/// code `stat` is [B x h]; without it `stat` is [B*V x h].
template <class T>
struct LatentFactors {
  Var<T> stat;
  Var<T> dyn;
  std::size_t batch = 0;
  std::size_t frames = 0;
  bool shared = true;

  std::size_t static_dim() const { return stat.cols(); }
  std::size_t dynamic_dim() const { return dyn.cols(); }

  /// Per-frame conditioning rows [s ; d^τ], one per frame.
  Var<T> conditioning() const {
    auto s = shared ? ag::repeat_rows(stat, frames) : stat;
    return ag::concat_cols<T>({s, dyn});
  }
};

/// Plain-tensor view of factors for inference code.
template <class T>
struct FactorValues {
  Tensor<T> stat;         // [B x h]; the last frame's code when not shared
  Tensor<T> stat_frames;  // [B*V x h] when static codes are per frame, else empty
  Tensor<T> dyn;          // [B*V x k]
  std::size_t frames = 0;

  bool shared() const { return stat_frames.empty(); }

  Tensor<T> conditioning() const {
    const std::size_t b = stat.rows(), h = stat.cols(), k = dyn.cols();
    require(dyn.rows() == b * frames, "factors: dynamic rows must equal B * V");
    Tensor<T> c(b * frames, h + k);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t t = 0; t < frames; ++t) {
        T* out = c.row(i * frames + t);
        const T* s = shared() ? stat.row(i) : stat_frames.row(i * frames + t);
        std::copy(s, s + h, out);
        std::copy(dyn.row(i * frames + t), dyn.row(i * frames + t) + k, out + h);
      }
    }
    return c;
  }
};

template <class T>
class SequentialEncoder {
 public:
  SequentialEncoder() = default;
  SequentialEncoder(nn::ParamSet<T>& ps, const std::string& name, EncoderConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    const std::size_t f = cfg.frame_feature_dim;
    if (cfg.backbone == FrameBackbone::mlp) {
      fc1_ = nn::Linear<T>(ps, name + ".fc1", cfg.frame.dim(), f, rng);
      fc2_ = nn::Linear<T>(ps, name + ".fc2", f, f, rng);
    } else {
      std::size_t ch = cfg.frame.channels, h = cfg.frame.height, w = cfg.frame.width;
      const std::size_t widths[3] = {16, 32, 32};
      for (std::size_t i = 0; i < 3; ++i) {
        convs_.push_back(nn::Conv2d<T>(ps, name + ".conv" + std::to_string(i),
                                       ag::ConvGeometry{ch, h, w, widths[i], 3, 2, 1}, rng));
        ch = widths[i];
        h /= 2;
        w /= 2;
      }
      fc1_ = nn::Linear<T>(ps, name + ".fc1", ch * h * w, f, rng);
      fc2_ = nn::Linear<T>(ps, name + ".fc2", f, f, rng);
    }
    lstm_static_ = nn::Lstm<T>(ps, name + ".lstm1", f, cfg.hidden_dim, rng);
    lstm_dynamic_ = nn::Lstm<T>(ps, name + ".lstm2", cfg.hidden_dim, cfg.hidden_dim, rng);
    static_head_ = nn::Linear<T>(ps, name + ".static", cfg.hidden_dim, cfg.static_dim, rng);
    dynamic_head_ = nn::Linear<T>(ps, name + ".dynamic", cfg.hidden_dim, cfg.dynamic_dim, rng);
  }

  const EncoderConfig& config() const { return cfg_; }

  /// x is [B*V x D] with rows ordered b * V + τ.
  LatentFactors<T> encode(const Var<T>& x, std::size_t frames) const {
    require(frames >= 1, "encode: empty sequence");
    require(x.rows() > 0 && x.rows() % frames == 0, "encode: row count is not a multiple of V");
    require(x.cols() == cfg_.frame.dim(), "encode: frame shape mismatch");
    const std::size_t batch = x.rows() / frames;
    auto feat = features(x);
    std::vector<Var<T>> steps;
    steps.reserve(frames);
    for (std::size_t t = 0; t < frames; ++t) steps.push_back(ag::gather_rows(feat, t, frames, batch));
    auto hs = lstm_static_.run(steps);
    auto gs = lstm_dynamic_.run(hs);
    std::vector<Var<T>> dyn;
    dyn.reserve(frames);
    for (const auto& g : gs) dyn.push_back(dynamic_head_(g));
    LatentFactors<T> z;
    z.batch = batch;
    z.frames = frames;
    z.shared = cfg_.share_static;
    z.dyn = ag::interleave_rows(dyn);
    if (cfg_.share_static) {
      z.stat = static_head_(hs.back());
    } else {
      std::vector<Var<T>> per;
      per.reserve(frames);
      for (const auto& h : hs) per.push_back(static_head_(h));
      z.stat = ag::interleave_rows(per);
    }
    return z;
  }

  /// Inference helper without graph recording.
  FactorValues<T> encode_values(const Tensor<T>& x, std::size_t frames) const {
    ag::NoGradGuard guard;
    auto z = encode(Var<T>::constant(x), frames);
    FactorValues<T> v;
    v.frames = frames;
    v.dyn = z.dyn.value();
    if (z.shared) {
      v.stat = z.stat.value();
    } else {
      v.stat_frames = z.stat.value();
      v.stat = Tensor<T>(z.batch, z.stat.cols());
      for (std::size_t b = 0; b < z.batch; ++b) {
        const T* src = z.stat.value().row(b * frames + frames - 1);
        std::copy(src, src + z.stat.cols(), v.stat.row(b));
      }
    }
    return v;
  }

  /// Per-frame conditioning rows straight from the input, honouring the
  /// static-sharing setting.
  Tensor<T> conditioning_values(const Tensor<T>& x, std::size_t frames) const {
    ag::NoGradGuard guard;
    return encode(Var<T>::constant(x), frames).conditioning().value();
  }

 private:
  Var<T> features(const Var<T>& x) const {
    Var<T> h = x;
    for (const auto& c : convs_) h = ag::silu(c(h));
    h = ag::silu(fc1_(h));
    return ag::silu(fc2_(h));
  }

  EncoderConfig cfg_;
  std::vector<nn::Conv2d<T>> convs_;
  nn::Linear<T> fc1_, fc2_;
  nn::Lstm<T> lstm_static_, lstm_dynamic_;
  nn::Linear<T> static_head_, dynamic_head_;
};

/// x_t = x_0 + σ ε for the stochastic encoder input.
template <class T>
Tensor<T> encode_stochastic_latent(const Tensor<T>& x0, double sigma, Rng& rng) {
  if (!(sigma > 0)) throw DomainError("encode_stochastic_latent: sigma must be positive");
  Tensor<T> xt(x0.rows(), x0.cols());
  for (std::size_t i = 0; i < x0.size(); ++i) xt[i] = x0[i] + static_cast<T>(sigma * rng.normal());
  return xt;
}

}  // namespace seqdiff::encoder
