#pragma once
// Conditioned stochastic Heun sampler, stochastic encoding (the same ODE run
// toward σ_max), and the swap / reconstruction compositions built on them.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "seqdiff/denoiser/denoiser.hpp"
#include "seqdiff/diffusion/core.hpp"
#include "seqdiff/encoder/encoder.hpp"

namespace seqdiff::sampler {

using denoiser::ConditionalDenoiser;
using diffusion::SigmaSchedule;

/// One random stream per frame row, keyed by a stable frame id, so a frame's
/// trajectory does not depend on which other frames share the batch.
class FrameStreams {
 public:
  FrameStreams(std::uint64_t seed, std::size_t rows, const std::vector<std::uint64_t>* ids) {
    if (ids != nullptr) require(ids->size() == rows, "frame ids: one per row");
    streams_.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) streams_.push_back(Rng::stream(seed, ids != nullptr ? (*ids)[r] : r));
  }
  Rng& operator[](std::size_t r) { return streams_[r]; }
  std::size_t size() const { return streams_.size(); }

 private:
  std::vector<Rng> streams_;
};

template <class T>
struct SampleRequest {
  Tensor<T> cond;                      // [n x (h + k)], one row per frame
  SigmaSchedule schedule;
  std::optional<Tensor<T>> x_init;     // state at level t_0; drawn N(0, t_0² I) when absent
  std::size_t frame_dim = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> frame_ids;  // empty: row index
  // Called with (i + 1, t_{i+1}, state) after every step when set.
  std::function<void(std::size_t, double, const Tensor<T>&)> on_step;
};

namespace detail {

template <class T>
void add_churn(Tensor<T>& x, double t, double t_hat, double s_noise, FrameStreams& rng) {
  const double amp = std::sqrt(t_hat * t_hat - t * t) * s_noise;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    T* row = x.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) row[c] += static_cast<T>(amp * rng[r].normal());
  }
}

/// One Heun step from level `from` to `to`, starting at state x.
template <class T>
Tensor<T> heun_step(const ConditionalDenoiser<T>& den, const Tensor<T>& x, double from, double to, const Tensor<T>& cond,
                    bool correct) {
  const Tensor<T> d0 = den.denoise(x, from, cond);
  const T h = static_cast<T>(to - from);
  const T inv_from = static_cast<T>(1.0 / from);
  Tensor<T> slope(x.rows(), x.cols());
  Tensor<T> next(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    slope[i] = (x[i] - d0[i]) * inv_from;
    next[i] = x[i] + h * slope[i];
  }
  if (!correct) return next;
  const Tensor<T> d1 = den.denoise(next, to, cond);
  const T inv_to = static_cast<T>(1.0 / to);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T slope2 = (next[i] - d1[i]) * inv_to;
    next[i] = x[i] + h * (T(0.5) * slope[i] + T(0.5) * slope2);
  }
  return next;
}

}  // namespace detail

/// Reverse sampler. Per step i: t̂ = (1 + γ_i) t_i, x̂ = x + √(t̂² − t_i²) S_noise ε,
/// Euler step from t̂ to t_{i+1} with the slope at (x̂, t̂), and a trapezoidal
/// correction unless t_{i+1} = 0.
template <class T>
Tensor<T> conditioned_sample(const SampleRequest<T>& req, const ConditionalDenoiser<T>& den) {
  const auto& s = req.schedule;
  s.validate();
  const std::size_t n = req.cond.rows();
  const std::size_t dim = req.x_init ? req.x_init->cols() : req.frame_dim;
  require(dim > 0, "conditioned_sample: frame dimension unknown");
  if (req.x_init) require(req.x_init->rows() == n, "conditioned_sample: x_init rows must match conditioning rows");
  FrameStreams rng(req.seed, n, req.frame_ids.empty() ? nullptr : &req.frame_ids);
  Tensor<T> x;
  if (req.x_init) {
    x = *req.x_init;
  } else {
    x = Tensor<T>(n, dim);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < dim; ++c) x(r, c) = static_cast<T>(s.levels[0] * rng[r].normal());
    }
  }
  for (std::size_t i = 0; i < s.steps(); ++i) {
    const double t = s.levels[i], t_next = s.levels[i + 1];
    const double t_hat = t + s.gamma[i] * t;
    if (t_hat > t) detail::add_churn(x, t, t_hat, s.s_noise, rng);
    x = detail::heun_step(den, x, t_hat, t_next, req.cond, t_next != 0.0);
    if (req.on_step) req.on_step(i + 1, t_next, x);
  }
  return x;
}

/// Forward integration of the same ODE. Visits the schedule's positive levels
/// in ascending order, starting from the data at the smallest level and
/// ending at σ_max; the step that lands on σ_max is first order.
template <class T>
Tensor<T> stochastic_encode(const Tensor<T>& x0, const Tensor<T>& cond, const SigmaSchedule& s,
                            const ConditionalDenoiser<T>& den, std::uint64_t seed,
                            const std::vector<std::uint64_t>& frame_ids = {}) {
  s.validate();
  require(cond.rows() == x0.rows(), "stochastic_encode: conditioning rows must match frames");
  std::vector<double> up(s.levels.rbegin() + 1, s.levels.rend());
  std::vector<double> gam(s.gamma.rbegin(), s.gamma.rend());
  const double top = up.back();
  FrameStreams rng(seed ^ 0x5eedULL, x0.rows(), frame_ids.empty() ? nullptr : &frame_ids);
  Tensor<T> x = x0;
  for (std::size_t i = 0; i + 1 < up.size(); ++i) {
    const double t = up[i], t_next = up[i + 1];
    const double t_hat = t + gam[i] * t;
    if (t_hat > t) detail::add_churn(x, t, t_hat, s.s_noise, rng);
    x = detail::heun_step(den, x, t_hat, t_next, cond, t_next != top);
  }
  return x;
}

/// Which conditioning drives the stochastic encoding of the dynamics source.
enum class SwapEncoding {
  own,      // ẑ: the source's own factors
  swapped,  // z̄: the factors used for decoding
  none      // no encoding; start from fresh noise
};

inline std::string to_string(SwapEncoding e) {
  switch (e) {
    case SwapEncoding::own: return "own";
    case SwapEncoding::swapped: return "swapped";
    case SwapEncoding::none: return "none";
  }
  return "unknown";
}

inline SwapEncoding parse_swap_encoding(const std::string& s) {
  if (s == "own") return SwapEncoding::own;
  if (s == "swapped") return SwapEncoding::swapped;
  if (s == "none") return SwapEncoding::none;
  throw ConfigError("unknown swap encoding '" + s + "'");
}

/// Bundles the encoder, denoiser and schedule used for sequence-level calls.
template <class T>
struct Pipeline {
  const encoder::SequentialEncoder<T>* enc = nullptr;
  const ConditionalDenoiser<T>* den = nullptr;
  SigmaSchedule schedule;
  std::size_t frames = 0;
};

/// Decodes per-frame conditioning `cond`, optionally from the stochastic
/// encoding of `x_enc` under `enc_cond`.
template <class T>
Tensor<T> decode(const Pipeline<T>& p, const Tensor<T>& cond, const Tensor<T>* x_enc, const Tensor<T>* enc_cond,
                 std::size_t frame_dim, std::uint64_t seed) {
  SampleRequest<T> req;
  req.cond = cond;
  req.schedule = p.schedule;
  req.frame_dim = frame_dim;
  req.seed = seed;
  if (x_enc != nullptr) req.x_init = stochastic_encode(*x_enc, *enc_cond, p.schedule, *p.den, seed);
  return conditioned_sample(req, *p.den);
}

/// encode → stochastic_encode → conditioned_sample under the sequence's own z.
template <class T>
Tensor<T> reconstruct(const Pipeline<T>& p, const Tensor<T>& x, std::uint64_t seed) {
  const Tensor<T> cond = p.enc->encode_values(x, p.frames).conditioning();
  return decode(p, cond, &x, &cond, x.cols(), seed);
}

/// Conditioning for z̄ = (s of a, d of b), frame by frame.
template <class T>
Tensor<T> swapped_conditioning(const encoder::FactorValues<T>& a, const encoder::FactorValues<T>& b) {
  require(a.frames == b.frames && a.dyn.rows() == b.dyn.rows(), "swap: sequences must have equal V and batch");
  encoder::FactorValues<T> mix = a;
  mix.dyn = b.dyn;
  return mix.conditioning();
}

/// Output carries the static factor of `x_static_src` and the dynamics of
/// `x_dyn_src`.
template <class T>
Tensor<T> conditional_swap(const Pipeline<T>& p, const Tensor<T>& x_static_src, const Tensor<T>& x_dyn_src,
                           std::uint64_t seed, SwapEncoding mode = SwapEncoding::own) {
  require(x_static_src.rows() == x_dyn_src.rows() && x_static_src.cols() == x_dyn_src.cols(),
          "swap: sequences must have equal V and frame shape");
  const auto za = p.enc->encode_values(x_static_src, p.frames);
  const auto zb = p.enc->encode_values(x_dyn_src, p.frames);
  const Tensor<T> zbar = swapped_conditioning(za, zb);
  switch (mode) {
    case SwapEncoding::swapped: return decode(p, zbar, &x_dyn_src, &zbar, x_dyn_src.cols(), seed);
    case SwapEncoding::own: {
      const Tensor<T> zhat = zb.conditioning();
      return decode(p, zbar, &x_dyn_src, &zhat, x_dyn_src.cols(), seed);
    }
    case SwapEncoding::none: break;
  }
  return decode<T>(p, zbar, nullptr, nullptr, x_dyn_src.cols(), seed);
}

}  // namespace seqdiff::sampler
