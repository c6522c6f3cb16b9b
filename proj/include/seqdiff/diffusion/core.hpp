#pragma once
// Noise-level machinery: preconditioning coefficients, training-σ draws,
// the single denoising objective, and the inference step schedule.

#include <cmath>
#include <limits>
#include <vector>

#include "seqdiff/autograd.hpp"
#include "seqdiff/random.hpp"
#include "seqdiff/tensor.hpp"

namespace seqdiff::diffusion {

struct DenoiserConfig {
  double sigma_data = 0.5;
  double p_mean = -1.2;
  double p_std = 1.2;
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double rho = 7.0;

  void validate() const;
};

struct PreconditionCoeffs {
  double c_skip;
  double c_in;
  double c_out;
  double c_noise;
};

/// c_skip = σd²/(σ²+σd²), c_out = σσd/√(σ²+σd²), c_in = 1/√(σ²+σd²),
/// c_noise = ln(σ)/4. Throws DomainError for σ ≤ 0.
PreconditionCoeffs precondition_coeffs(double sigma, const DenoiserConfig& cfg);

/// Loss weight λ(σ) = 1/c_out², which turns the objective into a unit-weight
/// regression in F-space.
double loss_weight(double sigma, const DenoiserConfig& cfg);

/// ln σ ~ Normal(P_mean, P_std²).
double sample_training_sigma(const DenoiserConfig& cfg, Rng& rng);

/// Churn settings shared by the sampler and the stochastic encoder.
struct ChurnConfig {
  double s_churn = 0.0;
  double s_noise = 1.0;
  double s_tmin = 0.0;
  double s_tmax = std::numeric_limits<double>::infinity();
};

/// levels[0] > ... > levels[N-1] > levels[N] = 0 and one γ per step.
struct SigmaSchedule {
  std::vector<double> levels;
  std::vector<double> gamma;
  double s_noise = 1.0;
  double s_tmin = 0.0;
  double s_tmax = std::numeric_limits<double>::infinity();

  std::size_t steps() const { return levels.empty() ? 0 : levels.size() - 1; }
  /// Throws ContractViolation unless strictly decreasing and ending at 0, with
  /// γ_i = 0 wherever t_i lies outside [s_tmin, s_tmax].
  void validate() const;
};

/// Karras ρ-spaced levels from σ_max to σ_min, followed by a final 0.
/// γ_i = min(S_churn/N, √2 − 1) inside [s_tmin, s_tmax], else 0.
SigmaSchedule karras_step_schedule(std::size_t n, const DenoiserConfig& cfg, const ChurnConfig& churn = {});

/// Number of Heun steps that spends `nfe` network evaluations (NFE = 2N − 1).
std::size_t steps_for_nfe(std::size_t nfe);

/// x_t = x_0 + σ ε with ε ~ N(0, I); one σ per row.
template <class T>
Tensor<T> add_noise(const Tensor<T>& x0, const std::vector<double>& sigma, const Tensor<T>& eps) {
  require(x0.same_shape(eps), "add_noise: shape mismatch");
  require(sigma.size() == x0.rows(), "add_noise: one sigma per row");
  Tensor<T> xt(x0.rows(), x0.cols());
  for (std::size_t r = 0; r < x0.rows(); ++r) {
    for (std::size_t c = 0; c < x0.cols(); ++c) xt(r, c) = x0(r, c) + static_cast<T>(sigma[r]) * eps(r, c);
  }
  return xt;
}

/// Network callable: (c_in·x_t as a Var, per-row c_noise) -> raw F output.
template <class T>
using RawNet = std::function<ag::Var<T>(const ag::Var<T>& scaled_input, const std::vector<T>& c_noise)>;

/// Denoised estimate D = c_skip·x_t + c_out·F(c_in·x_t, c_noise), row-wise σ.
template <class T>
ag::Var<T> precondition_output(const Tensor<T>& x_t, const std::vector<double>& sigma, const ag::Var<T>& f_raw,
                               const DenoiserConfig& cfg) {
  std::vector<T> skip(sigma.size()), out(sigma.size());
  for (std::size_t r = 0; r < sigma.size(); ++r) {
    const auto c = precondition_coeffs(sigma[r], cfg);
    skip[r] = static_cast<T>(c.c_skip);
    out[r] = static_cast<T>(c.c_out);
  }
  auto skip_term = ag::scale_rows(ag::Var<T>::constant(x_t), skip);
  return ag::add(skip_term, ag::scale_rows(f_raw, out));
}

/// The single training objective, averaged over rows:
///   mean_r λ(σ_r)·c_out(σ_r)²·‖F(c_in x_t, c_noise) − (x_0 − c_skip x_t)/c_out‖²
/// with x_t = x_0 + σ·noise. Gradients flow into whatever `net` closes over.
template <class T>
ag::Var<T> training_loss(const Tensor<T>& x0, const std::vector<double>& sigma, const Tensor<T>& noise,
                         const RawNet<T>& net, const DenoiserConfig& cfg) {
  require(x0.same_shape(noise), "training_loss: noise shape mismatch");
  require(sigma.size() == x0.rows(), "training_loss: one sigma per row");
  const std::size_t n = x0.rows(), d = x0.cols();
  const Tensor<T> xt = add_noise(x0, sigma, noise);
  std::vector<T> c_in(n), c_noise(n), weight(n);
  Tensor<T> target(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const auto c = precondition_coeffs(sigma[r], cfg);
    c_in[r] = static_cast<T>(c.c_in);
    c_noise[r] = static_cast<T>(c.c_noise);
    weight[r] = static_cast<T>(loss_weight(sigma[r], cfg) * c.c_out * c.c_out / static_cast<double>(n));
    for (std::size_t j = 0; j < d; ++j) {
      target(r, j) = static_cast<T>((static_cast<double>(x0(r, j)) - c.c_skip * static_cast<double>(xt(r, j))) / c.c_out);
    }
  }
  auto input = ag::scale_rows(ag::Var<T>::constant(xt), c_in);
  auto f = net(input, c_noise);
  require(f.value().same_shape(target), "training_loss: network output shape mismatch");
  auto diff = ag::sub(f, ag::Var<T>::constant(std::move(target)));
  auto weighted = ag::scale_rows(diff, weight);
  return ag::sum(ag::mul(weighted, diff));
}

}  // namespace seqdiff::diffusion
