#include "seqdiff/diffusion/core.hpp"

#include <algorithm>
#include <cmath>

namespace seqdiff::diffusion {

void DenoiserConfig::validate() const {
  if (!(sigma_data > 0)) throw ConfigError("sigma_data must be positive");
  if (!(p_std >= 0)) throw ConfigError("P_std must be non-negative");
  if (!(sigma_min > 0)) throw ConfigError("sigma_min must be positive");
  if (!(sigma_min < sigma_max)) throw ConfigError("sigma_min must be below sigma_max");
  if (!(rho > 0)) throw ConfigError("rho must be positive");
}

PreconditionCoeffs precondition_coeffs(double sigma, const DenoiserConfig& cfg) {
  if (!(sigma > 0)) throw DomainError("precondition_coeffs: sigma must be positive");
  const double sd2 = cfg.sigma_data * cfg.sigma_data;
  const double total = sigma * sigma + sd2;
  const double root = std::sqrt(total);
  return PreconditionCoeffs{sd2 / total, 1.0 / root, sigma * cfg.sigma_data / root, std::log(sigma) / 4.0};
}

double loss_weight(double sigma, const DenoiserConfig& cfg) {
  const double c_out = precondition_coeffs(sigma, cfg).c_out;
  return 1.0 / (c_out * c_out);
}

double sample_training_sigma(const DenoiserConfig& cfg, Rng& rng) {
  return std::exp(cfg.p_mean + cfg.p_std * rng.normal());
}

void SigmaSchedule::validate() const {
  require(levels.size() >= 2, "schedule needs at least one step");
  require(levels.back() == 0.0, "schedule must end at level 0");
  require(gamma.size() == levels.size() - 1, "schedule needs one gamma per step");
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
    require(levels[i] > levels[i + 1], "schedule levels must be strictly decreasing");
    require(gamma[i] >= 0, "gamma must be non-negative");
    const bool inside = levels[i] >= s_tmin && levels[i] <= s_tmax;
    require(inside || gamma[i] == 0.0, "gamma must vanish outside [s_tmin, s_tmax]");
  }
}

SigmaSchedule karras_step_schedule(std::size_t n, const DenoiserConfig& cfg, const ChurnConfig& churn) {
  if (n == 0) throw DomainError("karras_step_schedule: N must be at least 1");
  cfg.validate();
  SigmaSchedule s;
  s.s_noise = churn.s_noise;
  s.s_tmin = churn.s_tmin;
  s.s_tmax = churn.s_tmax;
  s.levels.resize(n + 1);
  const double inv_rho = 1.0 / cfg.rho;
  const double hi = std::pow(cfg.sigma_max, inv_rho);
  const double lo = std::pow(cfg.sigma_min, inv_rho);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      s.levels[i] = cfg.sigma_max;
    } else if (i == n - 1) {
      s.levels[i] = cfg.sigma_min;
    } else {
      const double frac = static_cast<double>(i) / static_cast<double>(n - 1);
      s.levels[i] = std::pow(hi + frac * (lo - hi), cfg.rho);
    }
  }
  s.levels[n] = 0.0;
  const double g = std::min(churn.s_churn / static_cast<double>(n), std::sqrt(2.0) - 1.0);
  s.gamma.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool inside = s.levels[i] >= churn.s_tmin && s.levels[i] <= churn.s_tmax;
    s.gamma[i] = inside ? g : 0.0;
  }
  return s;
}

std::size_t steps_for_nfe(std::size_t nfe) {
  if (nfe == 0 || nfe % 2 == 0) throw DomainError("Heun NFE must be odd and positive");
  return (nfe + 1) / 2;
}

}  // namespace seqdiff::diffusion
