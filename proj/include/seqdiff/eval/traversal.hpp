#pragma once
// Principal directions of a pool of static codes and the standardized
// traversal along them.

#include <vector>

#include "seqdiff/tensor.hpp"

namespace seqdiff::eval {

struct TraversalSpec {
  std::vector<double> mean;                 // μ_ŝ
  std::vector<double> std;                  // σ_ŝ, clamped below at 1e-8
  Tensor<double> components;                // [h x h], row i = v_i, by decreasing variance
  std::vector<double> explained;            // eigenvalues of the standardized covariance
  std::vector<std::size_t> clamped;         // dimensions whose σ was clamped
  double kappa = 0.3;

  std::size_t dim() const { return mean.size(); }
};

/// PCA of the standardized pool [b x h]; requires b ≥ h.
TraversalSpec fit_traversal(const Tensor<double>& pool, double kappa = 0.3);

/// s̄ = ((s − μ)/σ + α v_i √h) σ + μ, evaluated as s + α √h σ ⊙ v_i so that
/// α = 0 returns s bit for bit. Throws DomainError when |α| > κ or i ≥ h.
std::vector<double> pca_traverse(const std::vector<double>& s, const TraversalSpec& spec, std::size_t i, double alpha);

/// Rows of `codes` each moved along component i.
Tensor<double> pca_traverse_rows(const Tensor<double>& codes, const TraversalSpec& spec, std::size_t i, double alpha);

}  // namespace seqdiff::eval
