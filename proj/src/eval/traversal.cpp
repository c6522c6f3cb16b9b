#include "seqdiff/eval/traversal.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace seqdiff::eval {

TraversalSpec fit_traversal(const Tensor<double>& pool, double kappa) {
  const std::size_t b = pool.rows(), h = pool.cols();
  require(h > 0 && b >= h, "fit_traversal: pool size must be at least the code dimension");
  if (!(kappa > 0)) throw DomainError("fit_traversal: kappa must be positive");
  TraversalSpec s;
  s.kappa = kappa;
  s.mean.assign(h, 0.0);
  s.std.assign(h, 0.0);
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t j = 0; j < h; ++j) s.mean[j] += pool(r, j);
  }
  for (auto& m : s.mean) m /= static_cast<double>(b);
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t j = 0; j < h; ++j) s.std[j] += (pool(r, j) - s.mean[j]) * (pool(r, j) - s.mean[j]);
  }
  for (std::size_t j = 0; j < h; ++j) {
    s.std[j] = std::sqrt(s.std[j] / static_cast<double>(b));
    if (s.std[j] < 1e-8) {
      s.std[j] = 1e-8;
      s.clamped.push_back(j);
    }
  }
  Eigen::MatrixXd z(b, h);
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t j = 0; j < h; ++j) z(r, j) = (pool(r, j) - s.mean[j]) / s.std[j];
  }
  const Eigen::MatrixXd cov = z.transpose() * z / static_cast<double>(b);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  s.components = Tensor<double>(h, h);
  for (std::size_t i = 0; i < h; ++i) {
    const auto col = static_cast<Eigen::Index>(h - 1 - i);  // ascending eigenvalues
    s.explained.push_back(eig.eigenvalues()(col));
    // Sign convention: largest-magnitude entry positive.
    Eigen::Index arg = 0;
    eig.eigenvectors().col(col).cwiseAbs().maxCoeff(&arg);
    const double sign = eig.eigenvectors()(arg, col) < 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < h; ++j) s.components(i, j) = sign * eig.eigenvectors()(static_cast<Eigen::Index>(j), col);
  }
  return s;
}

std::vector<double> pca_traverse(const std::vector<double>& s, const TraversalSpec& spec, std::size_t i, double alpha) {
  const std::size_t h = spec.dim();
  require(s.size() == h, "pca_traverse: code dimension mismatch");
  if (i >= h) throw DomainError("pca_traverse: component index out of range");
  if (std::abs(alpha) > spec.kappa) throw DomainError("pca_traverse: |alpha| exceeds kappa");
  std::vector<double> out(s);
  const double step = alpha * std::sqrt(static_cast<double>(h));
  for (std::size_t j = 0; j < h; ++j) out[j] += step * spec.components(i, j) * spec.std[j];
  return out;
}

Tensor<double> pca_traverse_rows(const Tensor<double>& codes, const TraversalSpec& spec, std::size_t i, double alpha) {
  Tensor<double> out(codes.rows(), codes.cols());
  for (std::size_t r = 0; r < codes.rows(); ++r) {
    const auto moved = pca_traverse(std::vector<double>(codes.row(r), codes.row(r) + codes.cols()), spec, i, alpha);
    std::copy(moved.begin(), moved.end(), out.row(r));
  }
  return out;
}

}  // namespace seqdiff::eval
