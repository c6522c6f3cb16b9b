#pragma once
// Small supervised probes fit on frozen features: multinomial logistic
// regression and ridge regression, both on standardized inputs.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "seqdiff/tensor.hpp"

namespace seqdiff::eval {

/// Per-column z-score fitted on training features; constant columns keep
/// scale 1.
struct FeatureScaler {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd inv_std;

  static FeatureScaler fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

Eigen::MatrixXd to_eigen(const Tensor<double>& t);

struct SoftmaxProbeConfig {
  std::size_t epochs = 300;
  double lr = 0.1;
  double l2 = 1e-4;
};

/// Multinomial logistic regression trained with full-batch Adam from zero
/// weights, so the fit is deterministic.
class SoftmaxProbe {
 public:
  void fit(const Tensor<double>& features, const std::vector<int>& labels, std::size_t classes,
           const SoftmaxProbeConfig& cfg = {});
  Eigen::MatrixXd probabilities(const Tensor<double>& features) const;
  std::vector<int> predict(const Tensor<double>& features) const;
  std::size_t classes() const { return static_cast<std::size_t>(w_.cols()); }

 private:
  FeatureScaler scaler_;
  Eigen::MatrixXd w_;
  Eigen::RowVectorXd b_;
};

/// Ridge regression to one or more targets, closed form.
class RidgeProbe {
 public:
  void fit(const Tensor<double>& features, const Tensor<double>& targets, double lambda = 1e-3);
  Tensor<double> predict(const Tensor<double>& features) const;

 private:
  FeatureScaler scaler_;
  Eigen::MatrixXd w_;
  Eigen::RowVectorXd b_;
};

}  // namespace seqdiff::eval
