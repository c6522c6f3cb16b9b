#include "seqdiff/eval/probes.hpp"

#include <cmath>

namespace seqdiff::eval {

Eigen::MatrixXd to_eigen(const Tensor<double>& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) m(r, c) = t(r, c);
  }
  return m;
}

FeatureScaler FeatureScaler::fit(const Eigen::MatrixXd& x) {
  FeatureScaler s;
  s.mean = x.colwise().mean();
  s.inv_std = Eigen::RowVectorXd::Ones(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double sd = std::sqrt((x.col(c).array() - s.mean(c)).square().mean());
    if (sd > 1e-12) s.inv_std(c) = 1.0 / sd;
  }
  return s;
}

Eigen::MatrixXd FeatureScaler::apply(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - mean).array().rowwise() * inv_std.array();
}

namespace {

Eigen::MatrixXd softmax_rows(Eigen::MatrixXd logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    logits.row(r) = (logits.row(r).array() - m).exp();
    logits.row(r) /= logits.row(r).sum();
  }
  return logits;
}

}  // namespace

void SoftmaxProbe::fit(const Tensor<double>& features, const std::vector<int>& labels, std::size_t classes,
                       const SoftmaxProbeConfig& cfg) {
  require(features.rows() == labels.size() && !labels.empty(), "softmax probe: one label per row");
  require(classes >= 2, "softmax probe: needs at least two classes");
  for (const int l : labels) require(l >= 0 && static_cast<std::size_t>(l) < classes, "softmax probe: label out of range");
  const Eigen::MatrixXd raw = to_eigen(features);
  scaler_ = FeatureScaler::fit(raw);
  const Eigen::MatrixXd x = scaler_.apply(raw);
  const auto n = x.rows(), p = x.cols(), k = static_cast<Eigen::Index>(classes);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) y(i, labels[static_cast<std::size_t>(i)]) = 1.0;
  w_ = Eigen::MatrixXd::Zero(p, k);
  b_ = Eigen::RowVectorXd::Zero(k);
  Eigen::MatrixXd mw = w_, vw = w_;
  Eigen::RowVectorXd mb = b_, vb = b_;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    const Eigen::MatrixXd prob = softmax_rows((x * w_).rowwise() + b_);
    const Eigen::MatrixXd g = (prob - y) / static_cast<double>(n);
    const Eigen::MatrixXd gw = x.transpose() * g + cfg.l2 * w_;
    const Eigen::RowVectorXd gb = g.colwise().sum();
    mw = b1 * mw + (1 - b1) * gw;
    vw = b2 * vw + (1 - b2) * gw.cwiseProduct(gw);
    mb = b1 * mb + (1 - b1) * gb;
    vb = b2 * vb + (1 - b2) * gb.cwiseProduct(gb);
    const double c1 = 1 - std::pow(b1, static_cast<double>(e)), c2 = 1 - std::pow(b2, static_cast<double>(e));
    w_.array() -= cfg.lr * (mw.array() / c1) / ((vw.array() / c2).sqrt() + eps);
    b_.array() -= cfg.lr * (mb.array() / c1) / ((vb.array() / c2).sqrt() + eps);
  }
}

Eigen::MatrixXd SoftmaxProbe::probabilities(const Tensor<double>& features) const {
  require(static_cast<Eigen::Index>(features.cols()) == w_.rows(), "softmax probe: feature width mismatch");
  return softmax_rows((scaler_.apply(to_eigen(features)) * w_).rowwise() + b_);
}

std::vector<int> SoftmaxProbe::predict(const Tensor<double>& features) const {
  const auto p = probabilities(features);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    Eigen::Index best = 0;
    p.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

void RidgeProbe::fit(const Tensor<double>& features, const Tensor<double>& targets, double lambda) {
  require(features.rows() == targets.rows() && features.rows() > 0, "ridge probe: one target row per feature row");
  const Eigen::MatrixXd raw = to_eigen(features);
  scaler_ = FeatureScaler::fit(raw);
  const Eigen::MatrixXd x = scaler_.apply(raw);
  const Eigen::MatrixXd y = to_eigen(targets);
  b_ = y.colwise().mean();
  const Eigen::MatrixXd yc = y.rowwise() - b_;
  Eigen::MatrixXd a = x.transpose() * x / static_cast<double>(x.rows());
  a.diagonal().array() += lambda;
  w_ = a.ldlt().solve(x.transpose() * yc / static_cast<double>(x.rows()));
}

Tensor<double> RidgeProbe::predict(const Tensor<double>& features) const {
  require(static_cast<Eigen::Index>(features.cols()) == w_.rows(), "ridge probe: feature width mismatch");
  const Eigen::MatrixXd y = (scaler_.apply(to_eigen(features)) * w_).rowwise() + b_;
  Tensor<double> out(static_cast<std::size_t>(y.rows()), static_cast<std::size_t>(y.cols()));
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    for (Eigen::Index c = 0; c < y.cols(); ++c) out(r, c) = y(r, c);
  }
  return out;
}

}  // namespace seqdiff::eval
