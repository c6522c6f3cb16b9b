#include "seqdiff/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace seqdiff::eval {

double compute_eer(std::vector<VerificationTrial> trials) {
  std::size_t n_same = 0, n_diff = 0;
  for (const auto& t : trials) {
    require(std::isfinite(t.score), "eer: non-finite score");
    (t.is_same ? n_same : n_diff) += 1;
  }
  require(n_same > 0 && n_diff > 0, "eer: needs both same and different trials");
  std::sort(trials.begin(), trials.end(), [](const auto& a, const auto& b) { return a.score < b.score; });
  // Thresholds in ascending order: θ_0 = lowest score accepts everything.
  // far = different trials at or above θ; frr = same trials below θ.
  std::vector<double> far, frr;
  std::size_t below_same = 0, below_diff = 0, i = 0;
  while (i < trials.size()) {
    far.push_back(static_cast<double>(n_diff - below_diff) / n_diff);
    frr.push_back(static_cast<double>(below_same) / n_same);
    const double s = trials[i].score;
    while (i < trials.size() && trials[i].score == s) {
      (trials[i].is_same ? below_same : below_diff) += 1;
      ++i;
    }
  }
  far.push_back(0.0);
  frr.push_back(1.0);
  for (std::size_t k = 0; k + 1 < far.size(); ++k) {
    const double d0 = far[k] - frr[k], d1 = far[k + 1] - frr[k + 1];
    if (d0 == 0.0) return far[k];
    if (d0 > 0.0 && d1 <= 0.0) {
      if (d1 == 0.0) return far[k + 1];
      const double a = d0 / (d0 - d1);
      return far[k] + a * (far[k + 1] - far[k]);
    }
  }
  return far.back();
}

std::vector<VerificationTrial> cosine_trials(const Tensor<double>& codes, const std::vector<int>& identity) {
  require(codes.rows() == identity.size(), "trials: one identity per code");
  const std::size_t n = codes.rows(), d = codes.cols();
  std::vector<double> norm(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) s += codes(i, j) * codes(i, j);
    norm[i] = std::sqrt(s);
  }
  std::vector<VerificationTrial> out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      double dot = 0;
      for (std::size_t j = 0; j < d; ++j) dot += codes(a, j) * codes(b, j);
      const double den = norm[a] * norm[b];
      out.push_back({den > 0 ? dot / den : 0.0, identity[a] == identity[b]});
    }
  }
  return out;
}

GapResult disentanglement_gap(const Tensor<double>& static_codes, const Tensor<double>& dynamic_codes,
                              const std::vector<int>& identity) {
  require(static_codes.rows() == dynamic_codes.rows(), "gap: code counts differ");
  std::vector<int> classes = identity;
  std::sort(classes.begin(), classes.end());
  require(std::unique(classes.begin(), classes.end()) - classes.begin() >= 2, "gap: needs at least two identities");
  GapResult r{};
  r.static_eer = compute_eer(cosine_trials(static_codes, identity));
  r.dynamic_eer = compute_eer(cosine_trials(dynamic_codes, identity));
  r.gap = r.dynamic_eer - r.static_eer;
  return r;
}

Tensor<double> pool_dynamic(const Tensor<double>& per_frame, std::size_t frames, const std::string& how) {
  require(frames > 0 && per_frame.rows() % frames == 0, "pool_dynamic: rows must be a multiple of V");
  require(how == "mean" || how == "last", "pool_dynamic: unknown pooling '" + how + "'");
  const std::size_t n = per_frame.rows() / frames, k = per_frame.cols();
  Tensor<double> out(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (how == "last") {
        out(i, j) = per_frame((i + 1) * frames - 1, j);
      } else {
        double s = 0;
        for (std::size_t t = 0; t < frames; ++t) s += per_frame(i * frames + t, j);
        out(i, j) = s / frames;
      }
    }
  }
  return out;
}

double auroc(const std::vector<double>& score, const std::vector<int>& positive) {
  require(score.size() == positive.size(), "auroc: size mismatch");
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
  double np = 0, nn = 0, rank_sum = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && score[idx[j]] == score[idx[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j - 1) + 1.0;  // average 1-based rank
    for (std::size_t k = i; k < j; ++k) {
      if (positive[idx[k]]) {
        rank_sum += mid;
        np += 1;
      } else {
        nn += 1;
      }
    }
    i = j;
  }
  require(np > 0 && nn > 0, "auroc: needs both classes");
  return (rank_sum - np * (np + 1) / 2) / (np * nn);
}

double auprc(const std::vector<double>& score, const std::vector<int>& positive) {
  require(score.size() == positive.size(), "auprc: size mismatch");
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  double total_pos = 0;
  for (const int p : positive) total_pos += p ? 1 : 0;
  require(total_pos > 0 && total_pos < static_cast<double>(score.size()), "auprc: needs both classes");
  double tp = 0, seen = 0, ap = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    double new_pos = 0;
    while (j < idx.size() && score[idx[j]] == score[idx[i]]) {
      new_pos += positive[idx[j]] ? 1 : 0;
      ++j;
    }
    tp += new_pos;
    seen += static_cast<double>(j - i);
    ap += new_pos * (tp / seen);
    i = j;
  }
  return ap / total_pos;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && a.size() >= 2, "pearson: need two equal-length samples");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double mean_column_pearson(const Tensor<double>& a, const Tensor<double>& b) {
  require(a.same_shape(b) && a.cols() > 0, "mean_column_pearson: shape mismatch");
  double s = 0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    std::vector<double> x(a.rows()), y(a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
      x[r] = a(r, j);
      y[r] = b(r, j);
    }
    s += pearson(x, y);
  }
  return s / a.cols();
}

double mean_squared_error(const Tensor<double>& a, const Tensor<double>& b) {
  require(a.same_shape(b), "mse: shape mismatch");
  if (a.empty()) return 0.0;
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / a.size();
}

namespace {

double mean_pair_distance(const Tensor<double>& x, const Tensor<double>& y) {
  double s = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < y.rows(); ++j) {
      double d = 0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double u = x(i, c) - y(j, c);
        d += u * u;
      }
      s += std::sqrt(d);
    }
  }
  return s / (static_cast<double>(x.rows()) * y.rows());
}

}  // namespace

double energy_distance(const Tensor<double>& x, const Tensor<double>& y) {
  require(x.cols() == y.cols() && x.rows() > 0 && y.rows() > 0, "energy_distance: incompatible samples");
  return 2.0 * mean_pair_distance(x, y) - mean_pair_distance(x, x) - mean_pair_distance(y, y);
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  require(predicted.size() == truth.size() && !truth.empty(), "accuracy: size mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / truth.size();
}

}  // namespace seqdiff::eval
