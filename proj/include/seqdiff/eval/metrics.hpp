#pragma once
// Verification and ranking metrics, correlation, and sample distances.

#include <string>
#include <vector>

#include "seqdiff/tensor.hpp"

namespace seqdiff::eval {

struct VerificationTrial {
  double score;
  bool is_same;
};

/// Equal error rate. A trial is accepted when score ≥ θ; θ sweeps every
/// distinct score plus +∞. Between the last threshold with FAR ≥ FRR and the
/// next one, both rates are interpolated linearly to their crossing.
/// Requires at least one same and one different trial.
double compute_eer(std::vector<VerificationTrial> trials);

/// All unordered pairs of rows, scored by cosine similarity, same iff the
/// identities match.
std::vector<VerificationTrial> cosine_trials(const Tensor<double>& codes, const std::vector<int>& identity);

struct GapResult {
  double static_eer;
  double dynamic_eer;
  double gap;  // dynamic - static
};

/// static_codes [n x h]; dynamic_codes [n x k] already pooled per sequence.
GapResult disentanglement_gap(const Tensor<double>& static_codes, const Tensor<double>& dynamic_codes,
                              const std::vector<int>& identity);

/// Pools [n*V x k] per-frame codes to [n x k] by "mean" or "last".
Tensor<double> pool_dynamic(const Tensor<double>& per_frame, std::size_t frames, const std::string& how);

/// Area under the ROC curve, ties counted as 1/2.
double auroc(const std::vector<double>& score, const std::vector<int>& positive);

/// Average precision: mean over positives of the precision among all items
/// scoring at least as high.
double auprc(const std::vector<double>& score, const std::vector<int>& positive);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Mean over columns of the per-column Pearson correlation between two
/// equally shaped matrices, pooling all rows.
double mean_column_pearson(const Tensor<double>& a, const Tensor<double>& b);

double mean_squared_error(const Tensor<double>& a, const Tensor<double>& b);

/// Energy distance 2E|X−Y| − E|X−X'| − E|Y−Y'| between row samples
/// (V-statistic, Euclidean).
double energy_distance(const Tensor<double>& x, const Tensor<double>& y);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

}  // namespace seqdiff::eval
