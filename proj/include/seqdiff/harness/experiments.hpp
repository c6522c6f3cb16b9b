#pragma once
// Training entry points and the experiments behind the CLI verbs.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "seqdiff/eval/metrics.hpp"
#include "seqdiff/eval/report.hpp"
#include "seqdiff/eval/swap.hpp"
#include "seqdiff/eval/traversal.hpp"
#include "seqdiff/harness/checkpoint.hpp"

namespace seqdiff::harness {

struct Datasets {
  data::SequenceBatch train;
  data::SequenceBatch test;
};

/// Train and test draws of the configured generator. The two seeds are
/// derived from cfg.seed and never coincide.
Datasets make_datasets(const ExperimentConfig& cfg);

/// Fits the normalizer on `train_raw` and runs cfg.optim.steps joint steps.
Checkpoint train_model(const ExperimentConfig& cfg, const data::SequenceBatch& train_raw,
                       const LossCallback& on_loss = {});

/// Resumes `c` until cfg.optim.steps.
void continue_training(Checkpoint& c, const data::SequenceBatch& train_raw, const LossCallback& on_loss = {});

/// Posterior-mean latents of every training sequence, flattened to
/// [n x (h + V*k)] rows. Requires shared static codes.
Tensor<float> latent_pool(const Checkpoint& c, const data::SequenceBatch& raw);

/// Trains the latent DDIM on latent_pool(train_raw) and stores it in `c`.
void train_prior(Checkpoint& c, const data::SequenceBatch& train_raw, const LossCallback& on_loss = {});

/// Raw frames to the model's normalized float frames and back.
Tensor<float> to_model(const Checkpoint& c, const Tensor<double>& raw_frames);
Tensor<double> to_raw(const Checkpoint& c, const Tensor<float>& model_frames);

/// Reconstructions of `raw` (normalized units) and their MSE against it.
struct Reconstruction {
  Tensor<float> input;
  Tensor<float> output;
  double mse;
};
Reconstruction reconstruct_batch(const Checkpoint& c, const data::SequenceBatch& raw, std::uint64_t seed);

/// Raw-unit swap; `mode` defaults to sampler.swap_encoding.
eval::SwapFn swap_function(const Checkpoint& c, std::size_t frames, std::uint64_t seed,
                           std::optional<sampler::SwapEncoding> mode = {});

/// Probe scores over the configured pair list of `test_raw`.
eval::SwapScores swap_experiment(const Checkpoint& c, const data::SequenceBatch& test_raw,
                                 std::optional<sampler::SwapEncoding> mode = {});

/// Seed used for the decoding noise of swap_experiment.
std::uint64_t swap_seed(const ExperimentConfig& cfg);

/// n new sequences of V frames from z drawn by the latent prior, decoded
/// from fresh noise. Raw units. Requires a trained prior.
Tensor<double> sample_sequences(const Checkpoint& c, std::size_t n, std::uint64_t seed);

struct TraversalResult {
  eval::TraversalSpec spec;
  std::vector<double> alphas;
  std::size_t components = 0;
  /// components x alphas decoded sequences of the first test sequence, raw
  /// units, row blocks of V frames ordered component-major.
  Tensor<double> frames;
  /// max |edit(s, 0) - s| over the pool rows.
  double alpha_zero_error = 0;
  /// max |edit(s, a+b) - edit(s, a) - edit(s, b) + s|.
  double affinity_error = 0;
};

/// Fits principal directions on static codes (prior samples when a prior is
/// present, training-set encodings otherwise) and decodes edits of one test
/// sequence along the first `components` directions.
TraversalResult traverse_experiment(const Checkpoint& c, const Datasets& d, std::size_t components,
                                    const std::vector<double>& alphas);

/// Static-only versus dynamic-only probes on encoded codes: classification
/// of the static label (accuracy; AUROC/AUPRC when binary) and regression of
/// the target (MAE) when the dataset has one.
eval::MetricsReport downstream_probes(const Checkpoint& c, const Datasets& d);

/// Verification EERs with codes as embeddings and the static label as
/// identity.
eval::GapResult gap_experiment(const Checkpoint& c, const data::SequenceBatch& test_raw);

/// Full evaluation: reconstruction, swap, gap, downstream probes, plus
/// meta.seed and meta.config_hash.
eval::MetricsReport eval_experiment(const Checkpoint& c, const Datasets& d);

struct PriorComparison {
  std::vector<double> dependent;    // energy distance to held-out latents, per seed
  std::vector<double> independent;
  std::size_t dependent_wins = 0;

  eval::MetricsReport report() const;
};

/// Ground-truth factor latents of the correlated-factors generator: a
/// per-sequence static scalar (signed class plus jitter) followed by the V
/// trend vectors.
Tensor<float> factor_latents(const data::SequenceBatch& correlated, std::uint64_t seed);

/// Trains a joint prior and a static/dynamic-factorized prior on
/// factor_latents of cfg.data.train_count correlated sequences for each of
/// `seeds` seeds and scores samples against cfg.data.test_count held-out
/// sequences.
PriorComparison compare_priors(const ExperimentConfig& cfg, std::size_t seeds);

struct AblationCell {
  bool share_static;
  std::size_t dynamic_dim;
  eval::SwapScores scores;
  /// static_accuracy + dynamic_r
  double combined;
};

/// Trains and scores the share_static x dynamic_dim grid. `on_cell` runs
/// after each cell.
std::vector<AblationCell> ablate(const ExperimentConfig& cfg, const std::vector<std::size_t>& dynamic_dims,
                                 const std::function<void(const AblationCell&)>& on_cell = {});

eval::MetricsReport ablation_report(const std::vector<AblationCell>& cells);

}  // namespace seqdiff::harness
