#pragma once
// Swap-preservation protocol: a persisted list of (static source, dynamics
// source) pairs, ground-truth factor probes per generator, and the scores.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "seqdiff/data/synthetic.hpp"
#include "seqdiff/eval/probes.hpp"
#include "seqdiff/eval/report.hpp"

namespace seqdiff::eval {

struct SwapPair {
  std::size_t static_src;
  std::size_t dyn_src;
  bool operator==(const SwapPair&) const = default;
};

struct PairList {
  std::uint64_t seed = 0;
  std::vector<SwapPair> pairs;

  /// Text: "# pairs seed=<seed>" then one "a b" line per pair.
  void save(const std::string& path) const;
  static PairList load(const std::string& path);
  bool operator==(const PairList&) const = default;
};

/// `count` pairs whose two sequences carry different static labels.
PairList make_pair_list(const data::FactorLabels& labels, std::size_t count, std::uint64_t seed);

/// Reads the generator's factors back from raw (unnormalized) frames.
class FactorProbe {
 public:
  virtual ~FactorProbe() = default;
  /// One static label per sequence of V frames.
  virtual std::vector<int> static_labels(const Tensor<double>& frames, std::size_t frames_per_seq) const = 0;
  /// One dynamic-track row per frame.
  virtual Tensor<double> dynamic_track(const Tensor<double>& frames) const = 0;
};

/// Static classifier (softmax) and dynamic extractor fitted on fresh draws
/// from the named generator. Bouncing shapes use sorted-intensity features and
/// the intensity centroid; vector generators use the sequence-mean frame and a
/// ridge regressor per frame.
std::unique_ptr<FactorProbe> make_factor_probe(const std::string& generator, const data::WorldParams& world,
                                               std::size_t frames, std::uint64_t seed = 0x9e0be);

/// Translation-invariant static features of 16x16 frames: the 64 largest
/// pixel values in decreasing order, averaged over each sequence.
Tensor<double> sorted_intensity_features(const Tensor<double>& frames, std::size_t frames_per_seq);

/// Per-sequence mean frame.
Tensor<double> mean_frame_features(const Tensor<double>& frames, std::size_t frames_per_seq);

/// (static sources [P*V x D], dynamics sources) -> raw outputs [P*V x D].
using SwapFn = std::function<Tensor<double>(const Tensor<double>&, const Tensor<double>&)>;

struct SwapScores {
  double static_accuracy;   // output static label == static source label
  double static_leak;       // output static label == dynamics source label
  double dynamic_r;         // track correlation with the dynamics source
  double dynamic_leak_r;    // track correlation with the static source
  std::vector<int> predicted;
  Tensor<double> tracks;

  MetricsReport report() const;
};

SwapScores swap_preservation_scores(const data::SequenceBatch& raw_test, const PairList& pairs, const SwapFn& swap,
                                    const FactorProbe& probe);

}  // namespace seqdiff::eval
