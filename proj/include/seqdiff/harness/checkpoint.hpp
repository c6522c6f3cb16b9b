#pragma once
// Training checkpoints. Layout (little-endian, see io/binary.hpp):
//   "SQCK" | u32 version | str config text | str config hash
//   u64 C | u64 H | u64 W | normalizer | u64 step | str rng | f64 array losses
//   u64 P, then P x (str name | f32 tensor value)
//   u64 adam steps, then P x (f32 tensor m | f32 tensor v)
//   u8 has_prior, then if set:
//   prior config | f64 array mean | f64 array scale | f64 array losses
//   u64 Q, then Q x (str name | f32 tensor value)
// An array is u64 length followed by values.

#include <memory>
#include <string>
#include <vector>

#include "seqdiff/harness/model.hpp"

namespace seqdiff::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct PriorState {
  prior::DdimPrior<float> prior;
  std::vector<double> losses;
};

/// Everything needed to resume training or run experiments.
struct Checkpoint {
  std::unique_ptr<Model> model;
  TrainState state;
  data::NormalizerStats normalizer;
  std::unique_ptr<PriorState> prior;

  const ExperimentConfig& config() const { return model->config(); }
};

/// Fresh model and optimizer state for `cfg` on frames of `frame` shape.
Checkpoint new_checkpoint(const ExperimentConfig& cfg, const FrameShape& frame, data::NormalizerStats normalizer);

void save_checkpoint(const Checkpoint& c, const std::string& path);

/// Throws io::FormatError on a bad magic, a version other than
/// kCheckpointVersion, a config whose hash does not match, or parameter
/// names and shapes that disagree with the rebuilt model.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace seqdiff::harness
