#pragma once
// Factor-labeled toy sequence generators, the dataset normalizer and the
// codec seam for a learned frame compressor.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqdiff/frame.hpp"
#include "seqdiff/random.hpp"
#include "seqdiff/tensor.hpp"

namespace seqdiff::data {

/// Ground-truth factors, present only for generated data.
struct FactorLabels {
  std::vector<int> static_label;   // one per sequence
  std::size_t static_classes = 0;
  Tensor<double> dynamic_track;    // [n*V x q], one row per frame
  std::vector<double> target;      // per-sequence regression target; may be empty
};

/// n sequences of V frames stored as [n*V x D], rows ordered i * V + τ.
struct SequenceBatch {
  std::string generator;
  std::uint64_t seed = 0;
  FrameShape shape;
  std::size_t count = 0;
  std::size_t length = 0;
  Tensor<double> frames;
  std::optional<FactorLabels> labels;

  Modality modality() const { return shape.is_image() ? Modality::image : Modality::vector; }
  /// Checks row counts, label sizes and finiteness. Throws ContractViolation.
  void validate() const;
  /// Sequences `idx` in the given order, labels included.
  SequenceBatch select(const std::vector<std::size_t>& idx) const;
  /// First `n` sequences and the rest.
  std::pair<SequenceBatch, SequenceBatch> split(std::size_t n) const;
  const FactorLabels& require_labels() const;
};

/// Parameters fixed across every split drawn from one synthetic world.
struct WorldParams {
  std::uint64_t world_seed = 0;
};

// ---------------------------------------------------------------- bouncing shape

inline constexpr std::size_t kShapeSize = 16;
inline constexpr std::size_t kShapeLevels = 4;
inline constexpr double kShapeHalf = 3.0;

/// Intensity of bin 0..3.
double shape_intensity(std::size_t level);

/// Renders one 16x16 frame: kind 0 is a square, 1 a disc, centre (x, y) in
/// pixel units, anti-aliased by exact-area (square) or radial ramp (disc)
/// coverage.
void render_shape(int kind, double intensity, double x, double y, double* out);

/// Static label = kind * 4 + intensity bin (8 classes); dynamic track = (x, y)
/// per frame under a constant-velocity bounce inside [h, 16 - h]^2.
SequenceBatch gen_bouncing_shape(std::size_t n, std::size_t frames, std::uint64_t seed);

/// Reflecting walk of one coordinate inside [lo, hi].
double reflect(double p, double lo, double hi);

/// Intensity-weighted centroid (x, y) of each frame; negative pixels count as 0.
Tensor<double> shape_centroids(const Tensor<double>& frames);

// ---------------------------------------------------------------- toy speaker

inline constexpr std::size_t kSpeakerDim = 80;
inline constexpr std::size_t kSpeakers = 16;
inline constexpr std::size_t kContentDim = 3;

/// Speaker envelopes [16 x 80], mutually below cosine 0.9, and the shared
/// content basis [3 x 80], both fixed by the world seed.
struct SpeakerWorld {
  Tensor<double> templates;
  Tensor<double> content_basis;
  static SpeakerWorld make(const WorldParams& w);
};

/// x^τ = template_speaker + Σ_j c_j^τ B_j + 0.02 ε (log-spectral domain, so
/// the content envelope multiplies the speaker envelope in linear scale);
/// c^τ are random sinusoids. Labels: speaker id and the content track c^τ.
SequenceBatch gen_toy_speaker(std::size_t n, std::size_t frames, std::uint64_t seed, const WorldParams& w = {});

// ---------------------------------------------------------------- toy physio

inline constexpr std::size_t kPhysioDim = 10;
inline constexpr std::size_t kPhysioTrend = 2;

struct PhysioWorld {
  Tensor<double> baselines;  // [2 x 10] class baselines
  Tensor<double> mixing;     // [10 x 2] trend loadings
  static PhysioWorld make(const WorldParams& w);
};

/// Binary class sets channel baselines; an AR(1) trend m^τ (φ = 0.9) is mixed
/// into the channels. Target = mean of the last frame's trend components.
/// With `correlated`, the trend drifts toward +0.8 or -0.8 by class, so the
/// static label and the dynamic summary are dependent.
SequenceBatch gen_toy_physio(std::size_t n, std::size_t frames, std::uint64_t seed, const WorldParams& w = {},
                             bool correlated = false);

/// The correlated-factors variant of gen_toy_physio.
SequenceBatch gen_correlated_factors(std::size_t n, std::size_t frames, std::uint64_t seed,
                                     const WorldParams& w = {});

/// Dispatch by name: "bouncing", "speaker", "physio", "correlated".
SequenceBatch generate(const std::string& name, std::size_t n, std::size_t frames, std::uint64_t seed,
                       const WorldParams& w = {});

// ---------------------------------------------------------------- normalizer

/// Per-channel shift and scale. Image channels are planes; every component of
/// a vector frame is its own channel.
struct NormalizerStats {
  std::vector<double> shift;
  std::vector<double> scale;
  double target_std = 0.5;
  std::vector<std::size_t> degenerate;  // channels left at scale 1

  std::size_t channels() const { return shift.size(); }
};

NormalizerStats fit_normalizer(const SequenceBatch& dataset, double target_std = 0.5);
SequenceBatch normalize(const SequenceBatch& batch, const NormalizerStats& stats);
SequenceBatch denormalize(const SequenceBatch& batch, const NormalizerStats& stats);
Tensor<double> normalize_frames(const Tensor<double>& frames, const FrameShape& shape, const NormalizerStats& stats);
Tensor<double> denormalize_frames(const Tensor<double>& frames, const FrameShape& shape, const NormalizerStats& stats);

// ---------------------------------------------------------------- codec seam

/// Frame-level compressor interface. Encoded frames are what the diffusion
/// model sees.
class Codec {
 public:
  virtual ~Codec() = default;
  virtual FrameShape latent_shape(const FrameShape& in) const = 0;
  virtual Tensor<double> encode(const Tensor<double>& frames) const = 0;
  virtual Tensor<double> decode(const Tensor<double>& latents) const = 0;
};

class IdentityCodec final : public Codec {
 public:
  FrameShape latent_shape(const FrameShape& in) const override { return in; }
  Tensor<double> encode(const Tensor<double>& frames) const override { return frames; }
  Tensor<double> decode(const Tensor<double>& latents) const override { return latents; }
};

}  // namespace seqdiff::data
