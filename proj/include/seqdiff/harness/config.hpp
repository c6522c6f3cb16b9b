#pragma once
// Experiment configuration and its text format.
//
// One `key = value` pair per line; keys are dotted (`encoder.static_dim`).
// Blank lines and lines starting with '#' are ignored. Every key has a fixed
// type (integer, real, bool, string); unknown keys and malformed values are
// errors. Reals are written with 17 significant digits so files round-trip
// exactly.

#include <cstdint>
#include <string>

#include "seqdiff/denoiser/denoiser.hpp"
#include "seqdiff/diffusion/core.hpp"
#include "seqdiff/encoder/encoder.hpp"
#include "seqdiff/prior/latent_prior.hpp"
#include "seqdiff/sampler/samplers.hpp"

namespace seqdiff::harness {

struct DataSpec {
  std::string generator = "bouncing";
  std::size_t train_count = 512;
  std::size_t test_count = 128;
  std::size_t frames = 8;
  std::uint64_t world_seed = 0;
};

struct ModelSpec {
  encoder::FrameBackbone encoder_backbone = encoder::FrameBackbone::conv;
  std::size_t frame_feature_dim = 128;
  std::size_t hidden_dim = 128;
  std::size_t static_dim = 16;
  std::size_t dynamic_dim = 2;
  bool share_static = true;
  denoiser::Backbone denoiser_backbone = denoiser::Backbone::mlp;
  std::size_t width = 256;
  std::size_t blocks = 3;
  std::size_t base_channels = 16;
  std::size_t groups = 8;
  std::size_t embed_dim = 32;
  std::size_t temb_dim = 64;
};

struct SamplerSpec {
  std::size_t steps = 32;
  diffusion::ChurnConfig churn{};
  sampler::SwapEncoding swap_encoding = sampler::SwapEncoding::own;
};

struct OptimSpec {
  double lr = 1e-3;
  double weight_decay = 1e-5;
  std::size_t batch = 16;
  std::size_t steps = 4000;
  std::size_t warmup = 100;
  /// Cosine decay to this fraction of lr over `steps`; 1 keeps lr constant.
  double final_lr_fraction = 0.1;
  double grad_clip = 1.0;
};

struct PriorSpec {
  prior::LatentPriorConfig net{};
  prior::PriorTrainConfig train{};
  std::size_t ddim_steps = 50;
};

struct EvalSpec {
  std::size_t pairs = 128;
  std::uint64_t pair_seed = 7;
  double kappa = 0.3;
  std::size_t pool = 32768;
  std::string dynamic_pooling = "mean";
  std::size_t probe_epochs = 300;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DataSpec data;
  ModelSpec model;
  diffusion::DenoiserConfig diffusion;
  SamplerSpec sampler;
  OptimSpec optim;
  PriorSpec prior;
  EvalSpec eval;

  /// Cross-module consistency (encoder against denoiser, sampler, pairs).
  /// Throws ConfigError.
  void validate() const;

  std::string to_text() const;
  static ExperimentConfig from_text(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;

  /// FNV-1a of the canonical text form, hex.
  std::string hash() const;

  /// Applies one `key=value` override.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  encoder::EncoderConfig encoder_config(const FrameShape& frame) const;
  denoiser::DenoiserNetConfig denoiser_config(const FrameShape& frame) const;
  diffusion::SigmaSchedule schedule() const;
};

/// Defaults tuned per synthetic generator (frame backbone, factor sizes,
/// training length).
ExperimentConfig preset(const std::string& generator);

}  // namespace seqdiff::harness
