#pragma once
// Encoder + denoiser bundle and the joint training loop.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "seqdiff/data/synthetic.hpp"
#include "seqdiff/harness/config.hpp"

namespace seqdiff::harness {

/// Owns the parameters of one autoencoder. Not copyable: layers hold handles
/// into `params`.
class Model {
 public:
  Model(const ExperimentConfig& cfg, const FrameShape& frame);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ExperimentConfig& config() const { return cfg_; }
  const FrameShape& frame() const { return frame_; }
  nn::ParamSet<float>& params() { return params_; }
  const nn::ParamSet<float>& params() const { return params_; }
  const encoder::SequentialEncoder<float>& encoder() const { return enc_; }
  const denoiser::DenoiserNet<float>& net() const { return net_; }
  const denoiser::NetworkDenoiser<float>& denoiser() const { return *den_; }

  /// Pipeline with the configured schedule; `frames` is V.
  sampler::Pipeline<float> pipeline(std::size_t frames) const;
  sampler::Pipeline<float> pipeline(std::size_t frames, const diffusion::SigmaSchedule& s) const;

  /// Joint loss for one batch [B*V x D] (normalized float frames): encodes the
  /// clean batch, draws one σ and one noise vector per frame, and averages the
  /// denoising objective over frames.
  ag::Var<float> batch_loss(const Tensor<float>& x, std::size_t frames, Rng& rng) const;

 private:
  ExperimentConfig cfg_;
  FrameShape frame_;
  nn::ParamSet<float> params_;
  encoder::SequentialEncoder<float> enc_;
  denoiser::DenoiserNet<float> net_;
  std::unique_ptr<denoiser::NetworkDenoiser<float>> den_;
};

struct TrainState {
  nn::AdamW<float> opt;
  Rng rng{0};
  std::size_t step = 0;
  std::vector<double> losses;
};

/// Learning rate at `step`: linear warmup then cosine decay to
/// lr * final_lr_fraction at optim.steps.
double learning_rate(const OptimSpec& o, std::size_t step);

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_gradients(nn::ParamSet<float>& ps, double max_norm);

TrainState make_train_state(const Model& m);

/// One optimizer step on the given batch. Throws DomainError on a
/// non-finite loss. Returns the loss.
double train_step(Model& m, TrainState& st, const Tensor<float>& x, std::size_t frames);

/// Draws `batch` random sequences (with the state's rng) from a normalized
/// dataset and returns them as float frames.
Tensor<float> sample_batch(const data::SequenceBatch& normalized, std::size_t batch, Rng& rng);

using LossCallback = std::function<void(std::size_t step, double loss)>;

/// Runs optimizer steps until st.step == cfg.optim.steps.
void train_until_done(Model& m, TrainState& st, const data::SequenceBatch& normalized, const LossCallback& cb = {});

}  // namespace seqdiff::harness
