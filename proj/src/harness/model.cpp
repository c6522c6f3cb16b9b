#include "seqdiff/harness/model.hpp"

#include <cmath>
#include <numbers>

namespace seqdiff::harness {

Model::Model(const ExperimentConfig& cfg, const FrameShape& frame) : cfg_(cfg), frame_(frame) {
  cfg.validate();
  Rng rng = Rng::stream(cfg.seed, 0x1417);
  enc_ = encoder::SequentialEncoder<float>(params_, "enc", cfg.encoder_config(frame), rng);
  net_ = denoiser::DenoiserNet<float>(params_, "den", cfg.denoiser_config(frame), rng);
  den_ = std::make_unique<denoiser::NetworkDenoiser<float>>(net_, cfg.diffusion);
}

sampler::Pipeline<float> Model::pipeline(std::size_t frames) const { return pipeline(frames, cfg_.schedule()); }

sampler::Pipeline<float> Model::pipeline(std::size_t frames, const diffusion::SigmaSchedule& s) const {
  return sampler::Pipeline<float>{&enc_, den_.get(), s, frames};
}

ag::Var<float> Model::batch_loss(const Tensor<float>& x, std::size_t frames, Rng& rng) const {
  const auto z = enc_.encode(ag::Var<float>::constant(x), frames);
  const auto cond = z.conditioning();
  std::vector<double> sigma(x.rows());
  for (auto& s : sigma) s = diffusion::sample_training_sigma(cfg_.diffusion, rng);
  Tensor<float> noise(x.rows(), x.cols());
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = static_cast<float>(rng.normal());
  diffusion::RawNet<float> raw = [&](const ag::Var<float>& in, const std::vector<float>& c_noise) {
    return net_(in, c_noise, cond);
  };
  return diffusion::training_loss(x, sigma, noise, raw, cfg_.diffusion);
}

double learning_rate(const OptimSpec& o, std::size_t step) {
  if (step < o.warmup) return o.lr * static_cast<double>(step + 1) / static_cast<double>(o.warmup);
  const double span = static_cast<double>(std::max<std::size_t>(1, o.steps - std::min(o.steps, o.warmup)));
  const double u = std::min(1.0, static_cast<double>(step - o.warmup) / span);
  const double lo = o.lr * o.final_lr_fraction;
  return lo + 0.5 * (o.lr - lo) * (1.0 + std::cos(std::numbers::pi * u));
}

double clip_gradients(nn::ParamSet<float>& ps, double max_norm) {
  double sq = 0;
  for (const auto& [_, v] : ps.items()) {
    const auto& g = v.grad();
    for (std::size_t i = 0; i < g.size(); ++i) sq += static_cast<double>(g[i]) * g[i];
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const float s = static_cast<float>(max_norm / norm);
    for (const auto& [_, v] : ps.items()) {
      if (v.grad().empty()) continue;
      auto handle = v;
      auto& g = handle.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
    }
  }
  return norm;
}

TrainState make_train_state(const Model& m) {
  TrainState st;
  const auto& o = m.config().optim;
  st.opt = nn::AdamW<float>(m.params(), nn::AdamWConfig{o.lr, 0.9, 0.999, 1e-8, o.weight_decay});
  st.rng = Rng::stream(m.config().seed, 0x7a1);
  return st;
}

double train_step(Model& m, TrainState& st, const Tensor<float>& x, std::size_t frames) {
  m.params().zero_grad();
  auto loss = m.batch_loss(x, frames, st.rng);
  const double lv = static_cast<double>(loss.value()[0]);
  if (!std::isfinite(lv)) {
    throw DomainError("training: non-finite loss at step " + std::to_string(st.step));
  }
  ag::backward(loss);
  clip_gradients(m.params(), m.config().optim.grad_clip);
  st.opt.set_lr(learning_rate(m.config().optim, st.step));
  st.opt.step();
  ++st.step;
  st.losses.push_back(lv);
  return lv;
}

Tensor<float> sample_batch(const data::SequenceBatch& normalized, std::size_t batch, Rng& rng) {
  const std::size_t v = normalized.length, d = normalized.shape.dim();
  Tensor<float> x(batch * v, d);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t i = rng.index(normalized.count);
    for (std::size_t r = 0; r < v; ++r) {
      const double* src = normalized.frames.row(i * v + r);
      float* dst = x.row(b * v + r);
      for (std::size_t j = 0; j < d; ++j) dst[j] = static_cast<float>(src[j]);
    }
  }
  return x;
}

void train_until_done(Model& m, TrainState& st, const data::SequenceBatch& normalized, const LossCallback& cb) {
  const std::size_t b = std::min(m.config().optim.batch, normalized.count);
  while (st.step < m.config().optim.steps) {
    const auto x = sample_batch(normalized, b, st.rng);
    const double lv = train_step(m, st, x, normalized.length);
    if (cb) cb(st.step, lv);
  }
}

}  // namespace seqdiff::harness
