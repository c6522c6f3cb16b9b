#include "seqdiff/harness/experiments.hpp"

#include <algorithm>
#include <cmath>

#include "seqdiff/eval/metrics.hpp"
#include "seqdiff/eval/probes.hpp"

namespace seqdiff::harness {

namespace {

// Stream tags for seed derivation.
constexpr std::uint64_t kDataTag = 0xda7a;
constexpr std::uint64_t kEvalTag = 0xe7a1;
constexpr std::uint64_t kPriorTag = 0x9a1;
constexpr std::uint64_t kCompareTag = 0xc0a9;

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t i) {
  return Rng::stream(seed, tag, i).next_u64();
}

const data::FactorLabels& labels_of(const data::SequenceBatch& b) {
  return b.require_labels();
}

Tensor<double> to_double(const Tensor<float>& t) { return t.cast<double>(); }

}  // namespace

Datasets make_datasets(const ExperimentConfig& cfg) {
  const data::WorldParams w{cfg.data.world_seed};
  Datasets d;
  d.train = data::generate(cfg.data.generator, cfg.data.train_count, cfg.data.frames,
                           derived_seed(cfg.seed, kDataTag, 0), w);
  d.test = data::generate(cfg.data.generator, cfg.data.test_count, cfg.data.frames,
                          derived_seed(cfg.seed, kDataTag, 1), w);
  return d;
}

Checkpoint train_model(const ExperimentConfig& cfg, const data::SequenceBatch& train_raw, const LossCallback& on_loss) {
  require(train_raw.length == cfg.data.frames, "train: dataset V differs from data.frames");
  Checkpoint c = new_checkpoint(cfg, train_raw.shape, data::fit_normalizer(train_raw));
  continue_training(c, train_raw, on_loss);
  return c;
}

void continue_training(Checkpoint& c, const data::SequenceBatch& train_raw, const LossCallback& on_loss) {
  require(train_raw.shape == c.model->frame(), "train: dataset frame shape differs from the model");
  const auto normalized = data::normalize(train_raw, c.normalizer);
  train_until_done(*c.model, c.state, normalized, on_loss);
}

Tensor<float> to_model(const Checkpoint& c, const Tensor<double>& raw_frames) {
  return data::normalize_frames(raw_frames, c.model->frame(), c.normalizer).cast<float>();
}

Tensor<double> to_raw(const Checkpoint& c, const Tensor<float>& model_frames) {
  return data::denormalize_frames(model_frames.cast<double>(), c.model->frame(), c.normalizer);
}

Tensor<float> latent_pool(const Checkpoint& c, const data::SequenceBatch& raw) {
  require(c.config().model.share_static, "latent pool: the prior needs one static code per sequence");
  const auto z = c.model->encoder().encode_values(to_model(c, raw.frames), raw.length);
  return prior::flatten_latents(z);
}

void train_prior(Checkpoint& c, const data::SequenceBatch& train_raw, const LossCallback& on_loss) {
  require(c.state.step > 0, "train-prior: the checkpoint has no trained main model");
  const auto pool = latent_pool(c, train_raw);
  auto pc = c.config().prior.net;
  pc.joint_dim = pool.cols();
  auto ps = std::make_unique<PriorState>();
  Rng rng = Rng::stream(c.config().seed, kPriorTag);
  ps->prior.init(pc, "prior", rng);
  ps->prior.train(pool, c.config().prior.train, rng, [&](std::size_t it, double l) {
    ps->losses.push_back(l);
    if (on_loss) on_loss(it + 1, l);
  });
  c.prior = std::move(ps);
}

Reconstruction reconstruct_batch(const Checkpoint& c, const data::SequenceBatch& raw, std::uint64_t seed) {
  Reconstruction r;
  r.input = to_model(c, raw.frames);
  r.output = sampler::reconstruct(c.model->pipeline(raw.length), r.input, seed);
  r.mse = eval::mean_squared_error(to_double(r.output), to_double(r.input));
  return r;
}

eval::SwapFn swap_function(const Checkpoint& c, std::size_t frames, std::uint64_t seed,
                           std::optional<sampler::SwapEncoding> mode_override) {
  const auto p = c.model->pipeline(frames);
  const auto mode = mode_override.value_or(c.config().sampler.swap_encoding);
  return [&c, p, mode, seed](const Tensor<double>& a, const Tensor<double>& b) {
    return to_raw(c, sampler::conditional_swap(p, to_model(c, a), to_model(c, b), seed, mode));
  };
}

std::uint64_t swap_seed(const ExperimentConfig& cfg) { return derived_seed(cfg.seed, kEvalTag, 1); }

eval::SwapScores swap_experiment(const Checkpoint& c, const data::SequenceBatch& test_raw,
                                 std::optional<sampler::SwapEncoding> mode) {
  const auto& cfg = c.config();
  const auto pairs = eval::make_pair_list(labels_of(test_raw), cfg.eval.pairs, cfg.eval.pair_seed);
  const auto probe = eval::make_factor_probe(cfg.data.generator, data::WorldParams{cfg.data.world_seed}, test_raw.length);
  return eval::swap_preservation_scores(test_raw, pairs,
                                        swap_function(c, test_raw.length, swap_seed(cfg), mode), *probe);
}

Tensor<double> sample_sequences(const Checkpoint& c, std::size_t n, std::uint64_t seed) {
  if (!c.prior) throw ConfigError("sample: the checkpoint has no latent prior (run train-prior first)");
  const auto& cfg = c.config();
  const std::size_t v = cfg.data.frames;
  Rng rng(seed);
  const auto flat = c.prior->prior.sample(n, cfg.prior.ddim_steps, rng);
  const auto z = prior::unflatten_latents(flat, cfg.model.static_dim, cfg.model.dynamic_dim, v);
  const auto p = c.model->pipeline(v);
  return to_raw(c, sampler::decode<float>(p, z.conditioning(), nullptr, nullptr, c.model->frame().dim(), seed));
}

TraversalResult traverse_experiment(const Checkpoint& c, const Datasets& d, std::size_t components,
                                    const std::vector<double>& alphas) {
  const auto& cfg = c.config();
  const std::size_t h = cfg.model.static_dim, v = d.test.length;
  Tensor<double> pool;
  if (c.prior) {
    Rng rng = Rng::stream(cfg.seed, kEvalTag, 2);
    const auto flat = c.prior->prior.sample(cfg.eval.pool, cfg.prior.ddim_steps, rng);
    pool = Tensor<double>(flat.rows(), h);
    for (std::size_t r = 0; r < flat.rows(); ++r) {
      for (std::size_t j = 0; j < h; ++j) pool(r, j) = flat(r, j);
    }
  } else {
    pool = to_double(c.model->encoder().encode_values(to_model(c, d.train.frames), v).stat);
  }
  TraversalResult out;
  out.spec = eval::fit_traversal(pool, cfg.eval.kappa);
  out.alphas = alphas;
  out.components = std::min(components, h);

  const double a = cfg.eval.kappa / 3, b = cfg.eval.kappa / 2;
  for (std::size_t r = 0; r < std::min<std::size_t>(pool.rows(), 64); ++r) {
    const std::vector<double> s(pool.row(r), pool.row(r) + h);
    for (std::size_t i = 0; i < out.components; ++i) {
      const auto e0 = eval::pca_traverse(s, out.spec, i, 0.0);
      const auto ea = eval::pca_traverse(s, out.spec, i, a);
      const auto eb = eval::pca_traverse(s, out.spec, i, b);
      const auto eab = eval::pca_traverse(s, out.spec, i, a + b);
      for (std::size_t j = 0; j < h; ++j) {
        out.alpha_zero_error = std::max(out.alpha_zero_error, std::abs(e0[j] - s[j]));
        out.affinity_error = std::max(out.affinity_error, std::abs(eab[j] - ea[j] - eb[j] + s[j]));
      }
    }
  }

  const auto first = d.test.select({0});
  const auto x = to_model(c, first.frames);
  const auto z = c.model->encoder().encode_values(x, v);
  const Tensor<float> own = z.conditioning();
  const std::vector<double> s0(z.stat.row(0), z.stat.row(0) + h);
  const auto p = c.model->pipeline(v);
  const std::uint64_t seed = derived_seed(cfg.seed, kEvalTag, 3);
  out.frames = Tensor<double>(out.components * alphas.size() * v, x.cols());
  std::size_t block = 0;
  for (std::size_t i = 0; i < out.components; ++i) {
    for (const double alpha : alphas) {
      const auto edited = eval::pca_traverse(s0, out.spec, i, alpha);
      auto zi = z;
      for (std::size_t j = 0; j < h; ++j) zi.stat(0, j) = static_cast<float>(edited[j]);
      const auto y = to_raw(c, sampler::decode(p, zi.conditioning(), &x, &own, x.cols(), seed));
      std::copy(y.data(), y.data() + y.size(), out.frames.row(block * v));
      ++block;
    }
  }
  return out;
}

namespace {

struct Codes {
  Tensor<double> stat;
  Tensor<double> dyn;  // pooled per sequence
};

Codes encode_codes(const Checkpoint& c, const data::SequenceBatch& raw) {
  const auto z = c.model->encoder().encode_values(to_model(c, raw.frames), raw.length);
  return Codes{to_double(z.stat), eval::pool_dynamic(to_double(z.dyn), raw.length, c.config().eval.dynamic_pooling)};
}

void probe_block(eval::MetricsReport& r, const std::string& prefix, const Tensor<double>& train_x,
                 const Tensor<double>& test_x, const data::FactorLabels& train_l, const data::FactorLabels& test_l,
                 std::size_t epochs) {
  eval::SoftmaxProbe p;
  eval::SoftmaxProbeConfig pc;
  pc.epochs = epochs;
  p.fit(train_x, train_l.static_label, train_l.static_classes, pc);
  r.set(prefix + ".accuracy", eval::accuracy(p.predict(test_x), test_l.static_label));
  if (train_l.static_classes == 2) {
    const auto prob = p.probabilities(test_x);
    std::vector<double> score(test_x.rows());
    for (std::size_t i = 0; i < score.size(); ++i) score[i] = prob(static_cast<Eigen::Index>(i), 1);
    r.set(prefix + ".auroc", eval::auroc(score, test_l.static_label));
    r.set(prefix + ".auprc", eval::auprc(score, test_l.static_label));
  }
  if (!train_l.target.empty() && !test_l.target.empty()) {
    Tensor<double> ty(train_l.target.size(), 1, train_l.target);
    eval::RidgeProbe rp;
    rp.fit(train_x, ty);
    const auto yh = rp.predict(test_x);
    double mae = 0;
    for (std::size_t i = 0; i < test_l.target.size(); ++i) mae += std::abs(yh(i, 0) - test_l.target[i]);
    r.set(prefix + ".target_mae", mae / test_l.target.size());
  }
}

}  // namespace

eval::MetricsReport downstream_probes(const Checkpoint& c, const Datasets& d) {
  const auto& tl = labels_of(d.train);
  const auto& el = labels_of(d.test);
  const auto tr = encode_codes(c, d.train), te = encode_codes(c, d.test);
  eval::MetricsReport r;
  const std::size_t epochs = c.config().eval.probe_epochs;
  probe_block(r, "static", tr.stat, te.stat, tl, el, epochs);
  probe_block(r, "dynamic", tr.dyn, te.dyn, tl, el, epochs);
  r.set("accuracy_gap", r.number("static.accuracy") - r.number("dynamic.accuracy"));
  return r;
}

eval::GapResult gap_experiment(const Checkpoint& c, const data::SequenceBatch& test_raw) {
  const auto codes = encode_codes(c, test_raw);
  return eval::disentanglement_gap(codes.stat, codes.dyn, labels_of(test_raw).static_label);
}

eval::MetricsReport eval_experiment(const Checkpoint& c, const Datasets& d) {
  const auto& cfg = c.config();
  eval::MetricsReport r;
  r.set_text("meta.seed", std::to_string(cfg.seed));
  r.set_text("meta.config_hash", cfg.hash());
  r.set_text("meta.generator", cfg.data.generator);
  r.set("meta.train_steps", static_cast<double>(c.state.step));
  r.set("recon.mse", reconstruct_batch(c, d.test, derived_seed(cfg.seed, kEvalTag, 0)).mse);
  r.merge("swap", swap_experiment(c, d.test).report());
  const auto g = gap_experiment(c, d.test);
  r.set("gap.static_eer", g.static_eer);
  r.set("gap.dynamic_eer", g.dynamic_eer);
  r.set("gap.gap", g.gap);
  r.merge("probe", downstream_probes(c, d));
  return r;
}

Tensor<float> factor_latents(const data::SequenceBatch& correlated, std::uint64_t seed) {
  const auto& l = labels_of(correlated);
  const std::size_t v = correlated.length, q = l.dynamic_track.cols();
  Tensor<float> out(correlated.count, 1 + v * q);
  for (std::size_t i = 0; i < correlated.count; ++i) {
    Rng rng = Rng::stream(seed, i, 0x57a7);
    out(i, 0) = static_cast<float>((l.static_label[i] == 1 ? 1.0 : -1.0) + 0.1 * rng.normal());
    for (std::size_t t = 0; t < v; ++t) {
      for (std::size_t j = 0; j < q; ++j) out(i, 1 + t * q + j) = static_cast<float>(l.dynamic_track(i * v + t, j));
    }
  }
  return out;
}

eval::MetricsReport PriorComparison::report() const {
  eval::MetricsReport r;
  for (std::size_t i = 0; i < dependent.size(); ++i) {
    r.set("seed" + std::to_string(i) + ".dependent", dependent[i]);
    r.set("seed" + std::to_string(i) + ".independent", independent[i]);
  }
  double md = 0, mi = 0;
  for (std::size_t i = 0; i < dependent.size(); ++i) {
    md += dependent[i] / dependent.size();
    mi += independent[i] / independent.size();
  }
  r.set("mean.dependent", md);
  r.set("mean.independent", mi);
  r.set("dependent_wins", static_cast<double>(dependent_wins));
  r.set("seeds", static_cast<double>(dependent.size()));
  return r;
}

PriorComparison compare_priors(const ExperimentConfig& cfg, std::size_t seeds) {
  require(seeds > 0, "compare-priors: needs at least one seed");
  const data::WorldParams w{cfg.data.world_seed};
  const std::size_t v = cfg.data.frames;
  PriorComparison out;
  for (std::size_t s = 0; s < seeds; ++s) {
    const auto train = data::gen_correlated_factors(cfg.data.train_count, v, derived_seed(cfg.seed, kCompareTag, 2 * s), w);
    const auto test = data::gen_correlated_factors(cfg.data.test_count, v, derived_seed(cfg.seed, kCompareTag, 2 * s + 1), w);
    const auto pool = factor_latents(train, derived_seed(cfg.seed, kCompareTag, 100 + s));
    const auto held = to_double(factor_latents(test, derived_seed(cfg.seed, kCompareTag, 200 + s)));
    auto pc = cfg.prior.net;
    pc.joint_dim = pool.cols();
    Rng rng = Rng::stream(cfg.seed, kCompareTag, 300 + s);
    prior::DdimPrior<float> joint;
    joint.init(pc, "prior", rng);
    joint.train(pool, cfg.prior.train, rng);
    prior::IndependentPrior<float> split;
    split.init(pc, 1, rng);
    split.train(pool, cfg.prior.train, rng);
    const std::size_t n = held.rows();
    const double ed = eval::energy_distance(to_double(joint.sample(n, cfg.prior.ddim_steps, rng)), held);
    const double ei = eval::energy_distance(to_double(split.sample(n, cfg.prior.ddim_steps, rng)), held);
    out.dependent.push_back(ed);
    out.independent.push_back(ei);
    if (ed < ei) ++out.dependent_wins;
  }
  return out;
}

std::vector<AblationCell> ablate(const ExperimentConfig& cfg, const std::vector<std::size_t>& dynamic_dims,
                                 const std::function<void(const AblationCell&)>& on_cell) {
  require(!dynamic_dims.empty(), "ablate: needs at least one dynamic_dim");
  const auto d = make_datasets(cfg);
  std::vector<AblationCell> cells;
  for (const bool share : {true, false}) {
    for (const std::size_t k : dynamic_dims) {
      auto c = cfg;
      c.model.share_static = share;
      c.model.dynamic_dim = k;
      c.validate();
      const auto ck = train_model(c, d.train);
      AblationCell cell{share, k, swap_experiment(ck, d.test), 0.0};
      cell.combined = cell.scores.static_accuracy + cell.scores.dynamic_r;
      if (on_cell) on_cell(cell);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

eval::MetricsReport ablation_report(const std::vector<AblationCell>& cells) {
  eval::MetricsReport r;
  for (const auto& c : cells) {
    const std::string p = std::string(c.share_static ? "shared" : "per_frame") + ".k" + std::to_string(c.dynamic_dim);
    r.set(p + ".static_accuracy", c.scores.static_accuracy);
    r.set(p + ".dynamic_r", c.scores.dynamic_r);
    r.set(p + ".combined", c.combined);
  }
  return r;
}

}  // namespace seqdiff::harness
