#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "seqdiff/harness/experiments.hpp"
#include "seqdiff/io/binary.hpp"

using namespace seqdiff;
using namespace seqdiff::harness;

namespace {

ExperimentConfig tiny(const std::string& gen) {
  auto c = preset(gen);
  c.seed = 3;
  c.data.train_count = 24;
  c.data.test_count = 16;
  c.data.frames = 4;
  c.model.frame_feature_dim = 16;
  c.model.hidden_dim = 16;
  c.model.static_dim = 4;
  c.model.dynamic_dim = 2;
  c.model.width = 32;
  c.model.blocks = 1;
  c.model.temb_dim = 16;
  c.model.embed_dim = 8;
  c.optim.batch = 4;
  c.optim.steps = 6;
  c.optim.warmup = 2;
  c.sampler.steps = 4;
  c.eval.pairs = 8;
  c.eval.pool = 64;
  c.eval.probe_epochs = 20;
  c.prior.net.steps = 20;
  c.prior.net.mlp_hidden = 16;
  c.prior.net.mlp_layers = 1;
  c.prior.net.time_embed_dim = 8;
  c.prior.train.iterations = 5;
  c.prior.train.batch = 8;
  c.prior.ddim_steps = 5;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("seqdiff_" + name)).string();
}

bool same_params(const Model& a, const Model& b) {
  const auto& pa = a.params().items();
  const auto& pb = b.params().items();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const auto& x = pa[i].second.value();
    const auto& y = pb[i].second.value();
    if (!x.same_shape(y) || std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) != 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("checkpoint round trip reproduces the next step bitwise") {
  const auto cfg = tiny("physio");
  const auto d = make_datasets(cfg);
  auto c = train_model(cfg, d.train);
  train_prior(c, d.train);
  const auto path = temp_path("ck.bin");
  save_checkpoint(c, path);
  auto back = load_checkpoint(path);
  CHECK(back.config().hash() == cfg.hash());
  CHECK(back.state.step == c.state.step);
  CHECK(back.state.losses == c.state.losses);
  CHECK(same_params(*back.model, *c.model));
  REQUIRE(back.prior != nullptr);
  CHECK(back.prior->losses == c.prior->losses);

  const auto normalized = data::normalize(d.train, c.normalizer);
  Rng batch_rng(11);
  const auto x = sample_batch(normalized, 4, batch_rng);
  const double l1 = train_step(*c.model, c.state, x, cfg.data.frames);
  const double l2 = train_step(*back.model, back.state, x, cfg.data.frames);
  CHECK(l1 == l2);
  CHECK(same_params(*back.model, *c.model));

  Rng r1(5), r2(5);
  const auto s1 = c.prior->prior.sample(4, 5, r1);
  const auto s2 = back.prior->prior.sample(4, 5, r2);
  CHECK(std::memcmp(s1.data(), s2.data(), s1.size() * sizeof(float)) == 0);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint version and integrity guards") {
  const auto cfg = tiny("physio");
  const auto d = make_datasets(cfg);
  auto c = new_checkpoint(cfg, d.train.shape, data::fit_normalizer(d.train));
  const auto path = temp_path("ck_bad.bin");
  save_checkpoint(c, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const std::uint32_t v = kCheckpointVersion + 1;
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  CHECK_THROWS_AS(load_checkpoint(path), io::FormatError);
  {
    std::ofstream f(path, std::ios::binary);
    f << "NOPE";
  }
  CHECK_THROWS_AS(load_checkpoint(path), io::FormatError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(train_prior(c, d.train), ContractViolation);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto cfg = tiny("speaker");
  const auto d = make_datasets(cfg);
  const auto a = train_model(cfg, d.train);
  const auto b = train_model(cfg, d.train);
  CHECK(a.state.losses == b.state.losses);
  CHECK(same_params(*a.model, *b.model));
  auto other = cfg;
  other.seed = 4;
  CHECK(train_model(other, make_datasets(other).train).state.losses != a.state.losses);
}

TEST_CASE("loss on a frozen batch and frozen noise decreases over 50 steps") {
  for (const std::string gen : {"physio", "speaker", "bouncing"}) {
    auto cfg = tiny(gen);
    cfg.optim.steps = 50;
    cfg.optim.warmup = 50;
    cfg.optim.grad_clip = 0;
    const auto d = make_datasets(cfg);
    auto c = new_checkpoint(cfg, d.train.shape, data::fit_normalizer(d.train));
    Rng pick(1);
    const auto x = sample_batch(data::normalize(d.train, c.normalizer), 4, pick);
    const Rng frozen(2);
    double prev = 1e300;
    std::size_t increases = 0;
    for (std::size_t s = 0; s < 50; ++s) {
      c.state.rng = frozen;
      const double l = train_step(*c.model, c.state, x, cfg.data.frames);
      if (!(l < prev)) ++increases;
      prev = l;
    }
    INFO(gen);
    CHECK(increases == 0);
  }
}

TEST_CASE("learning-rate schedule") {
  OptimSpec o;
  o.lr = 1e-3;
  o.warmup = 10;
  o.steps = 110;
  o.final_lr_fraction = 0.1;
  CHECK(learning_rate(o, 0) == doctest::Approx(1e-4));
  CHECK(learning_rate(o, 9) == doctest::Approx(1e-3));
  CHECK(learning_rate(o, 10) == doctest::Approx(1e-3));
  CHECK(learning_rate(o, 60) == doctest::Approx(5.5e-4));
  CHECK(learning_rate(o, 110) == doctest::Approx(1e-4));
}

TEST_CASE("eval on a random-init model completes with near-chance swap scores") {
  auto cfg = tiny("speaker");
  cfg.data.test_count = 48;
  cfg.eval.pairs = 32;
  const auto d = make_datasets(cfg);
  const auto c = new_checkpoint(cfg, d.train.shape, data::fit_normalizer(d.train));
  const auto r = eval_experiment(c, d);
  CHECK(r.text("meta.config_hash") == cfg.hash());
  CHECK(r.text("meta.seed") == "3");
  for (const auto& [k, v] : r.entries()) {
    if (k.rfind("meta.", 0) != 0) CHECK(std::isfinite(r.number(k)));
  }
  CHECK(r.number("swap.static_accuracy") < 0.3);
  CHECK(eval_experiment(c, d) == r);
}

TEST_CASE("traversal, sampling and factor latents") {
  const auto cfg = tiny("physio");
  const auto d = make_datasets(cfg);
  auto c = train_model(cfg, d.train);
  CHECK_THROWS_AS(sample_sequences(c, 2, 1), ConfigError);
  train_prior(c, d.train);
  const auto s = sample_sequences(c, 3, 1);
  CHECK(s.rows() == 3 * cfg.data.frames);
  CHECK(s.cols() == d.train.shape.dim());
  const auto t = traverse_experiment(c, d, 2, {-0.3, 0.0, 0.3});
  CHECK(t.frames.rows() == 2 * 3 * cfg.data.frames);
  CHECK(t.alpha_zero_error == 0.0);
  CHECK(t.affinity_error < 1e-8);

  const auto corr = data::gen_correlated_factors(10, 4, 1);
  const auto z = factor_latents(corr, 2);
  CHECK(z.cols() == 1 + 4 * data::kPhysioTrend);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(std::abs(z(i, 0) - (corr.labels->static_label[i] == 1 ? 1.0 : -1.0)) < 0.5);
    CHECK(z(i, 1) == static_cast<float>(corr.labels->dynamic_track(i * 4, 0)));
  }
}
