#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "seqdiff/encoder/encoder.hpp"

using namespace seqdiff;
using namespace seqdiff::encoder;
using ag::Var;
using testutil::randn;

namespace {

EncoderConfig vector_cfg() {
  EncoderConfig c;
  c.frame = FrameShape{7, 1, 1};
  c.frame_feature_dim = 12;
  c.hidden_dim = 10;
  c.static_dim = 6;
  c.dynamic_dim = 3;
  return c;
}

EncoderConfig image_cfg() {
  EncoderConfig c;
  c.frame = FrameShape{1, 16, 16};
  c.backbone = FrameBackbone::conv;
  c.frame_feature_dim = 12;
  c.hidden_dim = 10;
  c.static_dim = 6;
  c.dynamic_dim = 3;
  return c;
}

}  // namespace

TEST_CASE("encoder output shapes and determinism") {
  for (const auto& cfg : {vector_cfg(), image_cfg()}) {
    Rng rng(1);
    nn::ParamSet<double> ps;
    SequentialEncoder<double> enc(ps, "enc", cfg, rng);
    const std::size_t b = 3, v = 5;
    const auto x = randn(b * v, cfg.frame.dim(), rng);
    auto z1 = enc.encode_values(x, v);
    auto z2 = enc.encode_values(x, v);
    CHECK(z1.stat.rows() == b);
    CHECK(z1.stat.cols() == cfg.static_dim);
    CHECK(z1.dyn.rows() == b * v);
    CHECK(z1.dyn.cols() == cfg.dynamic_dim);
    CHECK(z1.stat == z2.stat);
    CHECK(z1.dyn == z2.dyn);
    CHECK(z1.conditioning().cols() == cfg.static_dim + cfg.dynamic_dim);
  }
}

TEST_CASE("dynamic codes are causal, exactly") {
  Rng rng(2);
  nn::ParamSet<double> ps;
  SequentialEncoder<double> enc(ps, "enc", vector_cfg(), rng);
  const std::size_t v = 6;
  const auto x = randn(v, 7, rng);
  const auto base = enc.encode_values(x, v);
  for (std::size_t cut = 1; cut < v; ++cut) {
    auto y = x;
    for (std::size_t t = cut; t < v; ++t) {
      for (std::size_t j = 0; j < 7; ++j) y(t, j) += rng.normal();
    }
    const auto z = enc.encode_values(y, v);
    for (std::size_t t = 0; t < cut; ++t) {
      for (std::size_t j = 0; j < 3; ++j) CHECK(z.dyn(t, j) == base.dyn(t, j));
    }
    bool changed = false;
    for (std::size_t j = 0; j < 3; ++j) changed |= z.dyn(cut, j) != base.dyn(cut, j);
    CHECK(changed);
  }
}

TEST_CASE("static code depends on every frame") {
  Rng rng(3);
  nn::ParamSet<double> ps;
  SequentialEncoder<double> enc(ps, "enc", vector_cfg(), rng);
  const std::size_t v = 5;
  const auto x = randn(v, 7, rng);
  const auto base = enc.encode_values(x, v);
  for (std::size_t t = 0; t < v; ++t) {
    auto y = x;
    y(t, 2) += 0.3;
    CHECK(!(enc.encode_values(y, v).stat == base.stat));
  }
}

TEST_CASE("sequences in a batch do not interact") {
  Rng rng(4);
  nn::ParamSet<double> ps;
  SequentialEncoder<double> enc(ps, "enc", vector_cfg(), rng);
  const std::size_t v = 4;
  const auto x = randn(2 * v, 7, rng);
  const auto joint = enc.encode_values(x, v);
  Tensor<double> second(v, 7);
  for (std::size_t t = 0; t < v; ++t) {
    for (std::size_t j = 0; j < 7; ++j) second(t, j) = x(v + t, j);
  }
  const auto alone = enc.encode_values(second, v);
  for (std::size_t j = 0; j < 6; ++j) CHECK(alone.stat(0, j) == joint.stat(1, j));
}

TEST_CASE("static sharing switch") {
  auto cfg = vector_cfg();
  cfg.share_static = false;
  Rng rng(5);
  nn::ParamSet<double> ps;
  SequentialEncoder<double> enc(ps, "enc", cfg, rng);
  const auto x = randn(2 * 3, 7, rng);
  auto z = enc.encode(Var<double>::constant(x), 3);
  CHECK(z.stat.rows() == 6);
  const auto vals = enc.encode_values(x, 3);
  CHECK(!vals.shared());
  CHECK(vals.stat.rows() == 2);
  CHECK(vals.conditioning() == z.conditioning().value());
}

TEST_CASE("encoder config validation") {
  auto cfg = vector_cfg();
  cfg.dynamic_dim = 7;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = vector_cfg();
  cfg.backbone = FrameBackbone::conv;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  Rng rng(6);
  nn::ParamSet<double> ps;
  SequentialEncoder<double> enc(ps, "enc", vector_cfg(), rng);
  CHECK_THROWS_AS(enc.encode_values(Tensor<double>(5, 7), 2), ContractViolation);
  CHECK_THROWS_AS(enc.encode_values(Tensor<double>(4, 7), 0), ContractViolation);
}

TEST_CASE("encoder gradient") {
  auto cfg = vector_cfg();
  cfg.frame = FrameShape{3, 1, 1};
  cfg.frame_feature_dim = 4;
  cfg.hidden_dim = 3;
  cfg.static_dim = 2;
  cfg.dynamic_dim = 1;
  Rng rng(7);
  nn::ParamSet<double> ps;
  SequentialEncoder<double> enc(ps, "enc", cfg, rng);
  auto f = [&](const std::vector<Var<double>>& v) { return testutil::probe(enc.encode(v[0], 3).conditioning()); };
  CHECK(testutil::gradcheck(f, {randn(6, 3, rng)}) < 1e-6);
}

TEST_CASE("stochastic latent noise statistics") {
  Rng rng(8);
  const Tensor<double> x0(1000, 100, 0.25);
  const double sigma = 0.3;
  const auto xt = encode_stochastic_latent(x0, sigma, rng);
  double m = 0, s = 0;
  for (std::size_t i = 0; i < xt.size(); ++i) m += xt[i] - x0[i];
  m /= xt.size();
  for (std::size_t i = 0; i < xt.size(); ++i) s += (xt[i] - x0[i] - m) * (xt[i] - x0[i] - m);
  s = std::sqrt(s / xt.size());
  CHECK(std::abs(s / sigma - 1.0) < 0.02);
  CHECK(std::abs(m) < 3.0 * sigma / std::sqrt(static_cast<double>(xt.size())));

  const Tensor<double> one(1, 50, 1.0);
  const auto tiny = encode_stochastic_latent(one, 1e-9, rng);
  double nrm = 0;
  for (std::size_t i = 0; i < 50; ++i) nrm += (tiny[i] - 1.0) * (tiny[i] - 1.0);
  CHECK(std::sqrt(nrm) <= 6e-9 * std::sqrt(50.0));
  CHECK_THROWS_AS(encode_stochastic_latent(one, 0.0, rng), DomainError);
}
