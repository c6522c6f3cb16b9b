#include "doctest.h"
#include "gradcheck.hpp"
#include "seqdiff/nn.hpp"

using namespace seqdiff;
using ag::Var;
using testutil::gradcheck;
using testutil::probe;
using testutil::randn;
using Vars = std::vector<Var<double>>;

TEST_CASE("linear, elementwise and reduction gradients") {
  Rng rng(1);
  CHECK(gradcheck([](const Vars& v) { return probe(ag::linear(v[0], v[1], &v[2])); },
                  {randn(4, 5, rng), randn(3, 5, rng), randn(1, 3, rng)}) < 1e-6);
  CHECK(gradcheck([](const Vars& v) { return probe(ag::mul(ag::add(v[0], v[1]), ag::sub(v[0], v[1]))); },
                  {randn(3, 4, rng), randn(3, 4, rng)}) < 1e-6);
  CHECK(gradcheck([](const Vars& v) { return probe(ag::silu(ag::scale(v[0], 1.5))); }, {randn(3, 9, rng)}) < 1e-6);
  CHECK(gradcheck([](const Vars& v) { return probe(ag::sigmoid(ag::add_scalar(v[0], 0.2))); }, {randn(2, 9, rng)}) <
        1e-6);
  CHECK(gradcheck([](const Vars& v) { return probe(ag::tanh(v[0])); }, {randn(2, 11, rng)}) < 1e-6);
  CHECK(gradcheck([](const Vars& v) { return probe(ag::scale_rows(v[0], {0.5, -2.0, 3.0})); }, {randn(3, 4, rng)}) <
        1e-6);
  CHECK(gradcheck([](const Vars& v) { return ag::mse(v[0], v[1]); }, {randn(3, 4, rng), randn(3, 4, rng)}) < 1e-6);
  CHECK(gradcheck([](const Vars& v) { return ag::softmax_cross_entropy(v[0], {0, 2, 1, 2}); }, {randn(4, 3, rng)}) <
        1e-6);
}

TEST_CASE("row and column plumbing gradients") {
  Rng rng(2);
  CHECK(gradcheck([](const Vars& v) { return probe(ag::slice_cols(v[0], 1, 3)); }, {randn(3, 6, rng)}) < 1e-6);
  CHECK(gradcheck([](const Vars& v) { return probe(ag::concat_cols<double>({v[0], v[1]})); },
                  {randn(3, 2, rng), randn(3, 4, rng)}) < 1e-6);
  CHECK(gradcheck([](const Vars& v) { return probe(ag::repeat_rows(v[0], 3)); }, {randn(2, 4, rng)}) < 1e-6);
  CHECK(gradcheck([](const Vars& v) { return probe(ag::gather_rows(v[0], 1, 3, 3)); }, {randn(9, 2, rng)}) < 1e-6);
  CHECK(gradcheck([](const Vars& v) { return probe(ag::interleave_rows<double>({v[0], v[1], v[2]})); },
                  {randn(2, 3, rng), randn(2, 3, rng), randn(2, 3, rng)}) < 1e-6);
}

TEST_CASE("normalization and convolution gradients") {
  Rng rng(3);
  CHECK(gradcheck([](const Vars& v) { return probe(ag::group_norm(v[0], 2, 4)); }, {randn(3, 4 * 5, rng)}) < 1e-5);
  CHECK(gradcheck([](const Vars& v) { return probe(ag::channel_affine(v[0], v[1], &v[2])); },
                  {randn(2, 12, rng), randn(2, 3, rng), randn(2, 3, rng)}) < 1e-6);
  const ag::ConvGeometry g{2, 5, 4, 3, 3, 2, 1};
  CHECK(gradcheck([g](const Vars& v) { return probe(ag::conv2d(v[0], v[1], v[2], g)); },
                  {randn(2, 2 * 5 * 4, rng), randn(3, g.patch(), rng), randn(1, 3, rng)}) < 1e-6);
  CHECK(gradcheck([](const Vars& v) { return probe(ag::upsample2x(v[0], 2, 2, 3)); }, {randn(2, 12, rng)}) < 1e-6);
}

TEST_CASE("lstm gradient and causality") {
  Rng rng(4);
  nn::ParamSet<double> ps;
  nn::Lstm<double> lstm(ps, "l", 3, 4, rng);
  auto run = [&](const Vars& v) {
    auto hs = lstm.run({v[0], v[1], v[2]});
    return probe(ag::concat_cols<double>({hs[0], hs[1], hs[2]}));
  };
  CHECK(gradcheck(run, {randn(2, 3, rng), randn(2, 3, rng), randn(2, 3, rng)}) < 1e-6);

  auto x0 = randn(2, 3, rng), x1 = randn(2, 3, rng), x2 = randn(2, 3, rng);
  auto a = lstm.run({Var<double>::constant(x0), Var<double>::constant(x1), Var<double>::constant(x2)});
  auto b = lstm.run({Var<double>::constant(x0), Var<double>::constant(x1), Var<double>::constant(randn(2, 3, rng))});
  CHECK(a[0].value() == b[0].value());
  CHECK(a[1].value() == b[1].value());
  CHECK(!(a[2].value() == b[2].value()));
}

TEST_CASE("group_norm output has zero mean and unit variance per group") {
  Rng rng(5);
  auto x = Var<double>::constant(randn(4, 8 * 6, rng, 3.0));
  auto y = ag::group_norm(x, 4, 8).value();
  const std::size_t gs = 12;
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t g = 0; g < 4; ++g) {
      double m = 0, v = 0;
      for (std::size_t i = 0; i < gs; ++i) m += y(r, g * gs + i);
      m /= gs;
      for (std::size_t i = 0; i < gs; ++i) v += (y(r, g * gs + i) - m) * (y(r, g * gs + i) - m);
      v /= gs;
      CHECK(std::abs(m) < 1e-12);
      CHECK(std::abs(v - 1.0) < 1e-5);
    }
  }
}

TEST_CASE("no-grad guard skips graph recording") {
  Rng rng(6);
  auto w = Var<double>::leaf(randn(2, 2, rng));
  ag::NoGradGuard guard;
  auto y = ag::silu(w);
  CHECK(!y.requires_grad());
}

TEST_CASE("adamw step moves parameters against the gradient") {
  Rng rng(7);
  nn::ParamSet<double> ps;
  auto p = ps.create("p", 1, 3, 1.0, rng);
  const auto before = p.value();
  nn::AdamW<double> opt(ps, nn::AdamWConfig{0.01, 0.9, 0.999, 1e-8, 0.0});
  auto loss = ag::sum(p);
  ag::backward(loss);
  opt.step();
  for (std::size_t i = 0; i < 3; ++i) CHECK(p.value()[i] == doctest::Approx(before[i] - 0.01).epsilon(1e-6));
}
