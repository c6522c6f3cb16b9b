#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "seqdiff/denoiser/denoiser.hpp"

using namespace seqdiff;
using namespace seqdiff::denoiser;
using ag::Var;
using testutil::randn;

namespace {

Var<double> ones(std::size_t r, std::size_t c) { return Var<double>::constant(Tensor<double>(r, c, 1.0)); }
Var<double> zeros(std::size_t r, std::size_t c) { return Var<double>::constant(Tensor<double>(r, c, 0.0)); }

DenoiserNetConfig small_mlp() {
  DenoiserNetConfig c;
  c.frame = FrameShape{6, 1, 1};
  c.cond_dim = 5;
  c.width = 16;
  c.blocks = 2;
  c.embed_dim = 8;
  c.temb_dim = 8;
  return c;
}

DenoiserNetConfig small_unet() {
  DenoiserNetConfig c;
  c.frame = FrameShape{1, 8, 8};
  c.cond_dim = 5;
  c.backbone = Backbone::unet;
  c.base_channels = 8;
  c.groups = 4;
  c.embed_dim = 8;
  c.temb_dim = 8;
  return c;
}

}  // namespace

TEST_CASE("adagn with identity modulation is plain group norm") {
  Rng rng(1);
  auto h = Var<double>::constant(randn(3, 8 * 4, rng));
  auto y = adagn(h, 8, 4, ones(3, 8), ones(3, 8), zeros(3, 8)).value();
  CHECK(y == ag::group_norm(h, 4, 8).value());
}

TEST_CASE("adagn is homogeneous in the latent scale") {
  Rng rng(2);
  auto h = Var<double>::constant(randn(2, 8 * 3, rng));
  auto zs = Var<double>::constant(randn(2, 8, rng));
  auto ts = Var<double>::constant(randn(2, 8, rng));
  auto tb = Var<double>::constant(randn(2, 8, rng));
  auto y1 = adagn(h, 8, 2, zs, ts, tb).value();
  auto y2 = adagn(h, 8, 2, ag::scale(zs, 2.0), ts, tb).value();
  for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y2[i] == 2.0 * y1[i]);
}

TEST_CASE("adagn rejects channel/group mismatch") {
  auto h = zeros(1, 6);
  CHECK_THROWS_AS(adagn(h, 6, 4, ones(1, 6), ones(1, 6), zeros(1, 6)), ConfigError);
}

TEST_CASE("adagn gradient") {
  Rng rng(3);
  auto f = [](const std::vector<Var<double>>& v) { return testutil::probe(adagn(v[0], 4, 2, v[1], v[2], v[3])); };
  CHECK(testutil::gradcheck(f, {randn(2, 12, rng), randn(2, 4, rng), randn(2, 4, rng), randn(2, 4, rng)}) < 1e-5);
}

TEST_CASE("analytic optimal F reproduces the gaussian posterior mean") {
  diffusion::DenoiserConfig cfg;
  const std::vector<double> mu{0.3, -0.2, 0.1};
  const double s2 = 0.25;
  Rng rng(4);
  for (double sigma : {0.002, 0.1, 0.5, 3.0, 80.0}) {
    const auto xt = randn(4, 3, rng, std::sqrt(s2 + sigma * sigma));
    const auto c = diffusion::precondition_coeffs(sigma, cfg);
    diffusion::RawNet<double> f_opt = [&](const Var<double>& u, const std::vector<double>&) {
      Tensor<double> f(u.rows(), u.cols());
      for (std::size_t r = 0; r < u.rows(); ++r) {
        for (std::size_t j = 0; j < u.cols(); ++j) {
          const double x = u.value()(r, j) / c.c_in;
          const double dstar = (s2 * x + sigma * sigma * mu[j]) / (s2 + sigma * sigma);
          f(r, j) = (dstar - c.c_skip * x) / c.c_out;
        }
      }
      return Var<double>::constant(f);
    };
    std::vector<double> sig(4, sigma);
    std::vector<double> cin(4, c.c_in), cn(4, c.c_noise);
    auto fr = f_opt(ag::scale_rows(Var<double>::constant(xt), cin), cn);
    auto d = diffusion::precondition_output(xt, sig, fr, cfg).value();
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t j = 0; j < 3; ++j) {
        const double post = (s2 * xt(r, j) + sigma * sigma * mu[j]) / (s2 + sigma * sigma);
        CHECK(std::abs(d(r, j) - post) <= 1e-8 * (1.0 + std::abs(post)));
      }
    }
  }
}

TEST_CASE("analytic gaussian denoiser limits") {
  auto den = analytic_gaussian_denoiser<double>({1.0, -1.0}, 0.5);
  Tensor<double> x(1, 2, std::vector<double>{3.0, 5.0});
  Tensor<double> cond(1, 1);
  auto mid = den->denoise(x, std::sqrt(0.5), cond);
  CHECK(mid(0, 0) == doctest::Approx(2.0));
  CHECK(mid(0, 1) == doctest::Approx(2.0));
  auto lo = den->denoise(x, 1e-9, cond);
  CHECK(lo(0, 0) == doctest::Approx(3.0));
  auto hi = den->denoise(x, 1e6, cond);
  CHECK(hi(0, 1) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK_THROWS_AS(analytic_gaussian_denoiser<double>({0.0}, 0.0), DomainError);
}

TEST_CASE("network denoiser output identity, limit and determinism") {
  for (const auto& ncfg : {small_mlp(), small_unet()}) {
    Rng rng(5);
    nn::ParamSet<double> ps;
    DenoiserNet<double> net(ps, "den", ncfg, rng);
    NetworkDenoiser<double> den(net, diffusion::DenoiserConfig{});
    const std::size_t d = ncfg.frame.dim();
    const auto x = randn(3, d, rng);
    const auto z = randn(3, ncfg.cond_dim, rng);
    for (double sigma : {1e-3, 0.5, 10.0}) {
      auto out = den.denoise_full(x, sigma, z);
      const auto c = diffusion::precondition_coeffs(sigma, den.config());
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(out.x0_hat[i] == c.c_skip * x[i] + c.c_out * out.f_raw[i]);
      CHECK(den.denoise(x, sigma, z) == out.x0_hat);
    }
    auto tiny = den.denoise(x, 1e-7, z);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(tiny[i] - x[i]) < 1e-5);
  }
}

TEST_CASE("both conditioning parts are live and frames are local") {
  for (const auto& ncfg : {small_mlp(), small_unet()}) {
    Rng rng(6);
    nn::ParamSet<double> ps;
    DenoiserNet<double> net(ps, "den", ncfg, rng);
    // Random AdaGN maps so the latent path is far from identity.
    for (const auto& item : ps.items()) {
      Var<double> w = item.second;
      auto& t = w.mutable_value();
      for (std::size_t i = 0; i < t.size(); ++i) t[i] += 0.05 * rng.normal();
    }
    NetworkDenoiser<double> den(net, diffusion::DenoiserConfig{});
    const auto x = randn(3, ncfg.frame.dim(), rng);
    auto z = randn(3, ncfg.cond_dim, rng);
    const auto base = den.denoise(x, 0.7, z);
    auto zs = z;
    zs(1, 0) += 0.5;  // static part
    auto zd = z;
    zd(1, ncfg.cond_dim - 1) += 0.5;  // dynamic part
    const auto os = den.denoise(x, 0.7, zs);
    const auto od = den.denoise(x, 0.7, zd);
    bool changed_s = false, changed_d = false;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      changed_s |= os(1, j) != base(1, j);
      changed_d |= od(1, j) != base(1, j);
      CHECK(os(0, j) == base(0, j));
      CHECK(os(2, j) == base(2, j));
    }
    CHECK(changed_s);
    CHECK(changed_d);
  }
}

TEST_CASE("denoiser shape contract") {
  Rng rng(7);
  nn::ParamSet<double> ps;
  DenoiserNet<double> net(ps, "den", small_mlp(), rng);
  NetworkDenoiser<double> den(net, diffusion::DenoiserConfig{});
  CHECK_THROWS_AS(den.denoise(Tensor<double>(2, 5), 1.0, Tensor<double>(2, 5)), ContractViolation);
  CHECK_THROWS_AS(den.denoise(Tensor<double>(2, 6), 1.0, Tensor<double>(2, 4)), ContractViolation);
  auto bad = small_unet();
  bad.frame = FrameShape{6, 1, 1};
  CHECK_THROWS_AS(DenoiserNet<double>(ps, "bad", bad, rng), ConfigError);
}

TEST_CASE("network training gradient through the denoiser") {
  Rng rng(8);
  nn::ParamSet<double> ps;
  auto ncfg = small_mlp();
  ncfg.width = 8;
  ncfg.blocks = 1;
  ncfg.groups = 2;
  DenoiserNet<double> net(ps, "den", ncfg, rng);
  const auto x = randn(2, 6, rng);
  const std::vector<double> cn{0.1, -0.3};
  auto f = [&](const std::vector<Var<double>>& v) { return testutil::probe(net(v[0], cn, v[1])); };
  CHECK(testutil::gradcheck(f, {x, randn(2, 5, rng)}) < 1e-5);
}
