#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gradcheck.hpp"
#include "seqdiff/sampler/samplers.hpp"

using namespace seqdiff;
using namespace seqdiff::sampler;
using diffusion::DenoiserConfig;
using diffusion::karras_step_schedule;
using testutil::randn;

namespace {

// Straight transcription of the deterministic second-order integrator with an
// inline Gaussian posterior mean, independent of the library code paths.
std::vector<double> reference_heun(std::vector<double> x, const std::vector<double>& t, const std::vector<double>& mu,
                                   double s2) {
  auto den = [&](const std::vector<double>& v, double sigma) {
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) out[j] = (s2 * v[j] + sigma * sigma * mu[j]) / (s2 + sigma * sigma);
    return out;
  };
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    auto d0 = den(x, t[i]);
    std::vector<double> slope(x.size()), next(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      slope[j] = (x[j] - d0[j]) / t[i];
      next[j] = x[j] + (t[i + 1] - t[i]) * slope[j];
    }
    if (t[i + 1] != 0) {
      auto d1 = den(next, t[i + 1]);
      for (std::size_t j = 0; j < x.size(); ++j) {
        next[j] = x[j] + (t[i + 1] - t[i]) * 0.5 * (slope[j] + (next[j] - d1[j]) / t[i + 1]);
      }
    }
    x = next;
  }
  return x;
}

struct SmallModel {
  nn::ParamSet<float> ps;
  encoder::SequentialEncoder<float> enc;
  denoiser::DenoiserNet<float> net;
  std::unique_ptr<denoiser::NetworkDenoiser<float>> den;

  explicit SmallModel(std::uint64_t seed) {
    Rng rng(seed);
    encoder::EncoderConfig ec;
    ec.frame = FrameShape{6, 1, 1};
    ec.frame_feature_dim = 16;
    ec.hidden_dim = 16;
    ec.static_dim = 4;
    ec.dynamic_dim = 2;
    enc = encoder::SequentialEncoder<float>(ps, "enc", ec, rng);
    denoiser::DenoiserNetConfig dc;
    dc.frame = ec.frame;
    dc.cond_dim = 6;
    dc.width = 16;
    dc.blocks = 1;
    dc.embed_dim = 8;
    dc.temb_dim = 8;
    net = denoiser::DenoiserNet<float>(ps, "den", dc, rng);
    den = std::make_unique<denoiser::NetworkDenoiser<float>>(net, DenoiserConfig{});
  }
};

}  // namespace

TEST_CASE("deterministic sampler equals an independent Heun integrator") {
  DenoiserConfig cfg;
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> mu(4);
    for (auto& m : mu) m = rng.normal();
    const double s2 = 0.1 + rng.uniform();
    auto den = denoiser::analytic_gaussian_denoiser<double>(mu, s2);
    const auto sched = karras_step_schedule(8 + trial, cfg);
    SampleRequest<double> req;
    req.cond = Tensor<double>(1, 1);
    req.schedule = sched;
    req.x_init = randn(1, 4, rng, 80.0);
    const auto got = conditioned_sample(req, *den);
    const auto want = reference_heun(req.x_init->storage(), sched.levels, mu, s2);
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(got[j] - want[j]) <= 1e-10 * (1.0 + std::abs(want[j])));
  }
}

TEST_CASE("single step from x_init is one denoiser call") {
  auto den = denoiser::analytic_gaussian_denoiser<double>({0.5, -0.5}, 0.3);
  Rng rng(2);
  SampleRequest<double> req;
  req.cond = Tensor<double>(3, 1);
  req.schedule = karras_step_schedule(1, DenoiserConfig{});
  req.x_init = randn(3, 2, rng, 80.0);
  const auto out = conditioned_sample(req, *den);
  const auto d = den->denoise(*req.x_init, 80.0, req.cond);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - d[i]) <= 1e-12 * (1.0 + std::abs(d[i])));
}

TEST_CASE("sampler rejects a schedule that does not end at zero") {
  auto den = denoiser::analytic_gaussian_denoiser<double>({0.0}, 1.0);
  SampleRequest<double> req;
  req.cond = Tensor<double>(1, 1);
  req.schedule.levels = {2.0, 1.0};
  req.schedule.gamma = {0.0};
  req.frame_dim = 1;
  CHECK_THROWS_AS(conditioned_sample(req, *den), ContractViolation);
}

TEST_CASE("gaussian marginals are preserved along the trajectory") {
  const std::vector<double> mu(8, 0.2);
  const double s2 = 0.25;
  auto den = denoiser::analytic_gaussian_denoiser<double>(mu, s2);
  SampleRequest<double> req;
  req.cond = Tensor<double>(2000, 1);
  req.schedule = karras_step_schedule(32, DenoiserConfig{});
  req.frame_dim = 8;
  req.seed = 3;
  bool all_ok = true;
  req.on_step = [&](std::size_t, double t, const Tensor<double>& x) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < x.size(); ++i) m += x[i];
    m /= x.size();
    for (std::size_t i = 0; i < x.size(); ++i) v += (x[i] - m) * (x[i] - m);
    v /= x.size();
    all_ok &= std::abs(v / (s2 + t * t) - 1.0) < 0.1;
  };
  const auto out = conditioned_sample(req, *den);
  CHECK(all_ok);
  double m = 0;
  for (std::size_t i = 0; i < out.size(); ++i) m += out[i];
  CHECK(std::abs(m / out.size() - 0.2) < 3.0 * std::sqrt(s2 / out.size()));
}

TEST_CASE("churned sampling keeps gaussian marginals") {
  const std::vector<double> mu(4, -0.3);
  const double s2 = 0.16;
  auto den = denoiser::analytic_gaussian_denoiser<double>(mu, s2);
  SampleRequest<double> req;
  req.cond = Tensor<double>(4000, 1);
  req.schedule = karras_step_schedule(64, DenoiserConfig{}, diffusion::ChurnConfig{10.0, 1.0, 0.05, 10.0});
  req.frame_dim = 4;
  req.seed = 4;
  const auto out = conditioned_sample(req, *den);
  double m = 0, v = 0;
  for (std::size_t i = 0; i < out.size(); ++i) m += out[i];
  m /= out.size();
  for (std::size_t i = 0; i < out.size(); ++i) v += (out[i] - m) * (out[i] - m);
  v /= out.size();
  CHECK(std::abs(m + 0.3) < 3.0 * std::sqrt(s2 / out.size()));
  CHECK(std::abs(v / s2 - 1.0) < 0.05);
}

TEST_CASE("stochastic encoding inverts under the gaussian oracle") {
  const std::vector<double> mu{0.1, -0.4, 0.3};
  const double s2 = 0.25;
  auto den = denoiser::analytic_gaussian_denoiser<double>(mu, s2);
  const auto sched = karras_step_schedule(64, DenoiserConfig{});
  Rng rng(5);
  auto x0 = randn(50, 3, rng, 0.5);
  Tensor<double> cond(50, 1);
  const auto xt = stochastic_encode(x0, cond, sched, *den, 1);
  SampleRequest<double> req;
  req.cond = cond;
  req.schedule = sched;
  req.x_init = xt;
  const auto back = conditioned_sample(req, *den);
  double num = 0, denom = 0, second = 0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    num += (back[i] - x0[i]) * (back[i] - x0[i]);
    denom += x0[i] * x0[i];
    second += xt[i] * xt[i];
  }
  CHECK(std::sqrt(num / denom) <= 1e-2);
  // Terminal marginal: N(μ, (s² + σ_max²) I) pushes the second moment to ≈ σ_max².
  auto data = randn(2000, 3, rng, std::sqrt(s2));
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t j = 0; j < 3; ++j) data(r, j) += mu[j];
  }
  const auto many = stochastic_encode(data, Tensor<double>(2000, 1), sched, *den, 2);
  double m2 = 0;
  for (std::size_t i = 0; i < many.size(); ++i) m2 += many[i] * many[i];
  CHECK(std::abs(m2 / many.size() / (80.0 * 80.0) - 1.0) < 0.1);
}

TEST_CASE("single small encoding step is near identity") {
  auto den = denoiser::analytic_gaussian_denoiser<double>({0.0, 0.0}, 0.25);
  diffusion::SigmaSchedule s;
  s.levels = {0.004, 0.002, 0.0};
  s.gamma = {0.0, 0.0};
  Tensor<double> x0(1, 2, std::vector<double>{0.3, -0.6});
  const auto xt = stochastic_encode(x0, Tensor<double>(1, 1), s, *den, 0);
  for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(xt[j] - x0[j]) < 0.01);
}

TEST_CASE("network sampler: determinism, permutation and frame independence") {
  SmallModel m(6);
  Rng rng(7);
  const auto sched = karras_step_schedule(6, DenoiserConfig{}, diffusion::ChurnConfig{5.0});
  const auto cond = randn(5, 6, rng).cast<float>();

  SampleRequest<float> req;
  req.cond = cond;
  req.schedule = sched;
  req.frame_dim = 6;
  req.seed = 11;
  const auto joint = conditioned_sample(req, *m.den);
  CHECK(conditioned_sample(req, *m.den) == joint);

  for (std::size_t r = 0; r < 5; ++r) {
    SampleRequest<float> one = req;
    one.cond = Tensor<float>(1, 6, std::vector<float>(cond.row(r), cond.row(r) + 6));
    one.frame_ids = {r};
    const auto single = conditioned_sample(one, *m.den);
    for (std::size_t j = 0; j < 6; ++j) CHECK(single(0, j) == joint(r, j));
  }

  // Reversed rows with matching ids reproduce reversed outputs.
  SampleRequest<float> rev = req;
  for (std::size_t r = 0; r < 5; ++r) std::copy(cond.row(4 - r), cond.row(4 - r) + 6, rev.cond.row(r));
  rev.frame_ids = {4, 3, 2, 1, 0};
  const auto flipped = conditioned_sample(rev, *m.den);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t j = 0; j < 6; ++j) CHECK(flipped(r, j) == joint(4 - r, j));
  }
}

TEST_CASE("self swap is reconstruction; untrained reconstruction is finite") {
  SmallModel m(8);
  Rng rng(9);
  Pipeline<float> p{&m.enc, m.den.get(), karras_step_schedule(5, DenoiserConfig{}), 3};
  const auto x = randn(2 * 3, 6, rng, 0.5).cast<float>();
  const auto rec = reconstruct(p, x, 4);
  for (auto mode : {SwapEncoding::own, SwapEncoding::swapped}) CHECK(conditional_swap(p, x, x, 4, mode) == rec);
  for (std::size_t i = 0; i < rec.size(); ++i) CHECK(std::isfinite(rec[i]));
  CHECK(reconstruct(p, x, 4) == rec);
  CHECK_THROWS_AS(conditional_swap(p, x, Tensor<float>(3, 6), 4), ContractViolation);
}

TEST_CASE("swap encoding names round-trip") {
  for (auto e : {SwapEncoding::own, SwapEncoding::swapped, SwapEncoding::none}) {
    CHECK(parse_swap_encoding(to_string(e)) == e);
  }
  CHECK_THROWS_AS(parse_swap_encoding("mixed"), ConfigError);
}
