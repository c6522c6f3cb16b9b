#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "seqdiff/data/synthetic.hpp"
#include "seqdiff/eval/metrics.hpp"
#include "seqdiff/eval/probes.hpp"
#include "seqdiff/eval/report.hpp"
#include "seqdiff/eval/swap.hpp"
#include "seqdiff/eval/traversal.hpp"

using namespace seqdiff;
using namespace seqdiff::eval;

namespace {

std::vector<VerificationTrial> random_trials(Rng& rng, std::size_t n, double shift, bool ties) {
  std::vector<VerificationTrial> t;
  for (std::size_t i = 0; i < n; ++i) {
    const bool same = rng.uniform() < 0.4;
    double s = rng.normal() + (same ? shift : 0.0);
    if (ties) s = std::round(s * 4.0) / 4.0;
    t.push_back({s, same});
  }
  t.push_back({rng.normal(), true});
  t.push_back({rng.normal(), false});
  return t;
}

}  // namespace

TEST_CASE("eer: separated, hand-built and random-label cases") {
  CHECK(compute_eer({{0.9, true}, {0.8, true}, {0.1, false}, {0.2, false}}) == 0.0);
  const std::vector<VerificationTrial> six{{0.9, true}, {0.7, true}, {0.4, true},
                                           {0.8, false}, {0.3, false}, {0.2, false}};
  CHECK(compute_eer(six) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(compute_eer(six) == oracle::brute_force_eer(six));
  Rng rng(1);
  std::vector<VerificationTrial> null;
  for (int i = 0; i < 10000; ++i) null.push_back({rng.normal(), rng.uniform() < 0.5});
  CHECK(std::abs(compute_eer(null) - 0.5) < 0.03);
  CHECK_THROWS_AS(compute_eer({{0.1, true}, {0.3, true}}), ContractViolation);
}

TEST_CASE("eer agrees with exhaustive threshold enumeration") {
  Rng rng(2);
  for (int k = 0; k < 60; ++k) {
    const auto t = random_trials(rng, 1 + rng.index(300), rng.uniform() * 2.0, k % 2 == 0);
    CHECK(std::abs(compute_eer(t) - oracle::brute_force_eer(t)) <= 1e-9);
  }
}

TEST_CASE("eer is a rank statistic") {
  Rng rng(3);
  auto t = random_trials(rng, 400, 1.0, false);
  const double base = compute_eer(t);
  for (auto& x : t) x.score = std::exp(3.0 * x.score) - 7.0;
  CHECK(compute_eer(t) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("disentanglement gap on idealized codes") {
  Rng rng(4);
  const std::size_t n = 120, classes = 6;
  Tensor<double> onehot(n, classes), noise(n, 3);
  std::vector<int> id(n);
  for (std::size_t i = 0; i < n; ++i) {
    id[i] = static_cast<int>(i % classes);
    onehot(i, i % classes) = 1.0;
    for (std::size_t j = 0; j < 3; ++j) noise(i, j) = rng.normal();
  }
  const auto g = disentanglement_gap(onehot, noise, id);
  CHECK(g.static_eer < 0.01);
  CHECK(std::abs(g.dynamic_eer - 0.5) < 0.06);
  CHECK(g.gap > 0.4);
  CHECK(disentanglement_gap(noise, noise, id).gap == 0.0);
  const auto flipped = disentanglement_gap(noise, onehot, id);
  CHECK(flipped.gap == -g.gap);
  CHECK_THROWS_AS(disentanglement_gap(noise, noise, std::vector<int>(n, 2)), ContractViolation);
}

TEST_CASE("dynamic pooling") {
  Tensor<double> d(4, 1, std::vector<double>{1, 3, 5, 9});
  CHECK(pool_dynamic(d, 2, "mean")(1, 0) == 7.0);
  CHECK(pool_dynamic(d, 2, "last")(0, 0) == 3.0);
  CHECK_THROWS_AS(pool_dynamic(d, 3, "mean"), ContractViolation);
}

TEST_CASE("auroc and auprc equal their exhaustive definitions") {
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> s(20);
    std::vector<int> p(20);
    for (std::size_t i = 0; i < 20; ++i) {
      p[i] = rng.uniform() < 0.4;
      s[i] = std::round((rng.normal() + p[i]) * 2.0) / 2.0;
    }
    p[0] = 1;
    p[1] = 0;
    CHECK(auroc(s, p) == doctest::Approx(oracle::brute_force_auroc(s, p)).epsilon(1e-12));
    CHECK(auprc(s, p) == doctest::Approx(oracle::brute_force_auprc(s, p)).epsilon(1e-12));
  }
  CHECK(auroc({1, 2, 3, 4}, {0, 0, 1, 1}) == 1.0);
  CHECK(auprc({1, 2, 3, 4}, {0, 0, 1, 1}) == 1.0);
}

TEST_CASE("pearson, mse and energy distance") {
  Tensor<double> a(3, 2, std::vector<double>{1, 2, 3, 4, 5, 7});
  Tensor<double> b = a;
  CHECK(mean_squared_error(a, b) == 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += 0.25;
  CHECK(mean_squared_error(a, b) == doctest::Approx(0.0625).epsilon(1e-15));
  CHECK(mean_column_pearson(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0).epsilon(1e-12));
  Rng rng(6);
  Tensor<double> x(300, 2), y(300, 2);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.normal();
    y[i] = rng.normal() + 1.0;
  }
  CHECK(energy_distance(x, x) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(energy_distance(x, y) > 0.5);
  CHECK(energy_distance(x, y) == doctest::Approx(energy_distance(y, x)).epsilon(1e-12));
}

TEST_CASE("pca traversal identities") {
  Rng rng(7);
  const std::size_t b = 500, h = 5;
  Tensor<double> pool(b, h);
  for (std::size_t r = 0; r < b; ++r) {
    const double u = rng.normal();
    for (std::size_t j = 0; j < h; ++j) pool(r, j) = (j + 1.0) * (u + 0.3 * rng.normal()) + j;
  }
  const auto spec = fit_traversal(pool, 0.3);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < h; ++j) {
      double dot = 0;
      for (std::size_t c = 0; c < h; ++c) dot += spec.components(i, c) * spec.components(j, c);
      CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-6);
    }
    if (i > 0) CHECK(spec.explained[i] <= spec.explained[i - 1]);
  }
  const std::vector<double> s(pool.row(3), pool.row(3) + h);
  CHECK(pca_traverse(s, spec, 0, 0.0) == s);
  const auto a1 = pca_traverse(s, spec, 1, 0.1), a2 = pca_traverse(s, spec, 1, 0.15);
  const auto a12 = pca_traverse(s, spec, 1, 0.25);
  for (std::size_t j = 0; j < h; ++j) CHECK(std::abs(a1[j] + a2[j] - s[j] - a12[j]) < 1e-8);
  const auto ij = pca_traverse(pca_traverse(s, spec, 0, 0.2), spec, 2, 0.2);
  const auto ji = pca_traverse(pca_traverse(s, spec, 2, 0.2), spec, 0, 0.2);
  for (std::size_t j = 0; j < h; ++j) CHECK(std::abs(ij[j] - ji[j]) < 1e-12);
  CHECK_THROWS_AS(pca_traverse(s, spec, 0, 0.31), DomainError);
  CHECK_THROWS_AS(pca_traverse(s, spec, h, 0.1), DomainError);
  CHECK_THROWS_AS(fit_traversal(Tensor<double>(3, 5)), ContractViolation);
  for (std::size_t r = 0; r < b; ++r) pool(r, 2) = 4.0;
  const auto deg = fit_traversal(pool);
  CHECK(deg.clamped == std::vector<std::size_t>{2});
  CHECK(deg.std[2] == 1e-8);
}

TEST_CASE("probes: physio class is linearly recoverable, permuted labels are not") {
  const auto train = data::gen_toy_physio(600, 10, 8);
  const auto test = data::gen_toy_physio(400, 10, 9);
  SoftmaxProbe p;
  p.fit(mean_frame_features(train.frames, 10), train.labels->static_label, 2);
  CHECK(accuracy(p.predict(mean_frame_features(test.frames, 10)), test.labels->static_label) >= 0.95);
  auto shuffled = train.labels->static_label;
  Rng rng(10);
  for (std::size_t i = shuffled.size() - 1; i > 0; --i) std::swap(shuffled[i], shuffled[rng.index(i + 1)]);
  SoftmaxProbe null;
  null.fit(mean_frame_features(train.frames, 10), shuffled, 2);
  CHECK(std::abs(accuracy(null.predict(mean_frame_features(test.frames, 10)), test.labels->static_label) - 0.5) < 0.1);
}

TEST_CASE("ridge probe recovers a linear map") {
  Rng rng(11);
  Tensor<double> x(200, 3), y(200, 1);
  for (std::size_t r = 0; r < 200; ++r) {
    for (std::size_t j = 0; j < 3; ++j) x(r, j) = rng.normal();
    y(r, 0) = 2.0 * x(r, 0) - x(r, 2) + 0.5;
  }
  RidgeProbe p;
  p.fit(x, y, 1e-10);
  const auto yh = p.predict(x);
  CHECK(mean_squared_error(yh, y) < 1e-12);
}

TEST_CASE("swap scores: oracle and random outputs") {
  const std::size_t v = 6;
  const auto test = data::gen_bouncing_shape(80, v, 12);
  const auto probe = make_factor_probe("bouncing", {}, v);
  const auto pairs = make_pair_list(*test.labels, 60, 3);
  CHECK(make_pair_list(*test.labels, 60, 3) == pairs);
  for (const auto& pr : pairs.pairs) CHECK(test.labels->static_label[pr.static_src] != test.labels->static_label[pr.dyn_src]);
  // Oracle: render the static source's shape on the dynamics source's track.
  auto oracle_swap = [&](const Tensor<double>& a, const Tensor<double>&) {
    Tensor<double> out(a.rows(), a.cols());
    for (std::size_t k = 0; k < pairs.pairs.size(); ++k) {
      const int lab = test.labels->static_label[pairs.pairs[k].static_src];
      for (std::size_t t = 0; t < v; ++t) {
        const std::size_t src = pairs.pairs[k].dyn_src * v + t;
        data::render_shape(lab / 4, data::shape_intensity(static_cast<std::size_t>(lab % 4)),
                           test.labels->dynamic_track(src, 0), test.labels->dynamic_track(src, 1), out.row(k * v + t));
      }
    }
    return out;
  };
  const auto best = swap_preservation_scores(test, pairs, oracle_swap, *probe);
  CHECK(best.static_accuracy == 1.0);
  CHECK(best.static_leak == 0.0);
  CHECK(best.dynamic_r > 0.99);
  // Random frames from an unrelated draw.
  const auto other = data::gen_bouncing_shape(60, v, 99);
  const auto rnd = swap_preservation_scores(
      test, pairs, [&](const Tensor<double>&, const Tensor<double>&) { return other.frames; }, *probe);
  CHECK(rnd.static_accuracy < 0.3);
  CHECK(std::abs(rnd.dynamic_r) < 0.3);

  const auto path = std::filesystem::temp_directory_path() / "seqdiff_pairs_test.txt";
  pairs.save(path.string());
  CHECK(PairList::load(path.string()) == pairs);
  std::filesystem::remove(path);
}

TEST_CASE("metrics report text round trip") {
  MetricsReport r;
  r.set("eer.static", 0.1 + 0.2);
  r.set_text("meta.config_hash", "00ff");
  r.set("nan_value", std::nan(""));
  MetricsReport inner;
  inner.set("x", 1.5);
  r.merge("swap", inner);
  const auto back = MetricsReport::from_text(r.to_text());
  CHECK(back == r);
  CHECK(back.number("eer.static") == 0.1 + 0.2);
  CHECK(back.number("swap.x") == 1.5);
  CHECK(std::isnan(back.number("nan_value")));
  CHECK_THROWS_AS(r.number("missing"), ContractViolation);
}
