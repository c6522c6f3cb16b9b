#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "seqdiff/kernels/kernels.hpp"
#include "seqdiff/random.hpp"

using namespace seqdiff;
using kernels::KernelTable;
using kernels::Trans;

namespace {

template <class T>
std::vector<T> random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(scale * rng.normal());
  return v;
}

template <class T>
double max_rel_err(const std::vector<T>& a, const std::vector<T>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    worst = std::max(worst, d / (1.0 + std::abs(static_cast<double>(a[i]))));
  }
  return worst;
}

// Naive triple loop used as the oracle for both tables.
template <class T>
std::vector<double> naive_gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
                               const std::vector<T>& a, const std::vector<T>& b, double beta, const std::vector<T>& c) {
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta == Trans::no ? a[i * k + p] : a[p * m + i];
        const double bv = tb == Trans::no ? b[p * n + j] : b[j * k + p];
        acc += av * bv;
      }
      out[i * n + j] = alpha * acc + (beta == 0 ? 0.0 : beta * c[i * n + j]);
    }
  }
  return out;
}

template <class T>
void check_gemm(const KernelTable<T>& kt, double tol) {
  Rng rng(7);
  const std::size_t shapes[][3] = {{1, 1, 1}, {3, 5, 7}, {6, 16, 9}, {13, 33, 257}, {80, 70, 300}, {2, 129, 64}};
  for (auto& s : shapes) {
    const std::size_t m = s[0], n = s[1], k = s[2];
    for (Trans ta : {Trans::no, Trans::yes}) {
      for (Trans tb : {Trans::no, Trans::yes}) {
        for (double beta : {0.0, 1.0, -0.5}) {
          auto a = random_vec<T>(m * k, rng);
          auto b = random_vec<T>(k * n, rng);
          auto c = random_vec<T>(m * n, rng);
          auto expect = naive_gemm(ta, tb, m, n, k, 0.75, a, b, beta, c);
          kt.gemm(ta, tb, m, n, k, T(0.75), a.data(), ta == Trans::no ? k : m, b.data(), tb == Trans::no ? n : k,
                  static_cast<T>(beta), c.data(), n);
          double worst = 0;
          for (std::size_t i = 0; i < m * n; ++i) {
            worst = std::max(worst, std::abs(c[i] - expect[i]) / (1.0 + std::abs(expect[i])));
          }
          CHECK(worst < tol * std::sqrt(static_cast<double>(k)));
        }
      }
    }
  }
}

template <class T>
void check_elementwise_equivalence(const KernelTable<T>& ref, const KernelTable<T>& vec, double tol) {
  Rng rng(11);
  for (std::size_t n : {1u, 3u, 7u, 8u, 9u, 31u, 64u, 1000u}) {
    auto x = random_vec<T>(n, rng, 3.0);
    auto y = random_vec<T>(n, rng);
    auto g = random_vec<T>(n, rng);
    auto run = [&](const KernelTable<T>& kt, auto&& fn) {
      std::vector<T> out = y;
      fn(kt, out);
      return out;
    };
    using Fn = std::function<void(const KernelTable<T>&, std::vector<T>&)>;
    const Fn ops[] = {
        [&](const KernelTable<T>& kt, std::vector<T>& o) { kt.axpy(n, T(0.3), x.data(), o.data()); },
        [&](const KernelTable<T>& kt, std::vector<T>& o) { kt.scale(n, T(-1.7), o.data()); },
        [&](const KernelTable<T>& kt, std::vector<T>& o) { kt.add(n, x.data(), g.data(), o.data()); },
        [&](const KernelTable<T>& kt, std::vector<T>& o) { kt.mul(n, x.data(), g.data(), o.data()); },
        [&](const KernelTable<T>& kt, std::vector<T>& o) { kt.mul_acc(n, x.data(), g.data(), o.data()); },
        [&](const KernelTable<T>& kt, std::vector<T>& o) { kt.silu(n, x.data(), o.data()); },
        [&](const KernelTable<T>& kt, std::vector<T>& o) { kt.silu_backward(n, x.data(), g.data(), o.data()); },
        [&](const KernelTable<T>& kt, std::vector<T>& o) { kt.sigmoid(n, x.data(), o.data()); },
        [&](const KernelTable<T>& kt, std::vector<T>& o) { kt.tanh(n, x.data(), o.data()); },
    };
    for (const auto& op : ops) CHECK(max_rel_err(run(ref, op), run(vec, op)) < tol);
    CHECK(std::abs(ref.dot(n, x.data(), g.data()) - vec.dot(n, x.data(), g.data())) < tol * (1.0 + n));
    CHECK(std::abs(ref.sum(n, x.data()) - vec.sum(n, x.data())) < tol * (1.0 + n));
    CHECK(std::abs(ref.sum_sq_diff(n, x.data(), T(0.2)) - vec.sum_sq_diff(n, x.data(), T(0.2))) < tol * (1.0 + 10.0 * n));

    std::vector<T> w1 = x, w2 = x, m1(n, T(0.1)), m2(n, T(0.1)), v1(n, T(0.2)), v2(n, T(0.2));
    ref.adamw(n, w1.data(), g.data(), m1.data(), v1.data(), T(1e-3), T(0.9), T(0.999), T(1e-8), T(1e-5), T(0.1), T(0.001));
    vec.adamw(n, w2.data(), g.data(), m2.data(), v2.data(), T(1e-3), T(0.9), T(0.999), T(1e-8), T(1e-5), T(0.1), T(0.001));
    CHECK(max_rel_err(w1, w2) < tol);
    CHECK(max_rel_err(m1, m2) < tol);
    CHECK(max_rel_err(v1, v2) < tol);
  }
}

// Row r of C must not depend on how many other rows are computed with it.
template <class T>
void check_row_independence(const KernelTable<T>& kt) {
  Rng rng(3);
  const std::size_t m = 37, n = 45, k = 300;
  auto a = random_vec<T>(m * k, rng);
  auto b = random_vec<T>(k * n, rng);
  std::vector<T> joint(m * n);
  kt.gemm(Trans::no, Trans::yes, m, n, k, T(1), a.data(), k, b.data(), k, T(0), joint.data(), n);
  for (std::size_t r = 0; r < m; ++r) {
    std::vector<T> single(n);
    kt.gemm(Trans::no, Trans::yes, 1, n, k, T(1), a.data() + r * k, k, b.data(), k, T(0), single.data(), n);
    for (std::size_t j = 0; j < n; ++j) REQUIRE(single[j] == joint[r * n + j]);
  }
}

}  // namespace

TEST_CASE("scalar gemm matches the naive product") {
  check_gemm(kernels::scalar_f64(), 1e-14);
  check_gemm(kernels::scalar_f32(), 1e-6);
}

TEST_CASE("avx2 gemm matches the naive product") {
  if (!kernels::avx2_available()) return;
  check_gemm(kernels::avx2_f64(), 1e-14);
  check_gemm(kernels::avx2_f32(), 1e-6);
}

TEST_CASE("avx2 elementwise kernels agree with the scalar reference") {
  if (!kernels::avx2_available()) return;
  check_elementwise_equivalence(kernels::scalar_f64(), kernels::avx2_f64(), 1e-12);
  check_elementwise_equivalence(kernels::scalar_f32(), kernels::avx2_f32(), 2e-6);
}

TEST_CASE("gemm output rows are independent of batch size") {
  check_row_independence(kernels::scalar_f32());
  check_row_independence(kernels::table_f32());
  check_row_independence(kernels::table_f64());
}

TEST_CASE("active isa has a name") {
  CHECK(!kernels::isa_name(kernels::active_isa()).empty());
}
