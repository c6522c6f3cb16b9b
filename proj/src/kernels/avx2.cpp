// AVX2 + FMA kernels. This translation unit is compiled with -mavx2 -mfma
// and is only entered after a runtime CPUID check.
//
// Tails are pushed through the same vector code via a zero-padded scratch
// block, so every element gets identical arithmetic regardless of where it
// sits in a buffer.

#include "seqdiff/kernels/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace seqdiff::kernels {
namespace {

template <class T>
struct V;

template <>
struct V<float> {
  using R = __m256;
  static constexpr std::size_t W = 8;
  static R load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, R v) { _mm256_storeu_ps(p, v); }
  static R set1(float x) { return _mm256_set1_ps(x); }
  static R zero() { return _mm256_setzero_ps(); }
  static R add(R a, R b) { return _mm256_add_ps(a, b); }
  static R sub(R a, R b) { return _mm256_sub_ps(a, b); }
  static R mul(R a, R b) { return _mm256_mul_ps(a, b); }
  static R div(R a, R b) { return _mm256_div_ps(a, b); }
  static R fmadd(R a, R b, R c) { return _mm256_fmadd_ps(a, b, c); }
  static R sqrt(R a) { return _mm256_sqrt_ps(a); }
  static float hsum(R v) {
    alignas(32) float t[8];
    _mm256_store_ps(t, v);
    return ((t[0] + t[1]) + (t[2] + t[3])) + ((t[4] + t[5]) + (t[6] + t[7]));
  }
};

template <>
struct V<double> {
  using R = __m256d;
  static constexpr std::size_t W = 4;
  static R load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, R v) { _mm256_storeu_pd(p, v); }
  static R set1(double x) { return _mm256_set1_pd(x); }
  static R zero() { return _mm256_setzero_pd(); }
  static R add(R a, R b) { return _mm256_add_pd(a, b); }
  static R sub(R a, R b) { return _mm256_sub_pd(a, b); }
  static R mul(R a, R b) { return _mm256_mul_pd(a, b); }
  static R div(R a, R b) { return _mm256_div_pd(a, b); }
  static R fmadd(R a, R b, R c) { return _mm256_fmadd_pd(a, b, c); }
  static R sqrt(R a) { return _mm256_sqrt_pd(a); }
  static double hsum(R v) {
    alignas(32) double t[4];
    _mm256_store_pd(t, v);
    return (t[0] + t[1]) + (t[2] + t[3]);
  }
};

// ---------------------------------------------------------------------------
// GEMM: packed panels, MR x NR register tile.

constexpr std::size_t kMR = 6;
constexpr std::size_t kKC = 256;
constexpr std::size_t kMC = 72;
constexpr std::size_t kNC = 2048;

template <class T>
struct GemmScratch {
  std::vector<T> a, b;
};

template <class T>
GemmScratch<T>& scratch() {
  thread_local GemmScratch<T> s;
  return s;
}

template <class T>
inline T op_at(const T* m, std::size_t ld, Trans t, std::size_t r, std::size_t c) {
  return t == Trans::no ? m[r * ld + c] : m[c * ld + r];
}

template <class T>
void pack_a(Trans ta, const T* a, std::size_t lda, std::size_t i0, std::size_t mc, std::size_t p0,
            std::size_t kc, T* out) {
  for (std::size_t r = 0; r < mc; r += kMR) {
    const std::size_t rows = std::min(kMR, mc - r);
    for (std::size_t p = 0; p < kc; ++p) {
      for (std::size_t ii = 0; ii < kMR; ++ii) {
        *out++ = ii < rows ? op_at(a, lda, ta, i0 + r + ii, p0 + p) : T(0);
      }
    }
  }
}

template <class T>
void pack_b(Trans tb, const T* b, std::size_t ldb, std::size_t p0, std::size_t kc, std::size_t j0,
            std::size_t nc, T* out) {
  constexpr std::size_t NR = 2 * V<T>::W;
  for (std::size_t c = 0; c < nc; c += NR) {
    const std::size_t cols = std::min(NR, nc - c);
    for (std::size_t p = 0; p < kc; ++p) {
      if (tb == Trans::no && cols == NR) {
        std::memcpy(out, b + (p0 + p) * ldb + j0 + c, NR * sizeof(T));
        out += NR;
      } else {
        for (std::size_t jj = 0; jj < NR; ++jj) {
          *out++ = jj < cols ? op_at(b, ldb, tb, p0 + p, j0 + c + jj) : T(0);
        }
      }
    }
  }
}

template <class T>
void micro_kernel(std::size_t kc, const T* ap, const T* bp, T alpha, T* c, std::size_t ldc,
                  std::size_t rows, std::size_t cols) {
  using Vt = V<T>;
  constexpr std::size_t W = Vt::W;
  constexpr std::size_t NR = 2 * W;
  typename Vt::R acc[kMR][2];
  for (std::size_t ii = 0; ii < kMR; ++ii) acc[ii][0] = acc[ii][1] = Vt::zero();
  for (std::size_t p = 0; p < kc; ++p) {
    const auto b0 = Vt::load(bp + p * NR);
    const auto b1 = Vt::load(bp + p * NR + W);
    const T* arow = ap + p * kMR;
    for (std::size_t ii = 0; ii < kMR; ++ii) {
      const auto av = Vt::set1(arow[ii]);
      acc[ii][0] = Vt::fmadd(av, b0, acc[ii][0]);
      acc[ii][1] = Vt::fmadd(av, b1, acc[ii][1]);
    }
  }
  const auto va = Vt::set1(alpha);
  if (cols == NR) {
    for (std::size_t ii = 0; ii < rows; ++ii) {
      T* crow = c + ii * ldc;
      Vt::store(crow, Vt::add(Vt::load(crow), Vt::mul(va, acc[ii][0])));
      Vt::store(crow + W, Vt::add(Vt::load(crow + W), Vt::mul(va, acc[ii][1])));
    }
  } else {
    alignas(32) T tile[NR];
    for (std::size_t ii = 0; ii < rows; ++ii) {
      Vt::store(tile, Vt::mul(va, acc[ii][0]));
      Vt::store(tile + W, Vt::mul(va, acc[ii][1]));
      T* crow = c + ii * ldc;
      for (std::size_t jj = 0; jj < cols; ++jj) crow[jj] = crow[jj] + tile[jj];
    }
  }
}

template <class T>
void gemm_avx2(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, T alpha,
               const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c,
               std::size_t ldc) {
  constexpr std::size_t NR = 2 * V<T>::W;
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (beta == T(0)) {
      std::fill(crow, crow + n, T(0));
    } else if (beta != T(1)) {
      for (std::size_t j = 0; j < n; ++j) crow[j] *= beta;
    }
  }
  if (k == 0 || alpha == T(0)) return;
  auto& s = scratch<T>();
  s.a.resize(kMC * kKC);
  s.b.resize(((kNC + NR - 1) / NR) * NR * kKC);
  for (std::size_t j0 = 0; j0 < n; j0 += kNC) {
    const std::size_t nc = std::min(kNC, n - j0);
    for (std::size_t p0 = 0; p0 < k; p0 += kKC) {
      const std::size_t kc = std::min(kKC, k - p0);
      pack_b(tb, b, ldb, p0, kc, j0, nc, s.b.data());
      for (std::size_t i0 = 0; i0 < m; i0 += kMC) {
        const std::size_t mc = std::min(kMC, m - i0);
        pack_a(ta, a, lda, i0, mc, p0, kc, s.a.data());
        for (std::size_t jr = 0; jr < nc; jr += NR) {
          const T* bp = s.b.data() + (jr / NR) * NR * kc;
          const std::size_t cols = std::min(NR, nc - jr);
          for (std::size_t ir = 0; ir < mc; ir += kMR) {
            const T* ap = s.a.data() + (ir / kMR) * kMR * kc;
            micro_kernel(kc, ap, bp, alpha, c + (i0 + ir) * ldc + j0 + jr, ldc,
                         std::min(kMR, mc - ir), cols);
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise helpers.

// Runs f(vec_in..., vec_out) on full blocks and on a zero-padded tail.
template <class T, class F>
void map1(std::size_t n, const T* x, T* out, F f) {
  constexpr std::size_t W = V<T>::W;
  std::size_t i = 0;
  for (; i + W <= n; i += W) V<T>::store(out + i, f(V<T>::load(x + i)));
  if (i < n) {
    alignas(32) T tx[W] = {}, to[W];
    std::copy(x + i, x + n, tx);
    V<T>::store(to, f(V<T>::load(tx)));
    std::copy(to, to + (n - i), out + i);
  }
}

template <class T, class F>
void map2(std::size_t n, const T* x, const T* y, T* out, F f) {
  constexpr std::size_t W = V<T>::W;
  std::size_t i = 0;
  for (; i + W <= n; i += W) V<T>::store(out + i, f(V<T>::load(x + i), V<T>::load(y + i)));
  if (i < n) {
    alignas(32) T tx[W] = {}, ty[W] = {}, to[W];
    std::copy(x + i, x + n, tx);
    std::copy(y + i, y + n, ty);
    V<T>::store(to, f(V<T>::load(tx), V<T>::load(ty)));
    std::copy(to, to + (n - i), out + i);
  }
}

template <class T, class F>
void map3(std::size_t n, const T* x, const T* y, const T* z, T* out, F f) {
  constexpr std::size_t W = V<T>::W;
  std::size_t i = 0;
  for (; i + W <= n; i += W) {
    V<T>::store(out + i, f(V<T>::load(x + i), V<T>::load(y + i), V<T>::load(z + i)));
  }
  if (i < n) {
    alignas(32) T tx[W] = {}, ty[W] = {}, tz[W] = {}, to[W];
    std::copy(x + i, x + n, tx);
    std::copy(y + i, y + n, ty);
    std::copy(z + i, z + n, tz);
    V<T>::store(to, f(V<T>::load(tx), V<T>::load(ty), V<T>::load(tz)));
    std::copy(to, to + (n - i), out + i);
  }
}

template <class T>
void axpy_avx2(std::size_t n, T alpha, const T* x, T* y) {
  const auto va = V<T>::set1(alpha);
  map2<T>(n, x, y, y, [&](auto a, auto b) { return V<T>::add(b, V<T>::mul(va, a)); });
}
template <class T>
void scale_avx2(std::size_t n, T alpha, T* x) {
  const auto va = V<T>::set1(alpha);
  map1<T>(n, x, x, [&](auto a) { return V<T>::mul(a, va); });
}
template <class T>
void add_avx2(std::size_t n, const T* x, const T* y, T* out) {
  map2<T>(n, x, y, out, [](auto a, auto b) { return V<T>::add(a, b); });
}
template <class T>
void mul_avx2(std::size_t n, const T* x, const T* y, T* out) {
  map2<T>(n, x, y, out, [](auto a, auto b) { return V<T>::mul(a, b); });
}
template <class T>
void mul_acc_avx2(std::size_t n, const T* x, const T* y, T* out) {
  map3<T>(n, x, y, out, out, [](auto a, auto b, auto o) { return V<T>::add(o, V<T>::mul(a, b)); });
}

template <class T>
T dot_avx2(std::size_t n, const T* x, const T* y) {
  constexpr std::size_t W = V<T>::W;
  auto acc = V<T>::zero();
  std::size_t i = 0;
  for (; i + W <= n; i += W) acc = V<T>::fmadd(V<T>::load(x + i), V<T>::load(y + i), acc);
  T s = V<T>::hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}
template <class T>
T sum_avx2(std::size_t n, const T* x) {
  constexpr std::size_t W = V<T>::W;
  auto acc = V<T>::zero();
  std::size_t i = 0;
  for (; i + W <= n; i += W) acc = V<T>::add(acc, V<T>::load(x + i));
  T s = V<T>::hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}
template <class T>
T sum_sq_diff_avx2(std::size_t n, const T* x, T center) {
  constexpr std::size_t W = V<T>::W;
  const auto vc = V<T>::set1(center);
  auto acc = V<T>::zero();
  std::size_t i = 0;
  for (; i + W <= n; i += W) {
    const auto d = V<T>::sub(V<T>::load(x + i), vc);
    acc = V<T>::fmadd(d, d, acc);
  }
  T s = V<T>::hsum(acc);
  for (; i < n; ++i) {
    const T d = x[i] - center;
    s += d * d;
  }
  return s;
}

template <class T>
void adamw_avx2(std::size_t n, T* w, const T* g, T* m, T* v, T lr, T beta1, T beta2, T eps,
                T weight_decay, T bias1, T bias2) {
  using Vt = V<T>;
  constexpr std::size_t W = Vt::W;
  const auto b1 = Vt::set1(beta1), ob1 = Vt::set1(T(1) - beta1);
  const auto b2 = Vt::set1(beta2), ob2 = Vt::set1(T(1) - beta2);
  const auto ib1 = Vt::set1(bias1), ib2 = Vt::set1(bias2);
  const auto veps = Vt::set1(eps), vlr = Vt::set1(lr), vwd = Vt::set1(weight_decay);
  auto step = [&](T* wp, const T* gp, T* mp, T* vp) {
    const auto gv = Vt::load(gp);
    const auto mv = Vt::add(Vt::mul(b1, Vt::load(mp)), Vt::mul(ob1, gv));
    const auto vv = Vt::add(Vt::mul(b2, Vt::load(vp)), Vt::mul(Vt::mul(ob2, gv), gv));
    Vt::store(mp, mv);
    Vt::store(vp, vv);
    const auto mhat = Vt::div(mv, ib1);
    const auto vhat = Vt::div(vv, ib2);
    const auto wv = Vt::load(wp);
    const auto upd = Vt::add(Vt::div(mhat, Vt::add(Vt::sqrt(vhat), veps)), Vt::mul(vwd, wv));
    Vt::store(wp, Vt::sub(wv, Vt::mul(vlr, upd)));
  };
  std::size_t i = 0;
  for (; i + W <= n; i += W) step(w + i, g + i, m + i, v + i);
  if (i < n) {
    alignas(32) T tw[W] = {}, tg[W] = {}, tm[W] = {}, tv[W] = {};
    const std::size_t r = n - i;
    std::copy(w + i, w + n, tw);
    std::copy(g + i, g + n, tg);
    std::copy(m + i, m + n, tm);
    std::copy(v + i, v + n, tv);
    step(tw, tg, tm, tv);
    std::copy(tw, tw + r, w + i);
    std::copy(tm, tm + r, m + i);
    std::copy(tv, tv + r, v + i);
  }
}

// ---------------------------------------------------------------------------
// Transcendentals (float lanes). Cephes-style range reduction + polynomial.

inline __m256 exp_ps(__m256 x) {
  const __m256 hi = _mm256_set1_ps(88.3762626647949f);
  const __m256 lo = _mm256_set1_ps(-88.3762626647949f);
  x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);
  __m256 fx = _mm256_fmadd_ps(x, _mm256_set1_ps(1.44269504088896341f), _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(0.693359375f), x);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(-2.12194440e-4f), x);
  const __m256 z = _mm256_mul_ps(x, x);
  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
  y = _mm256_fmadd_ps(y, z, x);
  y = _mm256_add_ps(y, _mm256_set1_ps(1.0f));
  __m256i e = _mm256_cvttps_epi32(fx);
  e = _mm256_add_epi32(e, _mm256_set1_epi32(127));
  e = _mm256_slli_epi32(e, 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(e));
}

inline __m256 sigmoid_ps(__m256 x) {
  const __m256 one = _mm256_set1_ps(1.0f);
  return _mm256_div_ps(one, _mm256_add_ps(one, exp_ps(_mm256_sub_ps(_mm256_setzero_ps(), x))));
}

inline __m256 tanh_ps(__m256 x) {
  const __m256 sign_mask = _mm256_set1_ps(-0.0f);
  const __m256 ax = _mm256_andnot_ps(sign_mask, x);
  const __m256 sign = _mm256_and_ps(sign_mask, x);
  // small |x|: odd polynomial
  const __m256 z = _mm256_mul_ps(x, x);
  __m256 p = _mm256_set1_ps(-5.70498872745e-3f);
  p = _mm256_fmadd_ps(p, z, _mm256_set1_ps(2.06390887954e-2f));
  p = _mm256_fmadd_ps(p, z, _mm256_set1_ps(-5.37397155531e-2f));
  p = _mm256_fmadd_ps(p, z, _mm256_set1_ps(1.33314422036e-1f));
  p = _mm256_fmadd_ps(p, z, _mm256_set1_ps(-3.33332819422e-1f));
  const __m256 small = _mm256_fmadd_ps(_mm256_mul_ps(p, z), x, x);
  // large |x|: 1 - 2 / (exp(2|x|) + 1)
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 e2 = exp_ps(_mm256_add_ps(ax, ax));
  __m256 large = _mm256_sub_ps(one, _mm256_div_ps(_mm256_set1_ps(2.0f), _mm256_add_ps(e2, one)));
  large = _mm256_or_ps(large, sign);
  const __m256 use_small = _mm256_cmp_ps(ax, _mm256_set1_ps(0.625f), _CMP_LT_OQ);
  return _mm256_blendv_ps(large, small, use_small);
}

void silu_f32(std::size_t n, const float* x, float* out) {
  map1<float>(n, x, out, [](__m256 v) { return _mm256_mul_ps(v, sigmoid_ps(v)); });
}
void silu_backward_f32(std::size_t n, const float* x, const float* g, float* out) {
  map3<float>(n, x, g, out, out, [](__m256 xv, __m256 gv, __m256 ov) {
    const __m256 one = _mm256_set1_ps(1.0f);
    const __m256 s = sigmoid_ps(xv);
    const __m256 d = _mm256_mul_ps(s, _mm256_add_ps(one, _mm256_mul_ps(xv, _mm256_sub_ps(one, s))));
    return _mm256_add_ps(ov, _mm256_mul_ps(gv, d));
  });
}
void sigmoid_f32(std::size_t n, const float* x, float* out) {
  map1<float>(n, x, out, [](__m256 v) { return sigmoid_ps(v); });
}
void tanh_f32(std::size_t n, const float* x, float* out) {
  map1<float>(n, x, out, [](__m256 v) { return tanh_ps(v); });
}

// Double lanes keep libm transcendentals.
void silu_f64(std::size_t n, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] / (1.0 + std::exp(-x[i]));
}
void silu_backward_f64(std::size_t n, const double* x, const double* g, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-x[i]));
    out[i] += g[i] * s * (1.0 + x[i] * (1.0 - s));
  }
}
void sigmoid_f64(std::size_t n, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
}
void tanh_f64(std::size_t n, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
}

}  // namespace

const KernelTable<float>& avx2_f32() {
  static const KernelTable<float> t{&gemm_avx2<float>,     &axpy_avx2<float>,    &scale_avx2<float>,
                                    &add_avx2<float>,      &mul_avx2<float>,     &mul_acc_avx2<float>,
                                    &dot_avx2<float>,      &sum_avx2<float>,     &sum_sq_diff_avx2<float>,
                                    &silu_f32,             &silu_backward_f32,   &sigmoid_f32,
                                    &tanh_f32,             &adamw_avx2<float>};
  return t;
}

const KernelTable<double>& avx2_f64() {
  static const KernelTable<double> t{&gemm_avx2<double>,    &axpy_avx2<double>,    &scale_avx2<double>,
                                     &add_avx2<double>,     &mul_avx2<double>,     &mul_acc_avx2<double>,
                                     &dot_avx2<double>,     &sum_avx2<double>,     &sum_sq_diff_avx2<double>,
                                     &silu_f64,             &silu_backward_f64,    &sigmoid_f64,
                                     &tanh_f64,             &adamw_avx2<double>};
  return t;
}

}  // namespace seqdiff::kernels

#else

namespace seqdiff::kernels {
const KernelTable<float>& avx2_f32() { return scalar_f32(); }
const KernelTable<double>& avx2_f64() { return scalar_f64(); }
}  // namespace seqdiff::kernels

#endif
