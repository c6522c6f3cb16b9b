#include <cmath>
#include <vector>

#include "seqdiff/kernels/kernels.hpp"

namespace seqdiff::kernels {
namespace {

template <class T>
void gemm_ref(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
              std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc) {
  std::vector<T> acc(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(acc.begin(), acc.end(), T(0));
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ta == Trans::no ? a[i * lda + p] : a[p * lda + i];
      if (tb == Trans::no) {
        const T* brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) acc[j] += av * b[j * ldb + p];
      }
    }
    T* crow = c + i * ldc;
    if (beta == T(0)) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = alpha * acc[j];
    } else {
      for (std::size_t j = 0; j < n; ++j) crow[j] = alpha * acc[j] + beta * crow[j];
    }
  }
}

template <class T>
void axpy_ref(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}
template <class T>
void scale_ref(std::size_t n, T alpha, T* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}
template <class T>
void add_ref(std::size_t n, const T* x, const T* y, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}
template <class T>
void mul_ref(std::size_t n, const T* x, const T* y, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}
template <class T>
void mul_acc_ref(std::size_t n, const T* x, const T* y, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] += x[i] * y[i];
}
template <class T>
T dot_ref(std::size_t n, const T* x, const T* y) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}
template <class T>
T sum_ref(std::size_t n, const T* x) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}
template <class T>
T sum_sq_diff_ref(std::size_t n, const T* x, T center) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T d = x[i] - center;
    s += d * d;
  }
  return s;
}
template <class T>
void silu_ref(std::size_t n, const T* x, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] / (T(1) + std::exp(-x[i]));
}
template <class T>
void silu_backward_ref(std::size_t n, const T* x, const T* g, T* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const T s = T(1) / (T(1) + std::exp(-x[i]));
    out[i] += g[i] * s * (T(1) + x[i] * (T(1) - s));
  }
}
template <class T>
void sigmoid_ref(std::size_t n, const T* x, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = T(1) / (T(1) + std::exp(-x[i]));
}
template <class T>
void tanh_ref(std::size_t n, const T* x, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
}
template <class T>
void adamw_ref(std::size_t n, T* w, const T* g, T* m, T* v, T lr, T beta1, T beta2, T eps,
               T weight_decay, T bias1, T bias2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    const T mhat = m[i] / bias1;
    const T vhat = v[i] / bias2;
    w[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * w[i]);
  }
}

template <class T>
KernelTable<T> make_scalar() {
  return KernelTable<T>{&gemm_ref<T>,        &axpy_ref<T>,    &scale_ref<T>,       &add_ref<T>,
                        &mul_ref<T>,         &mul_acc_ref<T>, &dot_ref<T>,         &sum_ref<T>,
                        &sum_sq_diff_ref<T>, &silu_ref<T>,    &silu_backward_ref<T>, &sigmoid_ref<T>,
                        &tanh_ref<T>,        &adamw_ref<T>};
}

}  // namespace

const KernelTable<float>& scalar_f32() {
  static const KernelTable<float> t = make_scalar<float>();
  return t;
}
const KernelTable<double>& scalar_f64() {
  static const KernelTable<double> t = make_scalar<double>();
  return t;
}

}  // namespace seqdiff::kernels
