#pragma once
// Data-parallel numeric kernels behind the autograd layer.
//
// Every kernel exists as a scalar reference implementation and, on x86-64,
// as an AVX2+FMA variant. The active table is picked once at startup from
// CPUID (overridable with SEQDIFF_ISA=scalar|avx2) and stays fixed for the
// lifetime of the process, so results are reproducible run to run.

#include <cstddef>
#include <string_view>

namespace seqdiff::kernels {

enum class Isa { scalar, avx2 };

enum class Trans { no, yes };

template <class T>
struct KernelTable {
  // Row-major C[M x N] = alpha * op(A) * op(B) + beta * C.
  // Each output element accumulates over k in increasing order with a
  // fixed blocking, so rows never influence each other's bits.
  void (*gemm)(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, T alpha,
               const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c,
               std::size_t ldc);
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);          // y += alpha x
  void (*scale)(std::size_t n, T alpha, T* x);                     // x *= alpha
  void (*add)(std::size_t n, const T* x, const T* y, T* out);      // out = x + y
  void (*mul)(std::size_t n, const T* x, const T* y, T* out);      // out = x * y
  void (*mul_acc)(std::size_t n, const T* x, const T* y, T* out);  // out += x * y
  T (*dot)(std::size_t n, const T* x, const T* y);
  T (*sum)(std::size_t n, const T* x);
  T (*sum_sq_diff)(std::size_t n, const T* x, T center);  // sum (x - center)^2
  void (*silu)(std::size_t n, const T* x, T* out);
  // out += g * silu'(x)
  void (*silu_backward)(std::size_t n, const T* x, const T* g, T* out);
  void (*sigmoid)(std::size_t n, const T* x, T* out);
  void (*tanh)(std::size_t n, const T* x, T* out);
  // Decoupled-weight-decay Adam update over one parameter buffer.
  void (*adamw)(std::size_t n, T* w, const T* g, T* m, T* v, T lr, T beta1, T beta2, T eps,
                T weight_decay, T bias1, T bias2);
};

const KernelTable<float>& table_f32();
const KernelTable<double>& table_f64();

template <class T>
const KernelTable<T>& table();
template <>
inline const KernelTable<float>& table<float>() {
  return table_f32();
}
template <>
inline const KernelTable<double>& table<double>() {
  return table_f64();
}

// Explicit access for equivalence tests and benchmarks.
const KernelTable<float>& scalar_f32();
const KernelTable<double>& scalar_f64();
bool avx2_available();
const KernelTable<float>& avx2_f32();  // only valid when avx2_available()
const KernelTable<double>& avx2_f64();

Isa active_isa();
std::string_view isa_name(Isa isa);

}  // namespace seqdiff::kernels
