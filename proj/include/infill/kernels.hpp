#pragma once

// Dense inner-loop kernels used by the tensor ops. Every kernel has a plain
// scalar reference implementation and, on x86-64, an AVX2/FMA variant. The
// variant is chosen once at runtime from CPUID, overridable with the
// INFILL_SIMD environment variable (scalar | avx2 | auto).

#include <cstddef>
#include <string_view>

namespace infill::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

template <class T>
struct Table {
  // C[m x n] = (C +) A[m x k] * B[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
                  bool accumulate);
  // C[m x n] = (C +) A[m x k] * B[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
                  bool accumulate);
  // C[m x n] = (C +) A[k x m]^T * B[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
                  bool accumulate);
  T (*dot)(std::size_t n, const T* x, const T* y);
  // y += alpha * x
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
  // out = x + y
  void (*add)(std::size_t n, const T* x, const T* y, T* out);
  // out = x * y
  void (*mul)(std::size_t n, const T* x, const T* y, T* out);
  // y += x * z
  void (*mul_acc)(std::size_t n, const T* x, const T* z, T* y);
};

template <class T>
const Table<T>& scalar_table();

/// Returns nullptr when the variant was not compiled in.
template <class T>
const Table<T>* avx2_table();

bool isa_supported(Isa isa);

/// The ISA the dispatcher is using right now.
Isa active_isa();

/// Forces a variant. Throws ConfigError when the CPU (or build) lacks it.
void set_active_isa(Isa isa);

template <class T>
const Table<T>& table(Isa isa);

template <class T>
const Table<T>& active() {
  return table<T>(active_isa());
}

}  // namespace infill::kernels
