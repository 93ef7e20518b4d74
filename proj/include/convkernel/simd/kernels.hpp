#pragma once

// Data-parallel inner loops. Each kernel exists as a portable scalar reference
// and, on x86-64, as an AVX2/FMA variant compiled separately and picked at
// runtime from CPUID. The two variants agree to rounding (reduction order
// differs); tests/simd_equivalence_test.cpp pins the tolerance.
//
// Set CONVKERNEL_SIMD=scalar in the environment to force the reference path.

#include <complex>
#include <cstddef>
#include <string_view>

namespace convkernel::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// sum_i x[i]^2
  double (*sum_squares)(const double* x, std::size_t n);
  /// y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// out[i] = a[i] * b[i]
  void (*hadamard)(const double* a, const double* b, double* out, std::size_t n);
  /// acc[i] += a[i] * conj(b[i])
  void (*mul_conj_acc)(const std::complex<double>* a, const std::complex<double>* b,
                       std::complex<double>* acc, std::size_t n);
  /// a[i] *= b[i] (complex)
  void (*cmul_inplace)(std::complex<double>* a, const std::complex<double>* b, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;
#if defined(CONVKERNEL_HAVE_AVX2)
const KernelTable& avx2_kernels() noexcept;
#endif

/// True when the AVX2 variant was compiled in and the CPU supports AVX2+FMA.
bool avx2_available() noexcept;

/// Table for `isa`; falls back to scalar when the requested ISA is unavailable.
const KernelTable& kernels_for(Isa isa) noexcept;

/// The table the library uses. Chosen once, on first call.
const KernelTable& active() noexcept;
Isa active_isa() noexcept;
std::string_view isa_name(Isa isa) noexcept;

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline double sum_squares(const double* x, std::size_t n) { return active().sum_squares(x, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void hadamard(const double* a, const double* b, double* out, std::size_t n) {
  active().hadamard(a, b, out, n);
}

}  // namespace convkernel::simd
