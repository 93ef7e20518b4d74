#include "convkernel/simd/kernels.hpp"

namespace convkernel::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_squares_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void hadamard_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_conj_acc_scalar(const std::complex<double>* a, const std::complex<double>* b,
                         std::complex<double>* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    acc[i] += std::complex<double>(ar * br + ai * bi, ai * br - ar * bi);
  }
}

void cmul_inplace_scalar(std::complex<double>* a, const std::complex<double>* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    a[i] = std::complex<double>(ar * br - ai * bi, ar * bi + ai * br);
  }
}

}  // namespace

const KernelTable& scalar_kernels() noexcept {
  static const KernelTable table{dot_scalar,      sum_squares_scalar,  axpy_scalar,
                                 hadamard_scalar, mul_conj_acc_scalar, cmul_inplace_scalar};
  return table;
}

}  // namespace convkernel::simd
