#include "convkernel/fft.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "convkernel/error.hpp"
#include "convkernel/simd/kernels.hpp"

namespace convkernel {

using cplx = std::complex<double>;

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

namespace {

// Plain complex product; operator* on std::complex goes through the C99
// NaN-recovery path, which is several times slower.
inline cplx mul(cplx a, cplx b) noexcept {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

inline cplx mul_conj(cplx a, cplx b) noexcept {
  return {a.real() * b.real() + a.imag() * b.imag(), a.imag() * b.real() - a.real() * b.imag()};
}

}  // namespace

struct FftPlan::Radix2 {
  std::size_t n;
  std::vector<std::size_t> bitrev;
  std::vector<cplx> twiddle;  // exp(-2 pi i k / n), k < n/2

  explicit Radix2(std::size_t len) : n(len), bitrev(len), twiddle(len / 2) {
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
      bitrev[i] = r;
    }
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle[k] = {std::cos(angle), std::sin(angle)};
    }
  }

  void run(cplx* a) const {
    for (std::size_t i = 0; i < n; ++i) {
      if (i < bitrev[i]) std::swap(a[i], a[bitrev[i]]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t step = n / len;
      for (std::size_t start = 0; start < n; start += len) {
        for (std::size_t j = 0; j < half; ++j) {
          const cplx w = twiddle[j * step];
          const cplx u = a[start + j];
          const cplx v = mul(a[start + j + half], w);
          a[start + j] = u + v;
          a[start + j + half] = u - v;
        }
      }
    }
  }
};

struct FftPlan::Bluestein {
  std::size_t n;
  std::size_t m;
  Radix2 inner;
  std::vector<cplx> chirp;      // exp(i pi j^2 / n)
  std::vector<cplx> chirp_fft;  // DFT of the symmetric chirp filter, length m

  static std::size_t padded(std::size_t len) {
    std::size_t m = 1;
    while (m < 2 * len - 1) m <<= 1;
    return m;
  }

  explicit Bluestein(std::size_t len) : n(len), m(padded(len)), inner(m), chirp(len), chirp_fft(m) {
    const std::size_t two_n = 2 * n;
    for (std::size_t j = 0; j < n; ++j) {
      // j^2 mod 2n keeps the angle argument small for large n.
      const std::size_t jj = static_cast<std::size_t>((static_cast<unsigned long long>(j) * j) % two_n);
      const double angle = std::numbers::pi * static_cast<double>(jj) / static_cast<double>(n);
      chirp[j] = {std::cos(angle), std::sin(angle)};
    }
    chirp_fft[0] = chirp[0];
    for (std::size_t j = 1; j < n; ++j) {
      chirp_fft[j] = chirp[j];
      chirp_fft[m - j] = chirp[j];
    }
    inner.run(chirp_fft.data());
  }

  void run(cplx* x) const {
    std::vector<cplx> work(m, cplx{});
    for (std::size_t j = 0; j < n; ++j) work[j] = mul_conj(x[j], chirp[j]);
    inner.run(work.data());
    simd::active().cmul_inplace(work.data(), chirp_fft.data(), m);
    // Inverse of the inner transform through conjugation.
    for (auto& v : work) v = std::conj(v);
    inner.run(work.data());
    const double scale = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) x[k] = scale * std::conj(mul(work[k], chirp[k]));
  }
};

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (n == 0) throw InvalidArgument("FFT length must be positive");
  if (is_power_of_two(n)) {
    radix2_ = std::make_unique<Radix2>(n);
  } else {
    bluestein_ = std::make_unique<Bluestein>(n);
  }
}

FftPlan::~FftPlan() = default;
FftPlan::FftPlan(FftPlan&&) noexcept = default;
FftPlan& FftPlan::operator=(FftPlan&&) noexcept = default;

void FftPlan::forward(std::span<cplx> data) const {
  if (data.size() != n_) throw InvalidArgument("FFT buffer length does not match plan");
  if (radix2_) {
    radix2_->run(data.data());
  } else {
    bluestein_->run(data.data());
  }
}

void FftPlan::inverse(std::span<cplx> data) const {
  for (auto& v : data) v = std::conj(v);
  forward(data);
  const double scale = 1.0 / static_cast<double>(n_);
  for (auto& v : data) v = std::conj(v) * scale;
}

}  // namespace convkernel
