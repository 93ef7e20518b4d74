#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace convkernel {

/// Complex DFT of a fixed length. Power-of-two lengths use an iterative radix-2
/// transform; any other length goes through Bluestein's chirp-z reduction onto
/// a power-of-two transform of length >= 2n - 1.
///
/// A plan is immutable after construction and may be shared between threads;
/// scratch space is allocated per call.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);
  ~FftPlan();
  FftPlan(FftPlan&&) noexcept;
  FftPlan& operator=(FftPlan&&) noexcept;

  std::size_t size() const noexcept { return n_; }

  /// X[k] = sum_j x[j] exp(-2 pi i j k / n), in place.
  void forward(std::span<std::complex<double>> data) const;
  /// Inverse including the 1/n factor, in place.
  void inverse(std::span<std::complex<double>> data) const;

 private:
  struct Radix2;
  struct Bluestein;

  std::size_t n_ = 0;
  std::unique_ptr<Radix2> radix2_;
  std::unique_ptr<Bluestein> bluestein_;
};

bool is_power_of_two(std::size_t n) noexcept;

}  // namespace convkernel
