#pragma once

// Circular convolution, circular cross-correlation over all lags, and the
// shifted-copy synthesis that lets the regression dictionary stay implicit.
//
// Lag convention: the dictionary column for lag l (1 <= l <= T-1) is the series
// delayed by l steps, a_l[t] = x[(t - l) mod T], so a weight at lag l couples
// x[t] with x[t - l]. Kernel position t = l + 1 in 1-based theta notation.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "convkernel/tensor.hpp"

namespace convkernel {

enum class ConvPath { automatic, direct, fft };

/// Below or at these lengths `automatic` uses the O(T^2) direct path; the
/// second applies to lengths that need the (slower) Bluestein transform.
/// Measured with tools/convkernel_bench on AVX2: direct wins up to about 256
/// for powers of two and past 1024 otherwise.
inline constexpr std::size_t kDirectCrossover = 256;
inline constexpr std::size_t kDirectCrossoverBluestein = 1024;

/// `count` series of equal `length`, stored back to back (time index fastest).
/// A row-major tensor whose last mode is time is exactly this layout.
struct SeriesBlock {
  std::span<const double> values;
  std::size_t count = 0;
  std::size_t length = 0;

  std::span<const double> series(std::size_t s) const { return values.subspan(s * length, length); }
};

/// Views the fibers along the last mode of `t` as series.
SeriesBlock as_series(const DenseTensor& t);
SeriesBlock as_series(std::span<const double> values, std::size_t length);

/// y[t] = sum_k theta[(t - k) mod T] x[k].
std::vector<double> circ_conv(std::span<const double> theta, std::span<const double> x,
                              ConvPath path = ConvPath::automatic);

/// Entry l-1 holds a_l^T r summed over all series, for l = 1..T-1. One
/// cross-correlation per series; A is never formed.
std::vector<double> circ_corr_all_lags(const SeriesBlock& x, const SeriesBlock& r,
                                       ConvPath path = ConvPath::automatic);

/// a_l^T r for the given lags only (direct evaluation).
std::vector<double> circ_corr_at_lags(const SeriesBlock& x, const SeriesBlock& r,
                                      std::span<const std::size_t> lags);

/// out = sum_i v[i] * a_{lags[i]}, same layout as x. `out` is overwritten.
void synth_support(const SeriesBlock& x, std::span<const std::size_t> lags,
                   std::span<const double> v, std::span<double> out);
std::vector<double> synth_support(const SeriesBlock& x, std::span<const std::size_t> lags,
                                  std::span<const double> v);

/// Circulant matrix C(c) whose first column is c, applied to every column of a
/// row-major n x R matrix. Stores only the nonzero diagonals, so sparse kernels
/// cost O(nnz * n * R).
class CirculantOperator {
 public:
  CirculantOperator() = default;
  explicit CirculantOperator(std::span<const double> first_column);

  std::size_t size() const noexcept { return n_; }
  const std::vector<std::pair<std::size_t, double>>& diagonals() const noexcept { return diags_; }

  DenseTensor apply(const DenseTensor& m) const;
  /// out += scale * C m
  void apply_add(double scale, const DenseTensor& m, DenseTensor& out) const;
  /// C^T C, itself circulant with first column g[d] = sum_k c[k] c[(k + d) mod n].
  CirculantOperator gram() const;
  /// C^T, circulant with first column c[(-d) mod n].
  CirculantOperator transposed() const;
  std::vector<double> first_column() const;

 private:
  std::size_t n_ = 0;
  std::vector<std::pair<std::size_t, double>> diags_;  // (offset d, c[d]) with c[d] != 0
};

/// C(theta) m for each column of m.
DenseTensor circulant_apply(std::span<const double> theta, const DenseTensor& m);
/// C(theta)^T C(theta) m for each column of m.
DenseTensor circulant_gram_apply(std::span<const double> theta, const DenseTensor& m);

}  // namespace convkernel
