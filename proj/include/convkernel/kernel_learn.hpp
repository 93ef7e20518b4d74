#pragma once

// Kernel learning for univariate, multivariate and third-order series. All
// three regimes minimise sum over series of ||theta * x_s||^2 with
// theta = (1, -w), w >= 0, ||w||_0 <= tau, and all three reduce to the same
// sparse regression; they differ only in how many series share the time axis.

#include <cstddef>
#include <optional>
#include <string_view>

#include "convkernel/nnsp.hpp"
#include "convkernel/tensor.hpp"

namespace convkernel {

enum class Regime { univariate, multivariate, tensor3 };

std::string_view regime_name(Regime r) noexcept;
/// Accepts "uni"/"univariate", "multi"/"multivariate", "tensor"/"tensor3".
std::optional<Regime> parse_regime(std::string_view s) noexcept;

/// Series sharing one time axis, which is always the last mode.
/// univariate: order 1 (T); multivariate: order 2 (N x T, rows are series);
/// tensor3: order 3 (M x N x T, fibers along mode 3 are series).
class SeriesBundle {
 public:
  SeriesBundle(Regime kind, DenseTensor data);

  Regime kind() const noexcept { return kind_; }
  const DenseTensor& data() const noexcept { return data_; }
  std::size_t length() const noexcept { return data_.dims().back(); }
  std::size_t series_count() const noexcept { return data_.size() / length(); }
  SeriesBlock series() const { return as_series(data_); }

 private:
  Regime kind_;
  DenseTensor data_;
};

/// Regime implied by the order of `t` (1, 2 or 3).
SeriesBundle bundle_from_tensor(DenseTensor t);

/// Series taken along an arbitrary mode: that mode becomes the time axis. This
/// is how spatial kernels are learned (mode 1 or 2 of an M x N x T tensor).
SeriesBundle bundle_along_mode(const DenseTensor& t, std::size_t mode);

/// Each series minus its own mean.
SeriesBundle mean_centered(const SeriesBundle& b);

struct LearnConfig {
  NnspConfig solver;
};

/// Learns one kernel shared by every series in the bundle.
///
/// If every series is constant, every lag fits perfectly; the lag-1 unit kernel
/// is returned with `degenerate` set instead of an arbitrary support.
SparseKernel learn_kernel(const SeriesBundle& bundle, std::size_t tau, const LearnConfig& cfg = {});

/// sum_s ||theta * x_s||^2 computed by circular convolution.
double evaluate_loss(const SeriesBundle& bundle, const SparseKernel& kernel);

}  // namespace convkernel
