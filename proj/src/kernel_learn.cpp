#include "convkernel/kernel_learn.hpp"

#include <algorithm>
#include <string>

#include "convkernel/circconv.hpp"
#include "convkernel/error.hpp"

namespace convkernel {

std::string_view regime_name(Regime r) noexcept {
  switch (r) {
    case Regime::univariate:
      return "univariate";
    case Regime::multivariate:
      return "multivariate";
    case Regime::tensor3:
      return "tensor3";
  }
  return "unknown";
}

std::optional<Regime> parse_regime(std::string_view s) noexcept {
  if (s == "uni" || s == "univariate") return Regime::univariate;
  if (s == "multi" || s == "multivariate") return Regime::multivariate;
  if (s == "tensor" || s == "tensor3") return Regime::tensor3;
  return std::nullopt;
}

SeriesBundle::SeriesBundle(Regime kind, DenseTensor data) : kind_(kind), data_(std::move(data)) {
  const std::size_t expected = kind == Regime::univariate ? 1 : kind == Regime::multivariate ? 2 : 3;
  if (data_.order() != expected) {
    throw InvalidArgument(std::string(regime_name(kind)) + " bundle needs an order-" +
                          std::to_string(expected) + " tensor, got order " +
                          std::to_string(data_.order()));
  }
  if (data_.dims().back() < 3) {
    throw InvalidArgument("series length must be at least 3, got " + std::to_string(data_.dims().back()));
  }
}

SeriesBundle bundle_from_tensor(DenseTensor t) {
  switch (t.order()) {
    case 1:
      return SeriesBundle(Regime::univariate, std::move(t));
    case 2:
      return SeriesBundle(Regime::multivariate, std::move(t));
    case 3:
      return SeriesBundle(Regime::tensor3, std::move(t));
    default:
      throw InvalidArgument("series data must have order 1, 2 or 3, got " + std::to_string(t.order()));
  }
}

SeriesBundle bundle_along_mode(const DenseTensor& t, std::size_t mode) {
  return bundle_from_tensor(move_mode_to_last(t, mode));
}

SeriesBundle mean_centered(const SeriesBundle& b) {
  DenseTensor data = b.data();
  const std::size_t n = b.length();
  for (std::size_t s = 0; s < b.series_count(); ++s) {
    auto row = data.data().subspan(s * n, n);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(n);
    for (double& v : row) v -= mean;
  }
  return SeriesBundle(b.kind(), std::move(data));
}

SparseKernel learn_kernel(const SeriesBundle& bundle, std::size_t tau, const LearnConfig& cfg) {
  const std::size_t n = bundle.length();
  if (tau < 1 || tau > n - 2) {
    throw InvalidArgument("tau=" + std::to_string(tau) + " outside [1, T-2] for T=" + std::to_string(n));
  }
  const auto block = bundle.series();
  const auto values = block.values;
  if (std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; })) {
    throw InvalidArgument("all series are identically zero");
  }
  bool all_constant = true;
  for (std::size_t s = 0; s < block.count && all_constant; ++s) {
    const auto x = block.series(s);
    all_constant = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
  }
  if (all_constant) {
    SparseKernel k;
    k.length = n;
    k.tau = tau;
    k.support = {1};
    k.weights = {1.0};
    k.degenerate = true;
    k.loss = evaluate_loss(bundle, k);
    return k;
  }
  const CirculantDictionary dict(block);
  return nnsp_solve(dict, tau, cfg.solver);
}

double evaluate_loss(const SeriesBundle& bundle, const SparseKernel& kernel) {
  const std::size_t n = bundle.length();
  if (kernel.length != n) {
    throw InvalidArgument("kernel length " + std::to_string(kernel.length) + " != series length " +
                          std::to_string(n));
  }
  const auto theta = kernel_to_theta(kernel);
  const auto block = bundle.series();
  double loss = 0.0;
  for (std::size_t s = 0; s < block.count; ++s) {
    const auto y = circ_conv(theta, block.series(s));
    loss += frobenius_norm_sq(y);
  }
  return loss;
}

}  // namespace convkernel
