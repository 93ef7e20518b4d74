#include "convkernel/nnsp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "convkernel/error.hpp"
#include "convkernel/simd/kernels.hpp"

namespace convkernel {

// ---- Dictionary defaults -------------------------------------------------

std::vector<double> Dictionary::correlate_at(std::span<const double> residual,
                                             std::span<const std::size_t> lags) const {
  const auto all = correlate(residual);
  std::vector<double> out(lags.size());
  for (std::size_t i = 0; i < lags.size(); ++i) out[i] = all.at(lags[i] - 1);
  return out;
}

DenseTensor Dictionary::gram(std::span<const std::size_t> lags) const {
  const std::size_t k = lags.size();
  DenseTensor g = DenseTensor::matrix(k, k);
  std::vector<double> unit(k, 0.0), column(target().size());
  for (std::size_t j = 0; j < k; ++j) {
    unit[j] = 1.0;
    synthesize(lags, unit, column);
    const auto c = correlate_at(column, lags);
    for (std::size_t i = 0; i < k; ++i) g.at(i, j) = c[i];
    unit[j] = 0.0;
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double s = 0.5 * (g.at(i, j) + g.at(j, i));
      g.at(i, j) = g.at(j, i) = s;
    }
  }
  return g;
}

std::vector<double> Dictionary::target_correlation(std::span<const std::size_t> lags) const {
  return correlate_at(target(), lags);
}

std::vector<double> Dictionary::synthesize(std::span<const std::size_t> lags,
                                           std::span<const double> v) const {
  std::vector<double> out(target().size());
  synthesize(lags, v, out);
  return out;
}

// ---- CirculantDictionary ---------------------------------------------------

CirculantDictionary::CirculantDictionary(SeriesBlock series, ConvPath path)
    : series_(series), path_(path) {
  if (series_.length < 2) throw InvalidArgument("dictionary needs series length >= 2");
  autocorr_.resize(series_.length);
  autocorr_[0] = frobenius_norm_sq(series_.values);
  const auto lagged = circ_corr_all_lags(series_, series_, path_);
  std::copy(lagged.begin(), lagged.end(), autocorr_.begin() + 1);
}

std::vector<double> CirculantDictionary::correlate(std::span<const double> residual) const {
  return circ_corr_all_lags(series_, as_series(residual, series_.length), path_);
}

std::vector<double> CirculantDictionary::correlate_at(std::span<const double> residual,
                                                      std::span<const std::size_t> lags) const {
  return circ_corr_at_lags(series_, as_series(residual, series_.length), lags);
}

void CirculantDictionary::synthesize(std::span<const std::size_t> lags, std::span<const double> v,
                                     std::span<double> out) const {
  synth_support(series_, lags, v, out);
}

DenseTensor CirculantDictionary::gram(std::span<const std::size_t> lags) const {
  const std::size_t k = lags.size();
  for (std::size_t lag : lags) {
    if (lag < 1 || lag >= series_.length) throw InvalidArgument("lag " + std::to_string(lag) + " out of range");
  }
  DenseTensor g = DenseTensor::matrix(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t d = lags[i] > lags[j] ? lags[i] - lags[j] : lags[j] - lags[i];
      g.at(i, j) = autocorr_[d];
    }
  }
  return g;
}

std::vector<double> CirculantDictionary::target_correlation(std::span<const std::size_t> lags) const {
  std::vector<double> out(lags.size());
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (lags[i] < 1 || lags[i] >= series_.length) {
      throw InvalidArgument("lag " + std::to_string(lags[i]) + " out of range");
    }
    out[i] = autocorr_[lags[i]];
  }
  return out;
}

// ---- DenseDictionary --------------------------------------------------------

DenseDictionary::DenseDictionary(DenseTensor matrix, std::vector<double> target)
    : matrix_(std::move(matrix)), target_(std::move(target)) {
  if (matrix_.order() != 2 || matrix_.rows() != target_.size()) {
    throw InvalidArgument("dense dictionary: matrix rows must equal target length");
  }
}

std::vector<double> DenseDictionary::correlate(std::span<const double> residual) const {
  std::vector<double> out(matrix_.cols(), 0.0);
  for (std::size_t i = 0; i < matrix_.rows(); ++i) {
    simd::axpy(residual[i], matrix_.row(i).data(), out.data(), matrix_.cols());
  }
  return out;
}

void DenseDictionary::synthesize(std::span<const std::size_t> lags, std::span<const double> v,
                                 std::span<double> out) const {
  for (std::size_t i = 0; i < matrix_.rows(); ++i) {
    double s = 0.0;
    for (std::size_t q = 0; q < lags.size(); ++q) s += v[q] * matrix_.at(i, lags[q] - 1);
    out[i] = s;
  }
}

DenseTensor materialize(const Dictionary& dict) {
  const std::size_t rows = dict.target().size(), cols = dict.columns();
  DenseTensor a = DenseTensor::matrix(rows, cols);
  std::vector<double> column(rows);
  const double one = 1.0;
  for (std::size_t l = 1; l <= cols; ++l) {
    const std::size_t lag = l;
    dict.synthesize(std::span<const std::size_t>(&lag, 1), std::span<const double>(&one, 1), column);
    for (std::size_t i = 0; i < rows; ++i) a.at(i, l - 1) = column[i];
  }
  return a;
}

// ---- kernels -----------------------------------------------------------------

double SparseKernel::weight_at(std::size_t lag) const {
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i] == lag) return weights[i];
  }
  return 0.0;
}

std::vector<double> kernel_to_theta(const SparseKernel& k) {
  std::vector<double> theta(k.length, 0.0);
  if (k.length == 0) return theta;
  theta[0] = 1.0;
  for (std::size_t i = 0; i < k.support.size(); ++i) theta.at(k.support[i]) = -k.weights[i];
  return theta;
}

std::string_view selection_name(Selection s) noexcept {
  return s == Selection::positive ? "positive" : "magnitude";
}

std::optional<Selection> parse_selection(std::string_view s) noexcept {
  if (s == "magnitude") return Selection::magnitude;
  if (s == "positive") return Selection::positive;
  return std::nullopt;
}

namespace {

// Largest keys first; keys closer than 1e-12 of the largest key are equal, and
// equal keys keep index order. Snapping to a grid keeps the ordering a strict
// weak order.
std::vector<std::size_t> top_by_key(const std::vector<double>& keys, std::vector<std::size_t> order,
                                    std::size_t count) {
  double scale = 0.0;
  for (std::size_t i : order) scale = std::max(scale, keys[i]);
  const double quantum = scale > 0.0 ? 1e-12 * scale : 1.0;
  std::vector<double> snapped(keys.size());
  for (std::size_t i : order) snapped[i] = std::nearbyint(keys[i] / quantum);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return snapped[a] > snapped[b]; });
  order.resize(std::min(count, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

std::vector<std::size_t> top_abs_indices(std::span<const double> values, std::size_t count) {
  std::vector<double> keys(values.size());
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) keys[i] = std::abs(values[i]);
  std::iota(order.begin(), order.end(), 0);
  return top_by_key(keys, std::move(order), count);
}

std::vector<std::size_t> top_positive_indices(std::span<const double> values, std::size_t count) {
  std::vector<double> keys(values.begin(), values.end());
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > 0.0) order.push_back(i);
  }
  return top_by_key(keys, std::move(order), count);
}

namespace {

struct Iterate {
  std::vector<std::size_t> support;
  std::vector<double> weights;
  std::vector<double> residual;
  double loss = 0.0;
};

// NNLS restricted to `lags`, via the dictionary's normal equations.
std::vector<double> restricted_nnls(const Dictionary& dict, std::span<const std::size_t> lags,
                                    double target_norm_sq, const NnlsConfig& cfg) {
  if (lags.empty()) return {};
  const DenseTensor g = dict.gram(lags);
  const auto c = dict.target_correlation(lags);
  return nnls_solve_normal(g, c, target_norm_sq, cfg).weights;
}

Iterate evaluate(const Dictionary& dict, std::vector<std::size_t> lags, std::vector<double> weights) {
  Iterate it;
  const auto target = dict.target();
  it.residual.assign(target.begin(), target.end());
  if (!lags.empty()) {
    const auto fit = dict.synthesize(lags, weights);
    for (std::size_t i = 0; i < fit.size(); ++i) it.residual[i] -= fit[i];
  }
  it.loss = frobenius_norm_sq(it.residual);
  it.support = std::move(lags);
  it.weights = std::move(weights);
  return it;
}

SparseKernel to_kernel(const Dictionary& dict, std::size_t tau, const Iterate& it, std::size_t iterations) {
  SparseKernel k;
  k.length = dict.columns() + 1;
  k.tau = tau;
  for (std::size_t i = 0; i < it.support.size(); ++i) {
    if (it.weights[i] > 0.0) {
      k.support.push_back(it.support[i]);
      k.weights.push_back(it.weights[i]);
    }
  }
  k.loss = it.loss;
  k.iterations = iterations;
  k.full_support = tau == dict.columns();
  return k;
}

void check_problem(const Dictionary& dict, std::size_t tau) {
  if (dict.columns() < 1) throw InvalidArgument("dictionary has no columns");
  if (tau < 1 || tau > dict.columns()) {
    throw InvalidArgument("sparsity level tau=" + std::to_string(tau) + " outside [1, " +
                          std::to_string(dict.columns()) + "]");
  }
  const auto target = dict.target();
  if (std::all_of(target.begin(), target.end(), [](double v) { return v == 0.0; })) {
    throw InvalidArgument("target is identically zero; every kernel fits it");
  }
}

std::vector<std::size_t> lags_from_indices(const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> lags(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) lags[i] = idx[i] + 1;
  return lags;
}

}  // namespace

SparseKernel nnsp_solve(const Dictionary& dict, std::size_t tau, const NnspConfig& cfg) {
  check_problem(dict, tau);
  const double target_norm_sq = frobenius_norm_sq(dict.target());

  Iterate current = evaluate(dict, {}, {});
  std::vector<std::vector<std::size_t>> recent;  // last two accepted supports
  std::size_t iterations = 0;

  for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
    const auto corr = dict.correlate(current.residual);
    const auto candidates = lags_from_indices(cfg.selection == Selection::positive ? top_positive_indices(corr, tau)
                                                                                   : top_abs_indices(corr, tau));

    std::vector<std::size_t> merged;
    std::set_union(current.support.begin(), current.support.end(), candidates.begin(), candidates.end(),
                   std::back_inserter(merged));

    std::vector<double> w;
    std::vector<double> pruned_w;
    std::vector<std::size_t> pruned;
    try {
      w = restricted_nnls(dict, merged, target_norm_sq, cfg.nnls);
      const auto keep = top_abs_indices(w, tau);
      for (std::size_t i : keep) pruned.push_back(merged[i]);
      pruned_w = restricted_nnls(dict, pruned, target_norm_sq, cfg.nnls);
    } catch (const NnlsError& e) {
      throw NnlsError(std::string(e.what()) + " (subspace pursuit iteration " + std::to_string(it) + ")",
                      e.best());
    }

    Iterate next = evaluate(dict, std::move(pruned), std::move(pruned_w));
    if (it > 1 && !(std::sqrt(next.loss) < std::sqrt(current.loss) - cfg.min_decrease)) {
      break;  // keep the previous iterate
    }
    current = std::move(next);
    iterations = it;

    const bool repeated = std::find(recent.begin(), recent.end(), current.support) != recent.end();
    recent.push_back(current.support);
    if (recent.size() > 2) recent.erase(recent.begin());
    if (repeated || current.loss == 0.0) break;
  }
  return to_kernel(dict, tau, current, iterations);
}

SparseKernel brute_force_oracle(const Dictionary& dict, std::size_t tau, const NnlsConfig& cfg) {
  check_problem(dict, tau);
  const std::size_t n = dict.columns();
  // C(n, tau) with an early exit past the guard.
  double combos = 1.0;
  for (std::size_t i = 0; i < tau; ++i) combos = combos * static_cast<double>(n - i) / static_cast<double>(i + 1);
  if (combos > 1e6) {
    throw InvalidArgument("brute force oracle: C(" + std::to_string(n) + ", " + std::to_string(tau) +
                          ") supports exceed the 1e6 guard");
  }
  const double target_norm_sq = frobenius_norm_sq(dict.target());

  std::vector<std::size_t> lags(tau);
  std::iota(lags.begin(), lags.end(), 1);
  Iterate best;
  bool have_best = false;
  for (;;) {
    auto w = restricted_nnls(dict, lags, target_norm_sq, cfg);
    Iterate cand = evaluate(dict, lags, std::move(w));
    // Lexicographic enumeration: only a strictly better loss replaces the incumbent.
    if (!have_best || cand.loss < best.loss - 1e-12 * std::max(best.loss, 1e-300)) {
      best = std::move(cand);
      have_best = true;
    }
    // Next combination in lexicographic order.
    std::size_t i = tau;
    while (i > 0 && lags[i - 1] == n - tau + i) --i;
    if (i == 0) break;
    ++lags[i - 1];
    for (std::size_t j = i; j < tau; ++j) lags[j] = lags[j - 1] + 1;
  }
  return to_kernel(dict, tau, best, 0);
}

SparseKernel one_shot_baseline(const Dictionary& dict, std::size_t tau, const NnlsConfig& cfg) {
  check_problem(dict, tau);
  const auto corr = dict.correlate(dict.target());
  const auto lags = lags_from_indices(top_abs_indices(corr, tau));
  auto w = restricted_nnls(dict, lags, frobenius_norm_sq(dict.target()), cfg);
  return to_kernel(dict, tau, evaluate(dict, lags, std::move(w)), 1);
}

}  // namespace convkernel
