#pragma once

// Non-negative subspace pursuit over a lag dictionary.
//
// The regression target is a stack of series and column l (1 <= l <= T-1) of
// the dictionary is the same stack with every series circularly delayed by l.
// Dictionaries expose only the products the solver needs, so A is never built.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "convkernel/circconv.hpp"
#include "convkernel/nnls.hpp"
#include "convkernel/tensor.hpp"

namespace convkernel {

class Dictionary {
 public:
  virtual ~Dictionary() = default;

  /// Number of columns; columns are addressed by lag 1..columns().
  virtual std::size_t columns() const = 0;
  virtual std::span<const double> target() const = 0;

  /// A^T r; entry l-1 belongs to lag l.
  virtual std::vector<double> correlate(std::span<const double> residual) const = 0;
  /// a_l^T r for selected lags.
  virtual std::vector<double> correlate_at(std::span<const double> residual,
                                           std::span<const std::size_t> lags) const;
  /// out = A_S v.
  virtual void synthesize(std::span<const std::size_t> lags, std::span<const double> v,
                          std::span<double> out) const = 0;
  /// A_S^T A_S. The default builds it from |S| synthesize/correlate_at calls.
  virtual DenseTensor gram(std::span<const std::size_t> lags) const;
  /// A_S^T target.
  virtual std::vector<double> target_correlation(std::span<const std::size_t> lags) const;

  std::vector<double> synthesize(std::span<const std::size_t> lags, std::span<const double> v) const;
};

/// Implicit circulant dictionary over stacked series. Univariate, multivariate
/// (N x T) and third-order (M x N x T) data all reduce to this: only the number
/// of series changes. The series storage must outlive the dictionary.
///
/// The Gram matrix of any support is read off the cyclic autocorrelation of the
/// data, a_i^T a_j = R(|i - j|), which is computed once at construction.
class CirculantDictionary final : public Dictionary {
 public:
  explicit CirculantDictionary(SeriesBlock series, ConvPath path = ConvPath::automatic);

  std::size_t columns() const override { return series_.length - 1; }
  std::span<const double> target() const override { return series_.values; }
  std::vector<double> correlate(std::span<const double> residual) const override;
  std::vector<double> correlate_at(std::span<const double> residual,
                                   std::span<const std::size_t> lags) const override;
  void synthesize(std::span<const std::size_t> lags, std::span<const double> v,
                  std::span<double> out) const override;
  using Dictionary::synthesize;
  DenseTensor gram(std::span<const std::size_t> lags) const override;
  std::vector<double> target_correlation(std::span<const std::size_t> lags) const override;

  const SeriesBlock& series() const noexcept { return series_; }

 private:
  SeriesBlock series_;
  ConvPath path_;
  std::vector<double> autocorr_;  // R(d), d = 0..T-1
};

/// Explicit column matrix (rows = target length). For tests and small problems.
class DenseDictionary final : public Dictionary {
 public:
  DenseDictionary(DenseTensor matrix, std::vector<double> target);

  std::size_t columns() const override { return matrix_.cols(); }
  std::span<const double> target() const override { return target_; }
  std::vector<double> correlate(std::span<const double> residual) const override;
  void synthesize(std::span<const std::size_t> lags, std::span<const double> v,
                  std::span<double> out) const override;
  using Dictionary::synthesize;

  const DenseTensor& matrix() const noexcept { return matrix_; }

 private:
  DenseTensor matrix_;
  std::vector<double> target_;
};

/// Every column of `dict` written out: rows = target length, cols = columns().
DenseTensor materialize(const Dictionary& dict);

/// How candidate lags are picked from the correlations A^T r. `magnitude`
/// takes the largest |A^T r| as Algorithm 1 is written; `positive` takes the
/// largest positive entries only, since a lag with negative correlation always
/// gets zero weight from the non-negative fit.
enum class Selection { magnitude, positive };

std::string_view selection_name(Selection s) noexcept;
std::optional<Selection> parse_selection(std::string_view s) noexcept;

struct NnspConfig {
  std::size_t max_iter = 30;
  Selection selection = Selection::magnitude;
  /// An iteration is accepted only if ||r|| drops by more than this.
  double min_decrease = 0.0;
  NnlsConfig nnls;
};

/// A learned kernel theta = (1, -w). Lags are ascending; every weight is > 0.
struct SparseKernel {
  std::size_t length = 0;  // T
  std::size_t tau = 0;
  std::vector<std::size_t> support;
  std::vector<double> weights;
  double loss = 0.0;  // ||target - A w||^2
  std::size_t iterations = 0;
  /// Set when tau == T-1 (plain NNLS over every lag).
  bool full_support = false;
  /// Set by kernel learning when every series is constant and the lag-1
  /// fallback was returned.
  bool degenerate = false;

  double weight_at(std::size_t lag) const;
};

/// Dense theta of length T: theta[0] = 1, theta[l] = -w_l.
std::vector<double> kernel_to_theta(const SparseKernel& k);

/// Greedy non-negative subspace pursuit. Each iteration merges the tau lags
/// with the largest |A^T r| into the support, solves NNLS, keeps the tau
/// largest weights, solves NNLS again and updates the residual. Stops when the
/// support repeats one of the last two, when ||r|| stops decreasing (the
/// previous iterate is kept), or after max_iter iterations. Ties in every
/// top-tau selection go to the smaller lag.
SparseKernel nnsp_solve(const Dictionary& dict, std::size_t tau, const NnspConfig& cfg = {});

/// Exhaustive search over all C(T-1, tau) supports with NNLS on each. Ties go to
/// the lexicographically smallest support. Refuses more than 1e6 supports.
SparseKernel brute_force_oracle(const Dictionary& dict, std::size_t tau, const NnlsConfig& cfg = {});

/// NNLS on the tau lags most correlated with the target, no iteration.
SparseKernel one_shot_baseline(const Dictionary& dict, std::size_t tau, const NnlsConfig& cfg = {});

/// Indices of the `count` largest |values|, ascending. Values within 1e-12 of
/// the largest magnitude of each other count as ties, and ties prefer the
/// smaller index, so mathematically equal correlations (lags l and T-l of a
/// single series) do not get split by rounding.
std::vector<std::size_t> top_abs_indices(std::span<const double> values, std::size_t count);
/// Same ordering over the strictly positive values only; may return fewer than `count`.
std::vector<std::size_t> top_positive_indices(std::span<const double> values, std::size_t count);

}  // namespace convkernel
