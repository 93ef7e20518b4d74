#pragma once

// Non-negative least squares, min_{v >= 0} ||b - M v||^2, by the Lawson-Hanson
// active-set method. The solver works on the normal equations of the small
// problem (M^T M, M^T b), so M only has to be available as an operator.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "convkernel/error.hpp"
#include "convkernel/tensor.hpp"

namespace convkernel {

struct NnlsConfig {
  /// Relative KKT tolerance, measured against ||M^T b||_inf (or 1 if that is 0).
  double tol = 1e-10;
  /// Outer iteration cap; 0 means 3k + 30.
  std::size_t max_iter = 0;
  /// Passive-set pivots below pivot_tol * max diagonal are dropped (weight 0).
  double pivot_tol = 1e-12;
};

struct NnlsSolution {
  std::vector<double> weights;
  double residual_norm_sq = 0.0;
  /// max_i of |g_i| on the passive set and max(0, -g_i) on the active set,
  /// g = M^T (M v - b), divided by the KKT scale.
  double kkt_violation = 0.0;
  std::size_t iterations = 0;
};

/// Thrown on non-convergence or NaN; carries the best iterate reached.
class NnlsError : public SolverError {
 public:
  NnlsError(const std::string& what, NnlsSolution best) : SolverError(what), best_(std::move(best)) {}
  const NnlsSolution& best() const noexcept { return best_; }

 private:
  NnlsSolution best_;
};

/// out = op(in). Sizes: apply_m maps k -> m, apply_mt maps m -> k.
using LinearMap = std::function<void(std::span<const double> in, std::span<double> out)>;

NnlsSolution nnls_solve(const LinearMap& apply_m, const LinearMap& apply_mt, std::size_t k,
                        std::span<const double> b, const NnlsConfig& cfg = {});

/// Dense convenience wrapper; `m` is row-major (rows = len(b)).
NnlsSolution nnls_solve_dense(const DenseTensor& m, std::span<const double> b,
                              const NnlsConfig& cfg = {});

/// Core solver on the normal equations: gram = M^T M (k x k), mtb = M^T b,
/// b_norm_sq = ||b||^2 (used only for the reported residual).
NnlsSolution nnls_solve_normal(const DenseTensor& gram, std::span<const double> mtb, double b_norm_sq,
                               const NnlsConfig& cfg = {});

}  // namespace convkernel
