#pragma once

// Masked CP factorization of a third-order tensor with circulant (kernel)
// regularizers on the factor matrices:
//
//   f(W, U, V) = 1/2 || P_Omega(Y_(1) - W (V kr U)^T) ||_F^2
//              + gamma/2 (||Theta_w W||_F^2 + ||Theta_u U||_F^2 + ||Theta_v V||_F^2)
//
// where Theta_x is the circulant matrix whose first column is theta_x. Absent
// kernels drop their term. Minimised by alternating over W, U, V; each block
// is an SPD linear system solved by conjugate gradient.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "convkernel/circconv.hpp"
#include "convkernel/tensor.hpp"

namespace convkernel {

using Shape3 = std::array<std::size_t, 3>;

/// Observed index set Omega over an M x N x T tensor, stored as a packed bitset
/// in row-major flat order.
class ObservationMask {
 public:
  ObservationMask() = default;
  /// All entries observed (or none, with `observed = false`).
  explicit ObservationMask(Shape3 shape, bool observed = true);

  const Shape3& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return size_; }
  bool observed(std::size_t flat) const noexcept { return (words_[flat >> 6] >> (flat & 63)) & 1u; }
  void set(std::size_t flat, bool observed) noexcept;
  std::size_t observed_count() const noexcept;

  /// P_Omega^perp as a mask.
  ObservationMask complement() const;
  /// Zeroes every unobserved entry of `values` (P_Omega applied in place).
  void project(std::span<double> values) const;

  std::optional<std::uint64_t> seed;
  std::optional<double> missing_rate;

  bool operator==(const ObservationMask& o) const {
    return shape_ == o.shape_ && words_ == o.words_;
  }

 private:
  Shape3 shape_{0, 0, 0};
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Uniformly random missing entries, exactly round((1 - rate) * MNT) observed.
/// Partial Fisher-Yates over flat indices driven by Rng(seed), so the bitset is
/// identical on every platform.
ObservationMask make_mask(Shape3 shape, double missing_rate, std::uint64_t seed);

Shape3 shape3(const DenseTensor& t);

/// First columns of the circulant regularizers, one per mode, each optional.
struct ModeKernels {
  std::optional<std::vector<double>> w;  // length M
  std::optional<std::vector<double>> u;  // length N
  std::optional<std::vector<double>> v;  // length T

  const std::optional<std::vector<double>>& for_mode(std::size_t mode) const;
};

struct FactorModel {
  DenseTensor w;  // M x R
  DenseTensor u;  // N x R
  DenseTensor v;  // T x R
  double gamma = 0.0;
  ModeKernels kernels;

  std::size_t rank() const noexcept { return w.cols(); }
  DenseTensor& factor(std::size_t mode);
  const DenseTensor& factor(std::size_t mode) const;
  /// Yhat[m, n, t] = sum_r W[m, r] U[n, r] V[t, r].
  DenseTensor reconstruct() const;
};

/// Gaussian(0, 1/sqrt(R)) factors from Rng(seed), drawn W then U then V.
FactorModel init_factors(Shape3 shape, std::size_t rank, std::uint64_t seed);

/// Validates shapes of model, data, mask and kernel lengths.
void check_consistent(const FactorModel& model, const DenseTensor& y, const ObservationMask& mask);

double tf_objective(const FactorModel& model, const DenseTensor& y, const ObservationMask& mask);

struct FactorGradients {
  DenseTensor w, u, v;
};

FactorGradients tf_gradients(const FactorModel& model, const DenseTensor& y, const ObservationMask& mask);

/// The SPD system for one factor with the other two fixed:
///   L(X) = rows of P_Omega(X M^T) M  +  gamma Theta^T Theta X  +  eps X
///   b    = P_Omega(Y)_(k) M + eps X_current
/// where M is the Khatri-Rao product of the other two factors. The eps term is
/// a proximal ridge around the current factor, so it cannot raise f.
class FactorSystem {
 public:
  FactorSystem(const FactorModel& model, const DenseTensor& y, const ObservationMask& mask,
               std::size_t mode, double ridge);

  DenseTensor apply(const DenseTensor& x) const;
  const DenseTensor& rhs() const noexcept { return rhs_; }
  double epsilon() const noexcept { return eps_; }
  std::size_t mode() const noexcept { return mode_; }

 private:
  std::size_t mode_;
  std::size_t rows_, rank_;
  std::vector<double> blocks_;  // rows_ blocks of rank_ x rank_
  std::optional<CirculantOperator> reg_;  // Theta^T Theta
  double gamma_;
  double eps_;
  DenseTensor rhs_;
};

struct CgResult {
  DenseTensor x;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Conjugate gradient on matrices (Frobenius inner product), starting at x0.
/// Throws SolverError on non-positive curvature or NaN.
CgResult conjugate_gradient(const std::function<DenseTensor(const DenseTensor&)>& op, const DenseTensor& b,
                            DenseTensor x0, double tol, std::size_t max_iter);

struct TfConfig {
  double cg_tol = 1e-8;
  std::size_t cg_iters = 100;
  std::size_t outer_iters = 50;
  double outer_tol = 1e-6;
  /// eps = ridge * mean diagonal of the data term (or ridge if that is 0).
  double ridge = 1e-8;
  std::uint64_t seed = 0;
};

struct FitReport {
  FactorModel model;
  /// Objective at initialization followed by one value per outer iteration.
  std::vector<double> objective_history;
  std::size_t outer_iterations = 0;
  std::size_t cg_iterations = 0;
  bool converged = false;
};

/// One block update (mode 1, 2 or 3) of the alternating scheme; returns CG iterations.
std::size_t update_factor(FactorModel& model, const DenseTensor& y, const ObservationMask& mask,
                          std::size_t mode, const TfConfig& cfg);

/// Alternating minimization W -> U -> V until the relative objective change
/// drops under outer_tol or outer_iters is reached.
FitReport tf_fit(const DenseTensor& y, const ObservationMask& mask, std::size_t rank, double gamma,
                 const ModeKernels& kernels, const TfConfig& cfg = {});

enum class Projection { observed, missing, all };

/// ||P(estimate - truth)||_2 / ||P(truth)||_2 * 100 over the chosen projection.
double rse(const DenseTensor& estimate, const DenseTensor& truth, const ObservationMask& mask,
           Projection projection = Projection::observed);

}  // namespace convkernel
