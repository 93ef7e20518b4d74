#include "convkernel/tensorfact.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "convkernel/error.hpp"
#include "convkernel/random.hpp"
#include "convkernel/simd/kernels.hpp"

namespace convkernel {
namespace {

std::string shape_string(const Shape3& s) {
  return std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" + std::to_string(s[2]);
}

void check_mode3(std::size_t mode) {
  if (mode < 1 || mode > 3) throw InvalidArgument("factor mode must be 1, 2 or 3, got " + std::to_string(mode));
}

// Residual P_Omega(Y - Yhat) as a dense M x N x T buffer.
DenseTensor masked_residual(const FactorModel& model, const DenseTensor& y, const ObservationMask& mask) {
  const auto [M, N, T] = mask.shape();
  const std::size_t R = model.rank();
  DenseTensor e({M, N, T});
  std::vector<double> wu(R);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t n = 0; n < N; ++n) {
      simd::hadamard(model.w.row(m).data(), model.u.row(n).data(), wu.data(), R);
      const std::size_t base = (m * N + n) * T;
      for (std::size_t t = 0; t < T; ++t) {
        if (!mask.observed(base + t)) continue;
        e[base + t] = y[base + t] - simd::dot(wu.data(), model.v.row(t).data(), R);
      }
    }
  }
  return e;
}

// out = data_(k) * (Khatri-Rao product of the other two factors) for a dense
// M x N x T `data`.
DenseTensor mttkrp(const FactorModel& model, const DenseTensor& data, std::size_t mode) {
  const std::size_t M = model.w.rows(), N = model.u.rows(), T = model.v.rows();
  const std::size_t R = model.rank();
  DenseTensor out = DenseTensor::matrix(mode == 1 ? M : mode == 2 ? N : T, R);
  std::vector<double> tmp(R), wu(R);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t n = 0; n < N; ++n) {
      const double* e = data.data().data() + (m * N + n) * T;
      if (mode == 3) {
        simd::hadamard(model.w.row(m).data(), model.u.row(n).data(), wu.data(), R);
        for (std::size_t t = 0; t < T; ++t) {
          if (e[t] != 0.0) simd::axpy(e[t], wu.data(), out.row(t).data(), R);
        }
        continue;
      }
      std::fill(tmp.begin(), tmp.end(), 0.0);
      for (std::size_t t = 0; t < T; ++t) {
        if (e[t] != 0.0) simd::axpy(e[t], model.v.row(t).data(), tmp.data(), R);
      }
      const double* other = mode == 1 ? model.u.row(n).data() : model.w.row(m).data();
      double* dst = out.row(mode == 1 ? m : n).data();
      for (std::size_t r = 0; r < R; ++r) dst[r] += other[r] * tmp[r];
    }
  }
  return out;
}

double regularizer(const DenseTensor& factor, const std::optional<std::vector<double>>& theta) {
  if (!theta) return 0.0;
  const DenseTensor z = CirculantOperator(*theta).apply(factor);
  return frobenius_norm_sq(z.data());
}

double frob_dot(const DenseTensor& a, const DenseTensor& b) {
  return simd::dot(a.data().data(), b.data().data(), a.size());
}

}  // namespace

// ---- ObservationMask -------------------------------------------------------

ObservationMask::ObservationMask(Shape3 shape, bool observed)
    : shape_(shape), size_(shape[0] * shape[1] * shape[2]), words_((size_ + 63) / 64, 0) {
  if (size_ == 0) throw InvalidArgument("mask shape must be positive");
  if (observed) {
    std::fill(words_.begin(), words_.end(), ~std::uint64_t{0});
    if (size_ % 64) words_.back() = (std::uint64_t{1} << (size_ % 64)) - 1;
  }
}

void ObservationMask::set(std::size_t flat, bool observed) noexcept {
  const std::uint64_t bit = std::uint64_t{1} << (flat & 63);
  if (observed) {
    words_[flat >> 6] |= bit;
  } else {
    words_[flat >> 6] &= ~bit;
  }
}

std::size_t ObservationMask::observed_count() const noexcept {
  std::size_t c = 0;
  for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

ObservationMask ObservationMask::complement() const {
  ObservationMask out(shape_, false);
  for (std::size_t i = 0; i < words_.size(); ++i) out.words_[i] = ~words_[i];
  if (size_ % 64) out.words_.back() &= (std::uint64_t{1} << (size_ % 64)) - 1;
  return out;
}

void ObservationMask::project(std::span<double> values) const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!observed(i)) values[i] = 0.0;
  }
}

ObservationMask make_mask(Shape3 shape, double missing_rate, std::uint64_t seed) {
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
    throw InvalidArgument("missing rate must lie in [0, 1), got " + std::to_string(missing_rate));
  }
  ObservationMask mask(shape, true);
  const std::size_t total = mask.size();
  const auto observed = static_cast<std::size_t>(std::llround((1.0 - missing_rate) * static_cast<double>(total)));
  const std::size_t missing = total - std::min(observed, total);
  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < missing; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(total - i));
    std::swap(perm[i], perm[j]);
    mask.set(perm[i], false);
  }
  mask.seed = seed;
  mask.missing_rate = missing_rate;
  return mask;
}

Shape3 shape3(const DenseTensor& t) {
  if (t.order() != 3) throw InvalidArgument("expected a third-order tensor, got order " + std::to_string(t.order()));
  return {t.dims()[0], t.dims()[1], t.dims()[2]};
}

// ---- model -------------------------------------------------------------------

const std::optional<std::vector<double>>& ModeKernels::for_mode(std::size_t mode) const {
  check_mode3(mode);
  return mode == 1 ? w : mode == 2 ? u : v;
}

DenseTensor& FactorModel::factor(std::size_t mode) {
  check_mode3(mode);
  return mode == 1 ? w : mode == 2 ? u : v;
}

const DenseTensor& FactorModel::factor(std::size_t mode) const {
  check_mode3(mode);
  return mode == 1 ? w : mode == 2 ? u : v;
}

DenseTensor FactorModel::reconstruct() const {
  const std::size_t M = w.rows(), N = u.rows(), T = v.rows(), R = rank();
  DenseTensor out({M, N, T});
  std::vector<double> wu(R);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t n = 0; n < N; ++n) {
      simd::hadamard(w.row(m).data(), u.row(n).data(), wu.data(), R);
      for (std::size_t t = 0; t < T; ++t) out.at(m, n, t) = simd::dot(wu.data(), v.row(t).data(), R);
    }
  }
  return out;
}

FactorModel init_factors(Shape3 shape, std::size_t rank, std::uint64_t seed) {
  if (rank < 1) throw InvalidArgument("rank must be at least 1");
  Rng rng(seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(rank));
  FactorModel model;
  model.w = DenseTensor::matrix(shape[0], rank);
  model.u = DenseTensor::matrix(shape[1], rank);
  model.v = DenseTensor::matrix(shape[2], rank);
  for (auto* f : {&model.w, &model.u, &model.v}) {
    for (double& x : f->data()) x = rng.normal(0.0, sd);
  }
  return model;
}

void check_consistent(const FactorModel& model, const DenseTensor& y, const ObservationMask& mask) {
  const Shape3 s = shape3(y);
  if (mask.shape() != s) {
    throw InvalidArgument("mask shape " + shape_string(mask.shape()) + " != data shape " + shape_string(s));
  }
  const std::size_t R = model.w.order() == 2 ? model.w.cols() : 0;
  if (R == 0) throw InvalidArgument("factor model has no components");
  const char* names[] = {"W", "U", "V"};
  for (std::size_t k = 1; k <= 3; ++k) {
    const DenseTensor& f = model.factor(k);
    if (f.order() != 2 || f.rows() != s[k - 1] || f.cols() != R) {
      throw InvalidArgument(std::string("factor ") + names[k - 1] + " must be " + std::to_string(s[k - 1]) +
                            "x" + std::to_string(R));
    }
    const auto& theta = model.kernels.for_mode(k);
    if (theta && theta->size() != s[k - 1]) {
      throw InvalidArgument("kernel for mode " + std::to_string(k) + " has length " +
                            std::to_string(theta->size()) + " but the tensor dimension is " +
                            std::to_string(s[k - 1]));
    }
  }
  if (!(model.gamma >= 0.0)) throw InvalidArgument("gamma must be non-negative");
}

double tf_objective(const FactorModel& model, const DenseTensor& y, const ObservationMask& mask) {
  check_consistent(model, y, mask);
  const DenseTensor e = masked_residual(model, y, mask);
  double f = 0.5 * frobenius_norm_sq(e.data());
  if (model.gamma > 0.0) {
    double reg = 0.0;
    for (std::size_t k = 1; k <= 3; ++k) reg += regularizer(model.factor(k), model.kernels.for_mode(k));
    f += 0.5 * model.gamma * reg;
  }
  return f;
}

FactorGradients tf_gradients(const FactorModel& model, const DenseTensor& y, const ObservationMask& mask) {
  check_consistent(model, y, mask);
  const DenseTensor e = masked_residual(model, y, mask);
  FactorGradients g;
  DenseTensor* outs[] = {&g.w, &g.u, &g.v};
  for (std::size_t k = 1; k <= 3; ++k) {
    DenseTensor grad = mttkrp(model, e, k);
    for (double& x : grad.data()) x = -x;
    const auto& theta = model.kernels.for_mode(k);
    if (theta && model.gamma > 0.0) {
      CirculantOperator(*theta).gram().apply_add(model.gamma, model.factor(k), grad);
    }
    *outs[k - 1] = std::move(grad);
  }
  return g;
}

// ---- block systems -----------------------------------------------------------

FactorSystem::FactorSystem(const FactorModel& model, const DenseTensor& y, const ObservationMask& mask,
                           std::size_t mode, double ridge)
    : mode_(mode), gamma_(model.gamma) {
  check_mode3(mode);
  check_consistent(model, y, mask);
  const auto [M, N, T] = mask.shape();
  rank_ = model.rank();
  const std::size_t R = rank_;
  rows_ = mode == 1 ? M : mode == 2 ? N : T;
  blocks_.assign(rows_ * R * R, 0.0);

  const bool full = mask.observed_count() == mask.size();
  if (full) {
    // Every row sees the same block: Hadamard product of the other factors' Grams.
    const DenseTensor& a = mode == 1 ? model.u : model.w;
    const DenseTensor& b = mode == 3 ? model.u : model.v;
    std::vector<double> block(R * R, 0.0);
    for (std::size_t i = 0; i < R; ++i) {
      for (std::size_t j = 0; j < R; ++j) {
        double ga = 0.0, gb = 0.0;
        for (std::size_t q = 0; q < a.rows(); ++q) ga += a.at(q, i) * a.at(q, j);
        for (std::size_t q = 0; q < b.rows(); ++q) gb += b.at(q, i) * b.at(q, j);
        block[i * R + j] = ga * gb;
      }
    }
    for (std::size_t row = 0; row < rows_; ++row) std::copy(block.begin(), block.end(), blocks_.begin() + row * R * R);
  } else {
    std::vector<double> key(R), wu(R);
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t base = (m * N + n) * T;
        if (mode == 3) simd::hadamard(model.w.row(m).data(), model.u.row(n).data(), wu.data(), R);
        for (std::size_t t = 0; t < T; ++t) {
          if (!mask.observed(base + t)) continue;
          std::size_t row;
          if (mode == 1) {
            simd::hadamard(model.u.row(n).data(), model.v.row(t).data(), key.data(), R);
            row = m;
          } else if (mode == 2) {
            simd::hadamard(model.w.row(m).data(), model.v.row(t).data(), key.data(), R);
            row = n;
          } else {
            std::copy(wu.begin(), wu.end(), key.begin());
            row = t;
          }
          double* blk = blocks_.data() + row * R * R;
          for (std::size_t i = 0; i < R; ++i) simd::axpy(key[i], key.data(), blk + i * R, R);
        }
      }
    }
  }

  double trace = 0.0;
  for (std::size_t row = 0; row < rows_; ++row) {
    for (std::size_t i = 0; i < R; ++i) trace += blocks_[row * R * R + i * R + i];
  }
  const double mean_diag = trace / static_cast<double>(rows_ * R);
  eps_ = mean_diag > 0.0 ? ridge * mean_diag : ridge;

  const auto& theta = model.kernels.for_mode(mode);
  if (theta && gamma_ > 0.0) reg_ = CirculantOperator(*theta).gram();

  DenseTensor observed_y = y;
  mask.project(observed_y.data());
  rhs_ = mttkrp(model, observed_y, mode);
  simd::axpy(eps_, model.factor(mode).data().data(), rhs_.data().data(), rhs_.size());
}

DenseTensor FactorSystem::apply(const DenseTensor& x) const {
  const std::size_t R = rank_;
  if (x.order() != 2 || x.rows() != rows_ || x.cols() != R) {
    throw InvalidArgument("factor system operand must be " + std::to_string(rows_) + "x" + std::to_string(R));
  }
  DenseTensor out = DenseTensor::matrix(rows_, R);
  for (std::size_t row = 0; row < rows_; ++row) {
    const double* blk = blocks_.data() + row * R * R;
    const double* xr = x.row(row).data();
    double* o = out.row(row).data();
    for (std::size_t i = 0; i < R; ++i) o[i] = simd::dot(blk + i * R, xr, R) + eps_ * xr[i];
  }
  if (reg_) reg_->apply_add(gamma_, x, out);
  return out;
}

CgResult conjugate_gradient(const std::function<DenseTensor(const DenseTensor&)>& op, const DenseTensor& b,
                            DenseTensor x0, double tol, std::size_t max_iter) {
  CgResult res;
  res.x = std::move(x0);
  DenseTensor r = b;
  {
    const DenseTensor ax = op(res.x);
    simd::axpy(-1.0, ax.data().data(), r.data().data(), r.size());
  }
  const double b_norm = std::sqrt(frobenius_norm_sq(b.data()));
  const double stop = tol * b_norm;
  double rs = frobenius_norm_sq(r.data());
  DenseTensor p = r;
  std::size_t it = 0;
  while (std::sqrt(rs) > stop && it < max_iter) {
    const DenseTensor ap = op(p);
    const double curvature = frob_dot(p, ap);
    if (!(curvature > 0.0)) {
      if (std::isnan(curvature)) throw SolverError("conjugate gradient: NaN in operator application");
      throw SolverError("conjugate gradient breakdown: non-positive curvature " + std::to_string(curvature) +
                        " at iteration " + std::to_string(it));
    }
    const double alpha = rs / curvature;
    simd::axpy(alpha, p.data().data(), res.x.data().data(), p.size());
    simd::axpy(-alpha, ap.data().data(), r.data().data(), r.size());
    const double rs_new = frobenius_norm_sq(r.data());
    if (std::isnan(rs_new)) throw SolverError("conjugate gradient: NaN residual");
    const double beta = rs_new / rs;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    rs = rs_new;
    ++it;
  }
  res.iterations = it;
  res.relative_residual = b_norm > 0.0 ? std::sqrt(rs) / b_norm : std::sqrt(rs);
  return res;
}

std::size_t update_factor(FactorModel& model, const DenseTensor& y, const ObservationMask& mask,
                          std::size_t mode, const TfConfig& cfg) {
  const FactorSystem sys(model, y, mask, mode, cfg.ridge);
  auto op = [&sys](const DenseTensor& x) { return sys.apply(x); };
  CgResult res = conjugate_gradient(op, sys.rhs(), model.factor(mode), cfg.cg_tol, cfg.cg_iters);
  for (double x : res.x.data()) {
    if (!std::isfinite(x)) throw SolverError("factor update produced a non-finite entry");
  }
  model.factor(mode) = std::move(res.x);
  return res.iterations;
}

FitReport tf_fit(const DenseTensor& y, const ObservationMask& mask, std::size_t rank, double gamma,
                 const ModeKernels& kernels, const TfConfig& cfg) {
  FitReport report;
  report.model = init_factors(shape3(y), rank, cfg.seed);
  report.model.gamma = gamma;
  report.model.kernels = kernels;
  check_consistent(report.model, y, mask);

  double prev = tf_objective(report.model, y, mask);
  report.objective_history.push_back(prev);
  for (std::size_t it = 0; it < cfg.outer_iters; ++it) {
    for (std::size_t mode = 1; mode <= 3; ++mode) {
      report.cg_iterations += update_factor(report.model, y, mask, mode, cfg);
    }
    const double f = tf_objective(report.model, y, mask);
    if (!std::isfinite(f)) throw SolverError("objective became non-finite");
    report.objective_history.push_back(f);
    report.outer_iterations = it + 1;
    const double change = std::abs(prev - f) / std::max(std::abs(prev), 1e-300);
    prev = f;
    if (change < cfg.outer_tol || f == 0.0) {
      report.converged = true;
      break;
    }
  }
  return report;
}

double rse(const DenseTensor& estimate, const DenseTensor& truth, const ObservationMask& mask,
           Projection projection) {
  if (estimate.dims() != truth.dims()) throw InvalidArgument("rse: estimate and truth differ in shape");
  if (mask.size() != truth.size()) throw InvalidArgument("rse: mask size does not match data");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool obs = mask.observed(i);
    if (projection == Projection::observed && !obs) continue;
    if (projection == Projection::missing && obs) continue;
    const double d = estimate[i] - truth[i];
    num += d * d;
    den += truth[i] * truth[i];
  }
  if (den == 0.0) throw InvalidArgument("rse: truth is zero on the evaluation set");
  return std::sqrt(num) / std::sqrt(den) * 100.0;
}

}  // namespace convkernel
