#include "convkernel/nnls.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "convkernel/simd/kernels.hpp"

namespace convkernel {
namespace {

// Solves G_PP z = c_P by Cholesky, visiting passive indices in ascending order
// and dropping any whose pivot falls below the threshold. Dropped and inactive
// entries of z are zero.
void solve_passive(const DenseTensor& gram, std::span<const double> c, const std::vector<bool>& passive,
                   double pivot_tol, std::vector<double>& z, std::vector<bool>& dropped) {
  const std::size_t k = c.size();
  std::fill(z.begin(), z.end(), 0.0);
  std::fill(dropped.begin(), dropped.end(), false);
  double max_diag = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (passive[i]) max_diag = std::max(max_diag, gram.at(i, i));
  }
  const double threshold = pivot_tol * max_diag;

  std::vector<std::size_t> kept;
  std::vector<double> lower;  // packed rows of L; row q has q+1 entries
  for (std::size_t p = 0; p < k; ++p) {
    if (!passive[p]) continue;
    const std::size_t q = kept.size();
    std::vector<double> row(q + 1, 0.0);
    std::size_t offset = 0;
    for (std::size_t a = 0; a < q; ++a) {
      double s = gram.at(kept[a], p);
      for (std::size_t b = 0; b < a; ++b) s -= lower[offset + b] * row[b];
      row[a] = s / lower[offset + a];
      offset += a + 1;
    }
    double d = gram.at(p, p);
    for (std::size_t a = 0; a < q; ++a) d -= row[a] * row[a];
    if (!(d > threshold) || max_diag == 0.0) {
      dropped[p] = true;
      continue;
    }
    row[q] = std::sqrt(d);
    lower.insert(lower.end(), row.begin(), row.end());
    kept.push_back(p);
  }

  const std::size_t q = kept.size();
  std::vector<double> y(q);
  std::size_t offset = 0;
  for (std::size_t a = 0; a < q; ++a) {
    double s = c[kept[a]];
    for (std::size_t b = 0; b < a; ++b) s -= lower[offset + b] * y[b];
    y[a] = s / lower[offset + a];
    offset += a + 1;
  }
  // Back substitution with L^T; row a of L starts at a(a+1)/2.
  for (std::size_t a = q; a-- > 0;) {
    double s = y[a];
    for (std::size_t b = a + 1; b < q; ++b) s -= lower[b * (b + 1) / 2 + a] * y[b];
    y[a] = s / lower[a * (a + 1) / 2 + a];
  }
  for (std::size_t a = 0; a < q; ++a) z[kept[a]] = y[a];
}

std::vector<double> gradient(const DenseTensor& gram, std::span<const double> c,
                             std::span<const double> v) {
  const std::size_t k = c.size();
  std::vector<double> g(k);
  for (std::size_t i = 0; i < k; ++i) g[i] = simd::dot(gram.row(i).data(), v.data(), k) - c[i];
  return g;
}

double kkt_violation(std::span<const double> g, std::span<const double> v, double scale) {
  double worst = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double e = v[i] > 0.0 ? std::abs(g[i]) : std::max(0.0, -g[i]);
    worst = std::max(worst, e);
  }
  return worst / scale;
}

double objective_from_normal(const DenseTensor& gram, std::span<const double> c, double b_norm_sq,
                             std::span<const double> v) {
  const std::size_t k = c.size();
  double quad = 0.0;
  for (std::size_t i = 0; i < k; ++i) quad += v[i] * simd::dot(gram.row(i).data(), v.data(), k);
  return std::max(0.0, b_norm_sq - 2.0 * simd::dot(c.data(), v.data(), k) + quad);
}

}  // namespace

NnlsSolution nnls_solve_normal(const DenseTensor& gram, std::span<const double> mtb, double b_norm_sq,
                               const NnlsConfig& cfg) {
  const std::size_t k = mtb.size();
  if (k == 0) throw InvalidArgument("nnls: need at least one column");
  if (gram.order() != 2 || gram.rows() != k || gram.cols() != k) {
    throw InvalidArgument("nnls: Gram matrix must be " + std::to_string(k) + "x" + std::to_string(k));
  }
  if (!(cfg.tol > 0.0)) throw InvalidArgument("nnls: tolerance must be positive");
  for (double x : gram.data()) {
    if (std::isnan(x)) throw NnlsError("nnls: NaN in Gram matrix", NnlsSolution{std::vector<double>(k, 0.0)});
  }
  for (double x : mtb) {
    if (std::isnan(x)) throw NnlsError("nnls: NaN in right-hand side", NnlsSolution{std::vector<double>(k, 0.0)});
  }

  double scale = 0.0;
  for (double x : mtb) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) scale = 1.0;
  const double threshold = cfg.tol * scale;
  const std::size_t max_iter = cfg.max_iter ? cfg.max_iter : 3 * k + 30;

  std::vector<double> v(k, 0.0), z(k, 0.0);
  std::vector<bool> passive(k, false), rejected(k, false), dropped(k, false);

  auto finish = [&](std::size_t iterations) {
    NnlsSolution sol;
    for (auto& w : v) w = w > 0.0 ? w : 0.0;  // also turns -0 into +0
    sol.weights = v;
    sol.iterations = iterations;
    const auto g = gradient(gram, mtb, v);
    sol.kkt_violation = kkt_violation(g, v, scale);
    sol.residual_norm_sq = objective_from_normal(gram, mtb, b_norm_sq, v);
    return sol;
  };

  std::size_t iter = 0;
  for (;;) {
    const auto g = gradient(gram, mtb, v);
    std::size_t enter = k;
    double best = threshold;
    for (std::size_t i = 0; i < k; ++i) {
      if (passive[i] || rejected[i]) continue;
      if (-g[i] > best) {
        best = -g[i];
        enter = i;
      }
    }
    if (enter == k) break;
    if (++iter > max_iter) {
      throw NnlsError("nnls: no convergence after " + std::to_string(max_iter) + " iterations", finish(iter));
    }

    passive[enter] = true;
    solve_passive(gram, mtb, passive, cfg.pivot_tol, z, dropped);
    if (dropped[enter] || !(z[enter] > 0.0)) {
      // Numerically dependent on the passive set, or no descent: never retry it.
      passive[enter] = false;
      rejected[enter] = true;
      for (std::size_t i = 0; i < k; ++i) {
        if (dropped[i]) passive[i] = false;
      }
      continue;
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (dropped[i]) {
        passive[i] = false;
        v[i] = 0.0;
      }
    }

    // Inner loop: step back towards feasibility until z is positive on P.
    for (std::size_t inner = 0; inner <= k; ++inner) {
      bool feasible = true;
      for (std::size_t i = 0; i < k; ++i) {
        if (passive[i] && !(z[i] > 0.0)) feasible = false;
      }
      if (feasible) break;
      double alpha = 2.0;
      std::size_t limiting = k;
      for (std::size_t i = 0; i < k; ++i) {
        if (!passive[i] || z[i] > 0.0) continue;
        const double denom = v[i] - z[i];
        const double ratio = denom > 0.0 ? v[i] / denom : 0.0;
        if (ratio < alpha) {  // strict: smallest index wins ties
          alpha = ratio;
          limiting = i;
        }
      }
      for (std::size_t i = 0; i < k; ++i) {
        if (passive[i]) v[i] += alpha * (z[i] - v[i]);
      }
      if (limiting < k) {
        v[limiting] = 0.0;
        passive[limiting] = false;
      }
      for (std::size_t i = 0; i < k; ++i) {
        if (passive[i] && v[i] <= 0.0) {
          v[i] = 0.0;
          passive[i] = false;
        }
      }
      solve_passive(gram, mtb, passive, cfg.pivot_tol, z, dropped);
      for (std::size_t i = 0; i < k; ++i) {
        if (dropped[i]) passive[i] = false;
      }
    }
    for (std::size_t i = 0; i < k; ++i) v[i] = passive[i] ? z[i] : 0.0;
    for (double x : v) {
      if (std::isnan(x)) throw NnlsError("nnls: NaN in iterate", finish(iter));
    }
    std::fill(rejected.begin(), rejected.end(), false);
  }
  NnlsSolution sol = finish(iter);
  if (sol.kkt_violation > cfg.tol) {
    throw NnlsError("nnls: KKT violation " + std::to_string(sol.kkt_violation) + " above tolerance",
                    std::move(sol));
  }
  return sol;
}

NnlsSolution nnls_solve(const LinearMap& apply_m, const LinearMap& apply_mt, std::size_t k,
                        std::span<const double> b, const NnlsConfig& cfg) {
  if (k == 0) throw InvalidArgument("nnls: need at least one column");
  const std::size_t m = b.size();
  DenseTensor gram = DenseTensor::matrix(k, k);
  std::vector<double> unit(k, 0.0), column(m), mtb(k);
  for (std::size_t j = 0; j < k; ++j) {
    unit[j] = 1.0;
    apply_m(unit, column);
    apply_mt(column, gram.row(j));
    unit[j] = 0.0;
  }
  // Symmetrize away operator rounding.
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double s = 0.5 * (gram.at(i, j) + gram.at(j, i));
      gram.at(i, j) = s;
      gram.at(j, i) = s;
    }
  }
  apply_mt(b, mtb);
  const double b_norm_sq = frobenius_norm_sq(b);
  NnlsSolution sol = nnls_solve_normal(gram, mtb, b_norm_sq, cfg);

  // Report the residual from the operator rather than the normal equations.
  apply_m(sol.weights, column);
  double r2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = b[i] - column[i];
    r2 += d * d;
  }
  sol.residual_norm_sq = r2;
  return sol;
}

NnlsSolution nnls_solve_dense(const DenseTensor& m, std::span<const double> b, const NnlsConfig& cfg) {
  if (m.order() != 2 || m.rows() != b.size()) throw InvalidArgument("nnls: matrix rows must equal len(b)");
  const std::size_t rows = m.rows(), cols = m.cols();
  auto apply_m = [&](std::span<const double> in, std::span<double> out) {
    for (std::size_t i = 0; i < rows; ++i) out[i] = simd::dot(m.row(i).data(), in.data(), cols);
  };
  auto apply_mt = [&](std::span<const double> in, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < rows; ++i) simd::axpy(in[i], m.row(i).data(), out.data(), cols);
  };
  return nnls_solve(apply_m, apply_mt, cols, b, cfg);
}

}  // namespace convkernel
