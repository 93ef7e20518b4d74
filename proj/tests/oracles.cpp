#include "oracles.hpp"

#include <algorithm>

namespace ck_test {

using convkernel::DenseTensor;

Eigen::MatrixXd to_eigen(const DenseTensor& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m.at(i, j);
  }
  return e;
}

double subset_enumeration_optimum(const DenseTensor& m, std::span<const double> b) {
  const Eigen::MatrixXd a = to_eigen(m);
  const Eigen::VectorXd eb = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  const std::size_t k = m.cols();
  double best = eb.squaredNorm();
  for (std::size_t mask = 1; mask < (std::size_t{1} << k); ++mask) {
    std::vector<Eigen::Index> cols;
    for (std::size_t j = 0; j < k; ++j) {
      if (mask >> j & 1u) cols.push_back(static_cast<Eigen::Index>(j));
    }
    const Eigen::MatrixXd sub = a(Eigen::all, cols);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(cols.size())) continue;
    const Eigen::VectorXd v = qr.solve(eb);
    if ((v.array() < 0.0).any()) continue;
    best = std::min(best, (eb - sub * v).squaredNorm());
  }
  return best;
}

std::vector<double> periodic_series(convkernel::Rng& rng, std::size_t count, std::size_t length, std::size_t period) {
  std::vector<double> out(count * length);
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<double> pattern(period);
    for (double& v : pattern) v = rng.uniform(-1.0, 1.0);
    for (std::size_t t = 0; t < length; ++t) out[s * length + t] = pattern[t % period];
  }
  return out;
}

namespace {

Eigen::MatrixXd circulant(const std::vector<double>& c) {
  const auto n = static_cast<Eigen::Index>(c.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = c[static_cast<std::size_t>((i - j + n) % n)];
  }
  return m;
}

DenseTensor& factor(CpProblem& p, std::size_t mode) { return mode == 1 ? p.w : mode == 2 ? p.u : p.v; }
const DenseTensor& factor(const CpProblem& p, std::size_t mode) { return mode == 1 ? p.w : mode == 2 ? p.u : p.v; }
const std::optional<std::vector<double>>& theta(const CpProblem& p, std::size_t mode) {
  return mode == 1 ? p.theta_w : mode == 2 ? p.theta_u : p.theta_v;
}

}  // namespace

double reference_objective(const CpProblem& p) {
  const std::size_t M = p.w.rows(), N = p.u.rows(), T = p.v.rows(), R = p.w.cols();
  double data = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t flat = (m * N + n) * T + t;
        if (!p.observed[flat]) continue;
        double yhat = 0.0;
        for (std::size_t r = 0; r < R; ++r) yhat += p.w.at(m, r) * p.u.at(n, r) * p.v.at(t, r);
        const double e = p.y[flat] - yhat;
        data += e * e;
      }
    }
  }
  double reg = 0.0;
  for (std::size_t mode = 1; mode <= 3; ++mode) {
    if (!theta(p, mode)) continue;
    reg += (circulant(*theta(p, mode)) * to_eigen(factor(p, mode))).squaredNorm();
  }
  return 0.5 * data + 0.5 * p.gamma * reg;
}

double finite_difference(CpProblem p, std::size_t mode, std::size_t i, std::size_t r, double h) {
  DenseTensor& f = factor(p, mode);
  const double x0 = f.at(i, r);
  f.at(i, r) = x0 + h;
  const double fp = reference_objective(p);
  f.at(i, r) = x0 - h;
  const double fm = reference_objective(p);
  return (fp - fm) / (2.0 * h);
}

DenseTensor reference_factor_minimizer(const CpProblem& p, std::size_t mode) {
  const std::size_t M = p.w.rows(), N = p.u.rows(), T = p.v.rows(), R = p.w.cols();
  const std::size_t rows = factor(p, mode).rows();
  const auto dim = static_cast<Eigen::Index>(rows * R);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t flat = (m * N + n) * T + t;
        if (!p.observed[flat]) continue;
        // yhat = x_row . k with k the product of the other two factor rows.
        std::size_t row = 0;
        Eigen::VectorXd k(R);
        for (std::size_t r = 0; r < R; ++r) {
          if (mode == 1) {
            row = m;
            k(r) = p.u.at(n, r) * p.v.at(t, r);
          } else if (mode == 2) {
            row = n;
            k(r) = p.w.at(m, r) * p.v.at(t, r);
          } else {
            row = t;
            k(r) = p.w.at(m, r) * p.u.at(n, r);
          }
        }
        const auto off = static_cast<Eigen::Index>(row * R);
        h.block(off, off, R, R) += k * k.transpose();
        g.segment(off, R) += p.y[flat] * k;
      }
    }
  }
  if (theta(p, mode) && p.gamma > 0.0) {
    const Eigen::MatrixXd c = circulant(*theta(p, mode));
    const Eigen::MatrixXd ctc = c.transpose() * c;
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < rows; ++j) {
        for (std::size_t r = 0; r < R; ++r) {
          h(static_cast<Eigen::Index>(i * R + r), static_cast<Eigen::Index>(j * R + r)) +=
              p.gamma * ctc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
      }
    }
  }
  const Eigen::VectorXd x = h.ldlt().solve(g);
  DenseTensor out = DenseTensor::matrix(rows, R);
  for (std::size_t i = 0; i < rows * R; ++i) out[i] = x(static_cast<Eigen::Index>(i));
  return out;
}

}  // namespace ck_test
