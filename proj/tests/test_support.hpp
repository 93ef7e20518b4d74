#pragma once

// Shared helpers for the unit and acceptance tests: seeded random data and
// explicitly materialized reference objects.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "convkernel/random.hpp"
#include "convkernel/tensor.hpp"

namespace ck_test {

using convkernel::DenseTensor;
using convkernel::Rng;

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline DenseTensor random_tensor(Rng& rng, std::vector<std::size_t> dims) {
  DenseTensor t(std::move(dims));
  for (double& x : t.data()) x = rng.normal();
  return t;
}

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

/// max |a - b| / max |b| (absolute when b is zero).
inline double rel_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  const double s = max_abs(b);
  return s > 0.0 ? d / s : d;
}

/// C(x) with C[i][j] = x[(i - j) mod n]: column j is x cyclically shifted down by j.
inline DenseTensor circulant_matrix(std::span<const double> x) {
  const std::size_t n = x.size();
  DenseTensor c = DenseTensor::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) c.at(i, j) = x[(i + n - j) % n];
  }
  return c;
}

inline std::vector<double> matvec(const DenseTensor& m, std::span<const double> v) {
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out[i] += m.at(i, j) * v[j];
  }
  return out;
}

/// Column l of the lag dictionary for stacked series of length T: every series
/// delayed by l, a_l[s, t] = x[s, (t - l) mod T].
inline std::vector<double> lag_column(std::span<const double> x, std::size_t length, std::size_t lag) {
  std::vector<double> a(x.size());
  for (std::size_t s = 0; s < x.size() / length; ++s) {
    for (std::size_t t = 0; t < length; ++t) a[s * length + t] = x[s * length + (t + length - lag) % length];
  }
  return a;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace ck_test
