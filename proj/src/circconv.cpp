#include "convkernel/circconv.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "convkernel/error.hpp"
#include "convkernel/fft.hpp"
#include "convkernel/simd/kernels.hpp"

namespace convkernel {
namespace {

using cplx = std::complex<double>;

bool use_direct(ConvPath path, std::size_t n) {
  if (path != ConvPath::automatic) return path == ConvPath::direct;
  return n <= kDirectCrossover || (!is_power_of_two(n) && n <= kDirectCrossoverBluestein);
}

void check_same_shape(const SeriesBlock& a, const SeriesBlock& b) {
  if (a.count != b.count || a.length != b.length) {
    throw InvalidArgument("series shape mismatch: " + std::to_string(a.count) + "x" +
                          std::to_string(a.length) + " vs " + std::to_string(b.count) + "x" +
                          std::to_string(b.length));
  }
}

// Real part of an inverse transform; a large imaginary part means the FFT is broken.
void take_real(std::span<const cplx> z, double scale, std::span<double> out) {
  double worst = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = z[i].real();
    worst = std::max(worst, std::abs(z[i].imag()));
  }
  if (worst > 1e-9 * std::max(scale, 1e-300) && worst > 1e-300) {
    throw InternalError("FFT imaginary residue " + std::to_string(worst) + " exceeds tolerance");
  }
}

void check_lag(std::size_t lag, std::size_t length) {
  if (lag < 1 || lag >= length) {
    throw InvalidArgument("lag " + std::to_string(lag) + " outside [1, " + std::to_string(length - 1) +
                          "]");
  }
}

}  // namespace

SeriesBlock as_series(const DenseTensor& t) {
  const std::size_t length = t.dims().back();
  return SeriesBlock{t.data(), t.size() / length, length};
}

SeriesBlock as_series(std::span<const double> values, std::size_t length) {
  if (length == 0 || values.size() % length != 0) {
    throw InvalidArgument("buffer of " + std::to_string(values.size()) +
                          " values is not a whole number of series of length " +
                          std::to_string(length));
  }
  return SeriesBlock{values, values.size() / length, length};
}

std::vector<double> circ_conv(std::span<const double> theta, std::span<const double> x,
                              ConvPath path) {
  const std::size_t n = x.size();
  if (n == 0) throw InvalidArgument("circ_conv: empty input");
  if (theta.size() != n) {
    throw InvalidArgument("circ_conv: length mismatch (" + std::to_string(theta.size()) + " vs " +
                          std::to_string(n) + ")");
  }
  std::vector<double> y(n);
  if (use_direct(path, n)) {
    // rho[j] = theta[(-j) mod n], so y[t] = sum_k x[k] rho[(k - t) mod n].
    std::vector<double> rho(n);
    rho[0] = theta[0];
    for (std::size_t j = 1; j < n; ++j) rho[j] = theta[n - j];
    for (std::size_t t = 0; t < n; ++t) {
      y[t] = simd::dot(x.data() + t, rho.data(), n - t) + simd::dot(x.data(), rho.data() + n - t, t);
    }
    return y;
  }
  FftPlan plan(n);
  std::vector<cplx> a(theta.begin(), theta.end());
  std::vector<cplx> b(x.begin(), x.end());
  plan.forward(a);
  plan.forward(b);
  simd::active().cmul_inplace(a.data(), b.data(), n);
  plan.inverse(a);
  const double scale = std::sqrt(frobenius_norm_sq(theta) * frobenius_norm_sq(x));
  take_real(a, scale, y);
  return y;
}

std::vector<double> circ_corr_all_lags(const SeriesBlock& x, const SeriesBlock& r, ConvPath path) {
  check_same_shape(x, r);
  const std::size_t n = x.length;
  if (n < 2) throw InvalidArgument("correlation needs series length >= 2");
  std::vector<double> out(n - 1, 0.0);
  if (use_direct(path, n)) {
    for (std::size_t s = 0; s < x.count; ++s) {
      const double* xs = x.series(s).data();
      const double* rs = r.series(s).data();
      for (std::size_t lag = 1; lag < n; ++lag) {
        out[lag - 1] += simd::dot(xs, rs + lag, n - lag) + simd::dot(xs + n - lag, rs, lag);
      }
    }
    return out;
  }
  // sum_s IFFT(R_s conj(X_s)) evaluated as IFFT(sum_s R_s conj(X_s)).
  FftPlan plan(n);
  std::vector<cplx> acc(n, cplx{});
  std::vector<cplx> fx(n), fr(n);
  for (std::size_t s = 0; s < x.count; ++s) {
    const auto xs = x.series(s);
    const auto rs = r.series(s);
    for (std::size_t t = 0; t < n; ++t) {
      fx[t] = xs[t];
      fr[t] = rs[t];
    }
    plan.forward(fx);
    plan.forward(fr);
    simd::active().mul_conj_acc(fr.data(), fx.data(), acc.data(), n);
  }
  plan.inverse(acc);
  std::vector<double> full(n);
  const double scale = std::sqrt(frobenius_norm_sq(x.values) * frobenius_norm_sq(r.values));
  take_real(acc, scale, full);
  std::copy(full.begin() + 1, full.end(), out.begin());
  return out;
}

std::vector<double> circ_corr_at_lags(const SeriesBlock& x, const SeriesBlock& r,
                                      std::span<const std::size_t> lags) {
  check_same_shape(x, r);
  const std::size_t n = x.length;
  std::vector<double> out(lags.size(), 0.0);
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const std::size_t lag = lags[i];
    check_lag(lag, n);
    double sum = 0.0;
    for (std::size_t s = 0; s < x.count; ++s) {
      const double* xs = x.series(s).data();
      const double* rs = r.series(s).data();
      sum += simd::dot(xs, rs + lag, n - lag) + simd::dot(xs + n - lag, rs, lag);
    }
    out[i] = sum;
  }
  return out;
}

void synth_support(const SeriesBlock& x, std::span<const std::size_t> lags, std::span<const double> v,
                   std::span<double> out) {
  const std::size_t n = x.length;
  if (lags.size() != v.size()) throw InvalidArgument("synth_support: lags and weights differ in length");
  if (out.size() != x.values.size()) throw InvalidArgument("synth_support: output size mismatch");
  for (std::size_t i = 0; i < lags.size(); ++i) {
    check_lag(lags[i], n);
    if (!std::isfinite(v[i])) throw InvalidArgument("synth_support: non-finite weight");
    for (std::size_t j = 0; j < i; ++j) {
      if (lags[j] == lags[i]) throw InvalidArgument("synth_support: duplicate lag " + std::to_string(lags[i]));
    }
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t s = 0; s < x.count; ++s) {
    const double* xs = x.series(s).data();
    double* os = out.data() + s * n;
    for (std::size_t i = 0; i < lags.size(); ++i) {
      const std::size_t lag = lags[i];
      // a_l[t] = x[t - l] for t >= l, x[t + n - l] for t < l.
      simd::axpy(v[i], xs, os + lag, n - lag);
      simd::axpy(v[i], xs + n - lag, os, lag);
    }
  }
}

std::vector<double> synth_support(const SeriesBlock& x, std::span<const std::size_t> lags,
                                  std::span<const double> v) {
  std::vector<double> out(x.values.size());
  synth_support(x, lags, v, out);
  return out;
}

CirculantOperator::CirculantOperator(std::span<const double> first_column) : n_(first_column.size()) {
  if (n_ == 0) throw InvalidArgument("circulant of length 0");
  for (std::size_t d = 0; d < n_; ++d) {
    if (first_column[d] != 0.0) diags_.emplace_back(d, first_column[d]);
  }
}

void CirculantOperator::apply_add(double scale, const DenseTensor& m, DenseTensor& out) const {
  if (m.order() != 2 || m.rows() != n_) {
    throw InvalidArgument("circulant of size " + std::to_string(n_) + " applied to matrix with " +
                          std::to_string(m.order() == 2 ? m.rows() : 0) + " rows");
  }
  if (out.order() != 2 || out.rows() != m.rows() || out.cols() != m.cols()) {
    throw InvalidArgument("circulant apply: output shape mismatch");
  }
  const std::size_t cols = m.cols();
  for (const auto& [d, c] : diags_) {
    for (std::size_t k = 0; k < n_; ++k) {
      const std::size_t i = k + d < n_ ? k + d : k + d - n_;
      simd::axpy(scale * c, m.row(k).data(), out.row(i).data(), cols);
    }
  }
}

DenseTensor CirculantOperator::apply(const DenseTensor& m) const {
  if (m.order() != 2) throw InvalidArgument("circulant apply: operand must be a matrix");
  DenseTensor out = DenseTensor::matrix(m.rows(), m.cols());
  apply_add(1.0, m, out);
  return out;
}

CirculantOperator CirculantOperator::gram() const {
  std::vector<double> g(n_, 0.0);
  for (const auto& [d1, c1] : diags_) {
    for (const auto& [d2, c2] : diags_) {
      // g[d] gathers c[k] c[k + d]: here k = d1, k + d = d2.
      const std::size_t d = (d2 + n_ - d1) % n_;
      g[d] += c1 * c2;
    }
  }
  return CirculantOperator(g);
}

CirculantOperator CirculantOperator::transposed() const {
  std::vector<double> t(n_, 0.0);
  for (const auto& [d, c] : diags_) t[(n_ - d) % n_] = c;
  return CirculantOperator(t);
}

std::vector<double> CirculantOperator::first_column() const {
  std::vector<double> c(n_, 0.0);
  for (const auto& [d, v] : diags_) c[d] = v;
  return c;
}

DenseTensor circulant_apply(std::span<const double> theta, const DenseTensor& m) {
  return CirculantOperator(theta).apply(m);
}

DenseTensor circulant_gram_apply(std::span<const double> theta, const DenseTensor& m) {
  return CirculantOperator(theta).gram().apply(m);
}

}  // namespace convkernel
