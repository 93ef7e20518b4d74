#include "convkernel/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "convkernel/error.hpp"
#include "convkernel/simd/kernels.hpp"

namespace convkernel {
namespace {

std::string dims_string(std::span<const std::size_t> dims) {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
  return os.str();
}

void check_order(std::span<const std::size_t> dims) {
  if (dims.empty() || dims.size() > 4) {
    throw InvalidArgument("tensor order must be between 1 and 4, got " + std::to_string(dims.size()));
  }
  for (std::size_t d : dims) {
    if (d == 0) throw InvalidArgument("tensor dims must be positive, got " + dims_string(dims));
  }
}

void check_mode(const DenseTensor& t, std::size_t mode) {
  if (mode < 1 || mode > t.order()) {
    throw InvalidArgument("mode " + std::to_string(mode) + " out of range for order-" +
                          std::to_string(t.order()) + " tensor");
  }
}

// Calls f(flat_row_major_index, column_of_unfolding) for each element along with
// its row in the mode-k unfolding. Column index: lower-numbered modes fastest.
template <typename F>
void for_each_unfolded(std::span<const std::size_t> dims, std::size_t mode, F&& f) {
  const std::size_t order = dims.size();
  const std::size_t k = mode - 1;
  // Column weight of each non-k mode.
  std::vector<std::size_t> col_weight(order, 0);
  std::size_t w = 1;
  for (std::size_t j = 0; j < order; ++j) {
    if (j == k) continue;
    col_weight[j] = w;
    w *= dims[j];
  }
  std::vector<std::size_t> idx(order, 0);
  const std::size_t total = product(dims);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t col = 0;
    for (std::size_t j = 0; j < order; ++j) col += idx[j] * col_weight[j];
    f(flat, idx[k], col);
    for (std::size_t j = order; j-- > 0;) {
      if (++idx[j] < dims[j]) break;
      idx[j] = 0;
    }
  }
}

}  // namespace

std::size_t product(std::span<const std::size_t> dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

DenseTensor::DenseTensor(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  check_order(dims_);
  data_.assign(product(dims_), 0.0);
}

DenseTensor::DenseTensor(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  check_order(dims_);
  if (product(dims_) != data_.size()) {
    throw InvalidArgument("tensor of dims " + dims_string(dims_) + " needs " +
                          std::to_string(product(dims_)) + " values, got " +
                          std::to_string(data_.size()));
  }
}

DenseTensor DenseTensor::from_external(std::vector<std::size_t> dims, std::vector<double> data) {
  DenseTensor t(std::move(dims), std::move(data));
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t.data_[i])) {
      throw InvalidArgument("non-finite value at flat index " + std::to_string(i));
    }
  }
  return t;
}

DenseTensor DenseTensor::vector(std::span<const double> values) {
  return DenseTensor({values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::size_t DenseTensor::dim(std::size_t mode) const {
  check_mode(*this, mode);
  return dims_[mode - 1];
}

DenseTensor DenseTensor::reshaped(std::vector<std::size_t> dims) const {
  return DenseTensor(std::move(dims), data_);
}

DenseTensor unfold(const DenseTensor& t, std::size_t mode) {
  check_mode(t, mode);
  const std::size_t rows = t.dims()[mode - 1];
  const std::size_t cols = t.size() / rows;
  DenseTensor out = DenseTensor::matrix(rows, cols);
  for_each_unfolded(t.dims(), mode, [&](std::size_t flat, std::size_t r, std::size_t c) {
    out[r * cols + c] = t[flat];
  });
  return out;
}

DenseTensor fold(const DenseTensor& m, std::size_t mode, std::span<const std::size_t> dims) {
  check_order(dims);
  if (mode < 1 || mode > dims.size()) {
    throw InvalidArgument("fold: mode " + std::to_string(mode) + " out of range");
  }
  const std::size_t rows = dims[mode - 1];
  const std::size_t cols = product(dims) / rows;
  if (m.order() != 2 || m.rows() != rows || m.cols() != cols) {
    throw InvalidArgument("fold: matrix shape does not match target dims " + dims_string(dims));
  }
  DenseTensor out(std::vector<std::size_t>(dims.begin(), dims.end()));
  for_each_unfolded(dims, mode, [&](std::size_t flat, std::size_t r, std::size_t c) {
    out[flat] = m[r * cols + c];
  });
  return out;
}

DenseTensor vec(const DenseTensor& t) {
  // Column-major linearization: mode 1 fastest. Identical to vec(unfold(t, 1)).
  const auto& dims = t.dims();
  const std::size_t order = dims.size();
  std::vector<std::size_t> cm_weight(order, 1);
  for (std::size_t j = 1; j < order; ++j) cm_weight[j] = cm_weight[j - 1] * dims[j - 1];
  std::vector<double> out(t.size());
  std::vector<std::size_t> idx(order, 0);
  for (std::size_t flat = 0; flat < t.size(); ++flat) {
    std::size_t pos = 0;
    for (std::size_t j = 0; j < order; ++j) pos += idx[j] * cm_weight[j];
    out[pos] = t[flat];
    for (std::size_t j = order; j-- > 0;) {
      if (++idx[j] < dims[j]) break;
      idx[j] = 0;
    }
  }
  return DenseTensor({t.size()}, std::move(out));
}

DenseTensor khatri_rao(const DenseTensor& a, const DenseTensor& b) {
  if (a.order() != 2 || b.order() != 2) throw InvalidArgument("khatri_rao: inputs must be matrices");
  if (a.cols() != b.cols()) {
    throw InvalidArgument("khatri_rao: column counts differ (" + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.cols()) + ")");
  }
  const std::size_t n = a.rows(), m = b.rows(), r = a.cols();
  DenseTensor out = DenseTensor::matrix(n * m, r);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      simd::hadamard(a.row(i).data(), b.row(j).data(), out.row(i * m + j).data(), r);
    }
  }
  return out;
}

DenseTensor modal_product(const DenseTensor& t, std::span<const double> w, std::size_t mode) {
  check_mode(t, mode);
  const auto& dims = t.dims();
  const std::size_t k = mode - 1;
  if (dims[k] != w.size()) {
    throw InvalidArgument("modal_product: mode-" + std::to_string(mode) + " extent " +
                          std::to_string(dims[k]) + " != vector length " + std::to_string(w.size()));
  }
  // View t as (outer, dims[k], inner) in row-major order.
  std::size_t outer = 1, inner = 1;
  for (std::size_t j = 0; j < k; ++j) outer *= dims[j];
  for (std::size_t j = k + 1; j < dims.size(); ++j) inner *= dims[j];
  std::vector<std::size_t> out_dims;
  for (std::size_t j = 0; j < dims.size(); ++j) {
    if (j != k) out_dims.push_back(dims[j]);
  }
  if (out_dims.empty()) out_dims.push_back(1);
  DenseTensor out(out_dims);
  const std::size_t n = dims[k];
  for (std::size_t o = 0; o < outer; ++o) {
    double* dst = out.data().data() + o * inner;
    for (std::size_t i = 0; i < n; ++i) {
      simd::axpy(w[i], t.data().data() + (o * n + i) * inner, dst, inner);
    }
  }
  return out;
}

DenseTensor move_mode_to_last(const DenseTensor& t, std::size_t mode) {
  check_mode(t, mode);
  const auto& dims = t.dims();
  const std::size_t k = mode - 1;
  std::size_t outer = 1, inner = 1;
  for (std::size_t j = 0; j < k; ++j) outer *= dims[j];
  for (std::size_t j = k + 1; j < dims.size(); ++j) inner *= dims[j];
  const std::size_t n = dims[k];
  std::vector<std::size_t> out_dims;
  for (std::size_t j = 0; j < dims.size(); ++j) {
    if (j != k) out_dims.push_back(dims[j]);
  }
  out_dims.push_back(n);
  DenseTensor out(out_dims);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t q = 0; q < inner; ++q) {
        out[(o * inner + q) * n + i] = t[(o * n + i) * inner + q];
      }
    }
  }
  return out;
}

DenseTensor matmul_transposed(const DenseTensor& a, const DenseTensor& b) {
  if (a.order() != 2 || b.order() != 2 || a.cols() != b.cols()) {
    throw InvalidArgument("matmul_transposed: inner dimensions differ");
  }
  DenseTensor out = DenseTensor::matrix(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      out.at(i, j) = simd::dot(a.row(i).data(), b.row(j).data(), a.cols());
    }
  }
  return out;
}

double frobenius_norm_sq(std::span<const double> x) { return simd::sum_squares(x.data(), x.size()); }

}  // namespace convkernel
