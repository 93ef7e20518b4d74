#pragma once

// Dense tensors of order 1-4 and the multilinear algebra used across the library.
//
// Storage is row-major: the last index varies fastest. Modes are numbered from 1
// as in the usual CP notation, so a third-order tensor Y of dims (M, N, T) has
// mode-1 unfolding Y_(1) of shape M x (N*T).
//
// Unfolding convention: in the mode-k unfolding the remaining modes are laid out
// along the columns with the lower-numbered mode varying fastest. For the 2x2x2
// tensor X[i][j][k] = 4i + 2j + k:
//
//   X_(1) = [ 0 2 1 3 ]     column c = j + 2k
//           [ 4 6 5 7 ]
//
//   X_(3) = [ 0 4 2 6 ]     column c = i + 2j
//           [ 1 5 3 7 ]
//
// With this convention vec(X) = vec(X_(1)) and Y_(1) = W (V kr U)^T for a CP
// model with factors W, U, V (kr = Khatri-Rao product).

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace convkernel {

class DenseTensor {
 public:
  DenseTensor() = default;

  /// Zero-filled tensor.
  explicit DenseTensor(std::vector<std::size_t> dims);

  /// Takes ownership of `data`; checks order and size but not finiteness.
  DenseTensor(std::vector<std::size_t> dims, std::vector<double> data);

  /// Same as the two-argument constructor, plus a finiteness check. Use for
  /// anything that came from outside the process.
  static DenseTensor from_external(std::vector<std::size_t> dims, std::vector<double> data);

  static DenseTensor matrix(std::size_t rows, std::size_t cols) { return DenseTensor({rows, cols}); }
  static DenseTensor vector(std::span<const double> values);

  std::size_t order() const noexcept { return dims_.size(); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  /// Extent of the 1-based mode `mode`.
  std::size_t dim(std::size_t mode) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t flat) noexcept { return data_[flat]; }
  double operator[](std::size_t flat) const noexcept { return data_[flat]; }

  // Element access by 0-based index; callers are responsible for the order.
  double& at(std::size_t i, std::size_t j) noexcept { return data_[i * dims_[1] + j]; }
  double at(std::size_t i, std::size_t j) const noexcept { return data_[i * dims_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }

  // Row access for order-2 tensors.
  std::size_t rows() const noexcept { return dims_[0]; }
  std::size_t cols() const noexcept { return dims_[1]; }
  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * dims_[1], dims_[1]}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * dims_[1], dims_[1]};
  }

  /// Same data viewed under new dims with equal element count.
  DenseTensor reshaped(std::vector<std::size_t> dims) const;

  bool operator==(const DenseTensor&) const = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

std::size_t product(std::span<const std::size_t> dims);

/// Mode-`mode` unfolding (1-based), returned as a fresh row-major matrix.
DenseTensor unfold(const DenseTensor& t, std::size_t mode);

/// Inverse of unfold: rebuilds a tensor with `dims` from its mode-`mode` unfolding.
DenseTensor fold(const DenseTensor& m, std::size_t mode, std::span<const std::size_t> dims);

/// Column-major vectorization, equal to vec(unfold(t, 1)).
DenseTensor vec(const DenseTensor& t);

/// Column-wise Kronecker product of A (n x R) and B (m x R): row i*m + j holds A[i,:] * B[j,:].
DenseTensor khatri_rao(const DenseTensor& a, const DenseTensor& b);

/// Contracts mode `mode` of `t` against `w`. The contracted mode is removed; an
/// order-1 input yields a length-1 tensor.
DenseTensor modal_product(const DenseTensor& t, std::span<const double> w, std::size_t mode);

/// Moves mode `mode` to the last position, keeping the relative order of the rest.
DenseTensor move_mode_to_last(const DenseTensor& t, std::size_t mode);

/// C = A * B^T for row-major matrices A (n x k), B (m x k).
DenseTensor matmul_transposed(const DenseTensor& a, const DenseTensor& b);

double frobenius_norm_sq(std::span<const double> x);

}  // namespace convkernel
