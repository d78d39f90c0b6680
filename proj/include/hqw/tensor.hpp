#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hqw/common.hpp"

namespace hqw {

// Row-major multi-index over registers; the last register varies fastest.
class TensorShape {
 public:
  TensorShape() = default;
  explicit TensorShape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    strides_.assign(dims_.size(), 1);
    for (std::size_t j = dims_.size(); j-- > 1;) strides_[j - 1] = strides_[j] * dims_[j];
    size_ = product(dims_);
  }

  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return size_; }
  std::size_t dim(std::size_t j) const { return dims_.at(j); }
  std::size_t stride(std::size_t j) const { return strides_.at(j); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }

  std::size_t flatten(std::span<const std::size_t> index) const {
    require(index.size() == dims_.size(), ErrorKind::DimensionMismatch, "multi-index rank");
    std::size_t flat = 0;
    for (std::size_t j = 0; j < index.size(); ++j) {
      require(index[j] < dims_[j], ErrorKind::DimensionMismatch, "multi-index out of range");
      flat += index[j] * strides_[j];
    }
    return flat;
  }

  std::vector<std::size_t> unflatten(std::size_t flat) const {
    std::vector<std::size_t> index(dims_.size());
    for (std::size_t j = 0; j < dims_.size(); ++j) {
      index[j] = flat / strides_[j];
      flat %= strides_[j];
    }
    return index;
  }

  /// Odometer increment; returns false after the last index wraps.
  bool next(std::vector<std::size_t>& index) const {
    for (std::size_t j = dims_.size(); j-- > 0;) {
      if (++index[j] < dims_[j]) return true;
      index[j] = 0;
    }
    return false;
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 1;
};

/// Replaces x by (I ⊗ .. ⊗ M ⊗ .. ⊗ I) x with M acting on register j of `shape`.
template <typename MatrixT, typename VectorT>
void apply_on_register(const MatrixT& m, VectorT& x, const TensorShape& shape, std::size_t j) {
  using Scalar = typename VectorT::Scalar;
  const auto n = static_cast<Eigen::Index>(shape.dim(j));
  require(m.rows() == n && m.cols() == n, ErrorKind::DimensionMismatch, "register operator size");
  require(static_cast<std::size_t>(x.size()) == shape.size(), ErrorKind::DimensionMismatch,
          "tensor vector size");
  const std::size_t inner = shape.stride(j);
  const std::size_t outer = shape.size() / (inner * shape.dim(j));
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> fibre(n), image(n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * inner * shape.dim(j) + i;
      for (Eigen::Index a = 0; a < n; ++a) fibre(a) = x(base + a * inner);
      image.noalias() = m.template cast<Scalar>() * fibre;
      for (Eigen::Index a = 0; a < n; ++a) x(base + a * inner) = image(a);
    }
  }
}

/// ⊗_j v_j as a flat vector, register 0 slowest.
inline CVector tensor_product(std::span<const CVector> factors) {
  CVector out = CVector::Ones(1);
  for (const auto& f : factors) {
    CVector next(out.size() * f.size());
    for (Eigen::Index a = 0; a < out.size(); ++a) next.segment(a * f.size(), f.size()) = out(a) * f;
    out = std::move(next);
  }
  return out;
}

}  // namespace hqw
