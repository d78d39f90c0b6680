#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hqw/common.hpp"
#include "hqw/tensor.hpp"

namespace hqw {

/// Ascending eigenvalues with an orthonormal eigenvector basis; column m of
/// `vectors` pairs with values[m]. `groups` partitions the labels into
/// degeneracy clusters.
struct EigenSystem {
  Vector values;
  CMatrix vectors;
  std::vector<std::vector<std::size_t>> groups;
  double tolerance = kGroupingTolerance;

  std::size_t size() const noexcept { return static_cast<std::size_t>(values.size()); }

  CMatrix reconstruct() const {
    return vectors * values.cast<Complex>().asDiagonal() * vectors.adjoint();
  }

  /// Orthogonal projector onto the eigenspace of `group`.
  CMatrix projector(std::size_t group) const {
    CMatrix p = CMatrix::Zero(vectors.rows(), vectors.rows());
    for (auto m : groups.at(group)) p += vectors.col(m) * vectors.col(m).adjoint();
    return p;
  }
};

inline double hermitian_defect(const CMatrix& a) { return max_abs(CMatrix(a - a.adjoint())); }

/// Clusters consecutive ascending values whose gap is within `tol`.
inline std::vector<std::vector<std::size_t>> group_degenerate(const Vector& values, double tol) {
  std::vector<std::vector<std::size_t>> groups;
  for (Eigen::Index m = 0; m < values.size(); ++m) {
    if (groups.empty() || values(m) - values(m - 1) > tol) groups.emplace_back();
    groups.back().push_back(static_cast<std::size_t>(m));
  }
  return groups;
}

namespace detail {

/// Orthonormalizes proj·r over the columns r of `reference` (in the given
/// order) until `count` vectors are found.
inline std::vector<CVector> projected_gram_schmidt(const CMatrix& proj, const CMatrix& reference,
                                                   std::size_t count, bool reverse) {
  std::vector<CVector> basis;
  const auto cols = reference.cols();
  for (Eigen::Index i = 0; i < cols && basis.size() < count; ++i) {
    CVector x = proj * reference.col(reverse ? cols - 1 - i : i);
    for (const auto& b : basis) x -= b * b.dot(x);
    // Second pass keeps the basis orthonormal to rounding.
    for (const auto& b : basis) x -= b * b.dot(x);
    const double norm = x.norm();
    if (norm > 1e-6) basis.push_back(x / norm);
  }
  require(basis.size() == count, ErrorKind::ConvergenceFailure,
          "cluster basis could not be completed");
  if (reverse) std::reverse(basis.begin(), basis.end());
  return basis;
}

}  // namespace detail

/// Fixes the basis inside every degeneracy cluster to the Gram-Schmidt
/// orthonormalization of P e_0, P e_1, ... where P is the cluster projector.
/// The result depends only on the eigenspaces, not on the solver's phases.
inline void canonicalize(EigenSystem& sys) {
  const auto n = sys.vectors.rows();
  const CMatrix id = CMatrix::Identity(n, n);
  for (std::size_t g = 0; g < sys.groups.size(); ++g) {
    const auto& members = sys.groups[g];
    const auto basis = detail::projected_gram_schmidt(sys.projector(g), id, members.size(), false);
    for (std::size_t i = 0; i < members.size(); ++i) sys.vectors.col(members[i]) = basis[i];
  }
}

/// Same, relative to an ordered basis `reference` and top-down: the columns
/// are taken last to first and fill each cluster's labels from the highest.
inline void canonicalize(EigenSystem& sys, const CMatrix& reference) {
  require(reference.rows() == sys.vectors.rows(), ErrorKind::DimensionMismatch,
          "gauge reference dimension");
  for (std::size_t g = 0; g < sys.groups.size(); ++g) {
    const auto& members = sys.groups[g];
    const auto basis =
        detail::projected_gram_schmidt(sys.projector(g), reference, members.size(), true);
    for (std::size_t i = 0; i < members.size(); ++i) sys.vectors.col(members[i]) = basis[i];
  }
}

inline EigenSystem eigh(const CMatrix& a, double tol = kGroupingTolerance) {
  require(a.rows() == a.cols(), ErrorKind::DimensionMismatch, "eigh needs a square matrix");
  const double defect = hermitian_defect(a);
  require(defect <= kHermitianTolerance, ErrorKind::NotHermitian,
          "asymmetry " + std::to_string(defect));
  const CMatrix sym = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(sym);
  require(solver.info() == Eigen::Success, ErrorKind::ConvergenceFailure,
          "self-adjoint eigensolver did not converge");
  EigenSystem sys;
  sys.values = solver.eigenvalues();
  sys.vectors = solver.eigenvectors();
  sys.tolerance = tol;
  sys.groups = group_degenerate(sys.values, tol);
  return sys;
}

inline EigenSystem eigh(const Matrix& a, double tol = kGroupingTolerance) {
  return eigh(CMatrix(a.cast<Complex>()), tol);
}

/// eigh followed by canonicalize.
inline EigenSystem eigh_canonical(const CMatrix& a, double tol = kGroupingTolerance) {
  EigenSystem sys = eigh(a, tol);
  canonicalize(sys);
  return sys;
}

inline EigenSystem eigh_canonical(const CMatrix& a, const CMatrix& reference,
                                  double tol = kGroupingTolerance) {
  EigenSystem sys = eigh(a, tol);
  canonicalize(sys, reference);
  return sys;
}

/// Spectral data of a reversible transition matrix obtained from its
/// normalized Laplacian: P = Σ values[m] · right[:,m] · left[m,:].
struct TransitionSpectrum {
  Vector values;
  CMatrix right;  // columns D^{-1/2} v
  CMatrix left;   // rows v^H D^{1/2}

  CMatrix reconstruct() const { return right * values.cast<Complex>().asDiagonal() * left; }
};

inline TransitionSpectrum transition_spectrum(const EigenSystem& laplacian, const Vector& pi) {
  require(static_cast<Eigen::Index>(laplacian.size()) == pi.size() &&
              laplacian.vectors.rows() == pi.size(),
          ErrorKind::DimensionMismatch, "Laplacian spectrum and measure dimensions");
  const Vector root = pi.cwiseSqrt();
  TransitionSpectrum ts;
  ts.values = Vector::Ones(pi.size()) - laplacian.values;
  ts.right = root.cwiseInverse().cast<Complex>().asDiagonal() * laplacian.vectors;
  ts.left = laplacian.vectors.adjoint() * root.cast<Complex>().asDiagonal();
  return ts;
}

enum class ShiftMode { MinShift, MaxReflect };

struct SpectralShift {
  double offset = 0.0;
  ShiftMode mode = ShiftMode::MinShift;
};

/// Min-shift: values − λ_min. Max-reflect: λ_max − values (re-sorted ascending,
/// eigenvectors permuted with their values).
inline std::pair<EigenSystem, SpectralShift> shift_to_nonnegative(const EigenSystem& sys,
                                                                  ShiftMode mode) {
  EigenSystem out = sys;
  SpectralShift shift{0.0, mode};
  if (sys.size() == 0) return {out, shift};
  if (mode == ShiftMode::MinShift) {
    shift.offset = sys.values.minCoeff();
    out.values = sys.values.array() - shift.offset;
  } else {
    shift.offset = sys.values.maxCoeff();
    const auto n = static_cast<Eigen::Index>(sys.size());
    for (Eigen::Index m = 0; m < n; ++m) {
      out.values(m) = shift.offset - sys.values(n - 1 - m);
      out.vectors.col(m) = sys.vectors.col(n - 1 - m);
    }
  }
  out.groups = group_degenerate(out.values, out.tolerance);
  return {out, shift};
}

/// One tuple (ℓ^(0), …, ℓ^(d)) of eigen-labels across several systems.
class EigenTuple {
 public:
  EigenTuple(std::span<const EigenSystem> systems, std::vector<std::size_t> labels)
      : systems_(systems), labels_(std::move(labels)) {}

  const std::vector<std::size_t>& labels() const noexcept { return labels_; }
  std::size_t label(std::size_t j) const { return labels_.at(j); }
  double value(std::size_t j) const { return systems_[j].values(labels_.at(j)); }
  auto vector(std::size_t j) const { return systems_[j].vectors.col(labels_.at(j)); }

  Vector values() const {
    Vector v(labels_.size());
    for (std::size_t j = 0; j < labels_.size(); ++j) v(j) = value(j);
    return v;
  }

 private:
  std::span<const EigenSystem> systems_;
  std::vector<std::size_t> labels_;
};

/// Lexicographic enumeration of all label tuples, the last system fastest.
class TupleRange {
 public:
  explicit TupleRange(std::span<const EigenSystem> systems) : systems_(systems) {
    require(!systems_.empty(), ErrorKind::InvalidInput, "tuple enumeration needs a system");
    std::vector<std::size_t> dims;
    for (const auto& s : systems_) dims.push_back(s.size());
    shape_ = TensorShape(std::move(dims));
  }

  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = EigenTuple;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    iterator(const TupleRange* range, std::size_t flat)
        : range_(range), flat_(flat), labels_(range->shape_.rank(), 0) {
      if (flat_ < range_->size()) labels_ = range_->shape_.unflatten(flat_);
    }

    EigenTuple operator*() const { return EigenTuple(range_->systems_, labels_); }
    std::size_t index() const noexcept { return flat_; }

    iterator& operator++() {
      ++flat_;
      range_->shape_.next(labels_);
      return *this;
    }
    iterator operator++(int) {
      auto copy = *this;
      ++*this;
      return copy;
    }
    bool operator==(const iterator& other) const { return flat_ == other.flat_; }

   private:
    const TupleRange* range_ = nullptr;
    std::size_t flat_ = 0;
    std::vector<std::size_t> labels_;
  };

  iterator begin() const { return iterator(this, 0); }
  iterator end() const { return iterator(this, size()); }
  std::size_t size() const noexcept { return shape_.size(); }
  const TensorShape& shape() const noexcept { return shape_; }

 private:
  std::span<const EigenSystem> systems_;
  TensorShape shape_;
};

inline TupleRange tuple_iterator(std::span<const EigenSystem> systems) {
  return TupleRange(systems);
}

}  // namespace hqw
