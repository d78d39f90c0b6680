#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace hqw {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Dense materialization above this dimension is refused.
inline constexpr std::size_t kDefaultDenseCap = 4096;
/// Degeneracy grouping and the K̄ zero-branch test share this tolerance.
inline constexpr double kGroupingTolerance = 1e-9;
inline constexpr double kStochasticTolerance = 1e-12;
/// Eigenvalues this close to 0 are exactly 0 before a square root is taken.
inline constexpr double kZeroEigenvalue = 1e-12;
inline constexpr double kBalanceTolerance = 1e-10;
inline constexpr double kHermitianTolerance = 1e-10;

enum class ErrorKind {
  InvalidGraph,
  NotRowStochastic,
  InvalidMeasure,
  IsolatedVertex,
  NotIrreducible,
  NoPositiveFixedVector,
  DimensionMismatch,
  NotReversible,
  NotHermitian,
  ConvergenceFailure,
  MissingTransition,
  DefectiveBlock,
  NegativeTime,
  NonpositiveDiagonal,
  NegativeLocalEigenvalue,
  InvalidProbabilityVector,
  NegativeWeight,
  InvalidP,
  ConstantOverlapViolated,
  NotNormalized,
  Overflow,
  DimensionCapExceeded,
  ShapeMismatch,
  InvalidInput,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidGraph: return "InvalidGraph";
    case ErrorKind::NotRowStochastic: return "NotRowStochastic";
    case ErrorKind::InvalidMeasure: return "InvalidMeasure";
    case ErrorKind::IsolatedVertex: return "IsolatedVertex";
    case ErrorKind::NotIrreducible: return "NotIrreducible";
    case ErrorKind::NoPositiveFixedVector: return "NoPositiveFixedVector";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotReversible: return "NotReversible";
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::MissingTransition: return "MissingTransition";
    case ErrorKind::DefectiveBlock: return "DefectiveBlock";
    case ErrorKind::NegativeTime: return "NegativeTime";
    case ErrorKind::NonpositiveDiagonal: return "NonpositiveDiagonal";
    case ErrorKind::NegativeLocalEigenvalue: return "NegativeLocalEigenvalue";
    case ErrorKind::InvalidProbabilityVector: return "InvalidProbabilityVector";
    case ErrorKind::NegativeWeight: return "NegativeWeight";
    case ErrorKind::InvalidP: return "InvalidP";
    case ErrorKind::ConstantOverlapViolated: return "ConstantOverlapViolated";
    case ErrorKind::NotNormalized: return "NotNormalized";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::DimensionCapExceeded: return "DimensionCapExceeded";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

/// Validation failures carry an ErrorKind; numerical failures are separated
/// from input problems by `is_numerical()`.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  bool is_numerical() const noexcept {
    switch (kind_) {
      case ErrorKind::ConvergenceFailure:
      case ErrorKind::DefectiveBlock:
      case ErrorKind::NoPositiveFixedVector:
      case ErrorKind::Overflow:
      case ErrorKind::NotReversible:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

inline double snap_zero(double x) { return std::abs(x) <= kZeroEigenvalue ? 0.0 : x; }

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }
inline double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline std::size_t product(const std::vector<std::size_t>& dims) {
  std::size_t p = 1;
  for (auto n : dims) p *= n;
  return p;
}

}  // namespace hqw
