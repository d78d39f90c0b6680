#pragma once

// Brute-force ground truth. Nothing here includes the hierarchy or
// quantum-walk headers: every quantity is recomputed from raw matrices.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hqw/common.hpp"

namespace hqw::oracle {

inline constexpr double kExpNormCap = 1e3;
inline constexpr int kTaylorTerms = 18;

struct ComparisonReport {
  double max_abs_diff = 0.0;
  std::vector<std::size_t> location;  // (row, col) of the worst entry
  double tolerance = 0.0;
  bool pass = true;
};

template <typename A, typename B>
  requires requires(const A& a, const B& b) { a.rows() + b.cols(); }
ComparisonReport compare(const A& a, const B& b, double tol) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::ShapeMismatch,
          "compare: shapes differ");
  ComparisonReport r;
  r.tolerance = tol;
  r.location = {0, 0};
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double d = std::abs(a(i, j) - b(i, j));
      if (d > r.max_abs_diff) {
        r.max_abs_diff = d;
        r.location = {static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
      }
    }
  r.pass = r.max_abs_diff <= tol;
  return r;
}

inline ComparisonReport compare(std::span<const double> a, std::span<const double> b, double tol) {
  require(a.size() == b.size(), ErrorKind::ShapeMismatch, "compare: lengths differ");
  ComparisonReport r;
  r.tolerance = tol;
  r.location = {0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (d > r.max_abs_diff) {
      r.max_abs_diff = d;
      r.location = {i};
    }
  }
  r.pass = r.max_abs_diff <= tol;
  return r;
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
/// Values ascending; columns of `vectors` orthonormal.
struct JacobiResult {
  Vector values;
  CMatrix vectors;
};

inline JacobiResult jacobi_eigh(const CMatrix& input) {
  require(input.rows() == input.cols(), ErrorKind::DimensionMismatch, "jacobi: square input");
  const auto n = input.rows();
  CMatrix a = 0.5 * (input + input.adjoint());
  CMatrix v = CMatrix::Identity(n, n);
  const double scale = std::max(1.0, a.norm());
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += std::norm(a(p, q));
    if (std::sqrt(off) <= 1e-15 * scale) break;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double r = std::abs(a(p, q));
        if (r <= 1e-300) continue;
        // Make a(p,q) real: conjugate by diag(1, .., e^{-iφ} at q, ..).
        const Complex phase = a(p, q) / r;
        a.col(q) *= std::conj(phase);
        a.row(q) *= phase;
        v.col(q) *= std::conj(phase);
        // Real symmetric rotation annihilating a(p,q) = r.
        const double app = a(p, p).real(), aqq = a(q, q).real();
        const double theta = 0.5 * std::atan2(2.0 * r, aqq - app);
        const double c = std::cos(theta), s = std::sin(theta);
        for (Eigen::Index k = 0; k < n; ++k) {
          const Complex akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Complex apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Complex vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
        a(p, q) = a(q, p) = 0.0;
      }
  }
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto x, auto y) { return a(x, x).real() < a(y, y).real(); });
  JacobiResult out{Vector(n), CMatrix(n, n)};
  for (Eigen::Index m = 0; m < n; ++m) {
    out.values(m) = a(order[m], order[m]).real();
    out.vectors.col(m) = v.col(order[m]);
  }
  return out;
}

/// Fixes each degeneracy cluster's basis to Gram-Schmidt of the projected
/// reference columns (clusters: consecutive gaps ≤ tol). With `top_down` the
/// columns are visited last to first and fill the cluster from its top label.
inline void canonical_gauge(JacobiResult& r, double tol, const CMatrix& reference,
                            bool top_down) {
  const auto n = r.values.size();
  const auto cols = reference.cols();
  Eigen::Index start = 0;
  while (start < n) {
    Eigen::Index stop = start + 1;
    while (stop < n && r.values(stop) - r.values(stop - 1) <= tol) ++stop;
    const auto width = stop - start;
    const CMatrix block = r.vectors.middleCols(start, width);
    const CMatrix proj = block * block.adjoint();
    std::vector<CVector> found;
    for (Eigen::Index e = 0; e < cols && static_cast<Eigen::Index>(found.size()) < width; ++e) {
      CVector x = proj * reference.col(top_down ? cols - 1 - e : e);
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& b : found) x -= b * b.dot(x);
      const double norm = x.norm();
      if (norm > 1e-6) found.push_back(x / norm);
    }
    require(static_cast<Eigen::Index>(found.size()) == width, ErrorKind::ConvergenceFailure,
            "oracle gauge");
    for (Eigen::Index b = 0; b < width; ++b)
      r.vectors.col(top_down ? stop - 1 - b : start + b) = found[b];
    start = stop;
  }
}

inline void canonical_gauge(JacobiResult& r, double tol) {
  const auto n = r.vectors.rows();
  canonical_gauge(r, tol, CMatrix::Identity(n, n), false);
}

/// Taylor series with scaling and squaring: ‖M/2^s‖₁ ≤ 1/2, 18 terms.
inline CMatrix matrix_exp_series(const CMatrix& m) {
  require(m.rows() == m.cols(), ErrorKind::DimensionMismatch, "matrix_exp: square input");
  for (Eigen::Index i = 0; i < m.size(); ++i)
    require(std::isfinite(m.data()[i].real()) && std::isfinite(m.data()[i].imag()),
            ErrorKind::InvalidInput, "matrix_exp: non-finite entry");
  require(max_abs(m) <= kExpNormCap, ErrorKind::Overflow, "matrix_exp: entries exceed 1e3");
  const auto n = m.rows();
  const double norm1 = n == 0 ? 0.0 : m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  while (norm1 / std::ldexp(1.0, squarings) > 0.5) ++squarings;
  const CMatrix x = m / std::ldexp(1.0, squarings);
  CMatrix term = CMatrix::Identity(n, n);
  CMatrix sum = term;
  for (int k = 1; k <= kTaylorTerms; ++k) {
    term = (term * x) / static_cast<double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = (sum * sum).eval();
  return sum;
}

/// exp(M). With `hermitian_hint` the input is treated as i·t·H-style
/// normal data: M is split as M = A + iB with A, B Hermitian and only the
/// single-Hermitian cases (B = 0 or A = 0) are diagonalized; anything else
/// falls back to the series.
inline CMatrix matrix_exp(const CMatrix& m, bool hermitian_hint = false) {
  if (!hermitian_hint) return matrix_exp_series(m);
  require(max_abs(m) <= kExpNormCap, ErrorKind::Overflow, "matrix_exp: entries exceed 1e3");
  const CMatrix herm = 0.5 * (m + m.adjoint());
  const CMatrix anti = 0.5 * (m - m.adjoint());
  const double scale = std::max(1.0, max_abs(m));
  Complex factor;
  CMatrix h;
  if (max_abs(anti) <= 1e-14 * scale) {
    h = herm;
    factor = 1.0;
  } else if (max_abs(herm) <= 1e-14 * scale) {
    h = Complex(0.0, -1.0) * anti;  // M = i·h
    factor = Complex(0.0, 1.0);
  } else {
    return matrix_exp_series(m);
  }
  const auto eig = jacobi_eigh(h);
  const CVector phases = (factor * eig.values.cast<Complex>()).array().exp();
  return eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
}

inline CMatrix matrix_exp(const Matrix& m, bool hermitian_hint = false) {
  return matrix_exp(CMatrix(m.cast<Complex>()), hermitian_hint);
}

/// Entry ((y,k),(y',k')) of Σ_j P_H|j⟩⟨j| ⊗ lift(A_j) by explicit loops;
/// `source_selection` switches to Σ_j |j⟩⟨j|P_H ⊗ lift(A_j).
inline Matrix assemble_by_loops(const Matrix& ph, std::span<const Matrix> local_ops,
                                bool source_selection = false) {
  const auto g = static_cast<std::size_t>(ph.rows());
  require(local_ops.size() == g, ErrorKind::DimensionMismatch, "one local operator per vertex");
  std::vector<std::size_t> dims;
  for (const auto& a : local_ops) dims.push_back(static_cast<std::size_t>(a.rows()));
  const std::size_t n = product(dims);
  auto digits = [&](std::size_t flat) {
    std::vector<std::size_t> k(dims.size());
    for (std::size_t j = dims.size(); j-- > 0;) {
      k[j] = flat % dims[j];
      flat /= dims[j];
    }
    return k;
  };
  Matrix out = Matrix::Zero(g * n, g * n);
  for (std::size_t y = 0; y < g; ++y)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t z = 0; z < g; ++z)
        for (std::size_t b = 0; b < n; ++b) {
          const auto k = digits(a), kk = digits(b);
          const std::size_t sel = source_selection ? y : z;
          bool others_equal = true;
          for (std::size_t j = 0; j < dims.size(); ++j)
            if (j != sel && k[j] != kk[j]) others_equal = false;
          if (!others_equal) continue;
          out(y * n + a, z * n + b) = ph(y, z) * local_ops[sel](k[sel], kk[sel]);
        }
  return out;
}

/// Dense 𝓗_G from raw Hamiltonians: Σ over label tuples of
/// Λ^{1/2} H_glob Λ^{1/2} ⊗ ⊗_j projectors, eigendata from Jacobi.
struct DenseModel {
  CMatrix global_ham;
  std::vector<JacobiResult> locals;
  std::vector<std::size_t> dims;
};

inline DenseModel dense_model(const CMatrix& global_ham, std::span<const CMatrix> local_hams) {
  DenseModel m{global_ham, {}, {}};
  for (const auto& h : local_hams) {
    m.locals.push_back(jacobi_eigh(h));
    m.dims.push_back(static_cast<std::size_t>(h.rows()));
  }
  return m;
}

inline std::vector<std::vector<std::size_t>> all_tuples(const std::vector<std::size_t>& dims) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> k(dims.size(), 0);
  const std::size_t total = product(dims);
  for (std::size_t flat = 0; flat < total; ++flat) {
    out.push_back(k);
    for (std::size_t j = dims.size(); j-- > 0;) {
      if (++k[j] < dims[j]) break;
      k[j] = 0;
    }
  }
  return out;
}

inline CMatrix tuple_block(const DenseModel& m, const std::vector<std::size_t>& tuple) {
  const auto g = m.global_ham.rows();
  CMatrix root = CMatrix::Zero(g, g);
  for (Eigen::Index j = 0; j < g; ++j) {
    const double lambda = m.locals[j].values(tuple[j]);
    root(j, j) = std::abs(lambda) <= 1e-12 ? 0.0 : std::sqrt(std::max(0.0, lambda));
  }
  return root * m.global_ham * root;
}

inline CMatrix dense_hamiltonian(const DenseModel& m) {
  const std::size_t n = product(m.dims);
  const auto g = static_cast<std::size_t>(m.global_ham.rows());
  require(g * n <= kDefaultDenseCap, ErrorKind::DimensionCapExceeded, "oracle dense Hamiltonian");
  CMatrix out = CMatrix::Zero(g * n, g * n);
  for (const auto& tuple : all_tuples(m.dims)) {
    CMatrix proj = CMatrix::Identity(1, 1);
    for (std::size_t j = 0; j < tuple.size(); ++j) {
      const CVector v = m.locals[j].vectors.col(tuple[j]);
      proj = kron(proj, CMatrix(v * v.adjoint()));
    }
    out += kron(tuple_block(m, tuple), proj);
  }
  return out;
}

enum class MarginalBasis { Tuple, Vertex };

/// Joint law of the local positions by direct nested summation.
/// Tuple: Σ_ℓ |Σ_tuple ⟨w_ℓ|ψ_H⟩ e^{itμ_ℓ} Π_j ⟨k_j|v⟩⟨v|ψ_j⟩|², with each
/// tuple block's eigenbasis in the canonical gauge (clusters built from the
/// global Hamiltonian's canonical eigenvectors).
/// Vertex: Σ_y |⟨y,k|exp(it𝓗_G)|ψ⟩|² using the series exponential.
inline std::vector<double> dense_joint_distribution(const CMatrix& global_ham,
                                                    std::span<const CMatrix> local_hams, double t,
                                                    const CVector& psi_h,
                                                    std::span<const CVector> psis,
                                                    MarginalBasis basis,
                                                    double tol = kGroupingTolerance) {
  const auto m = dense_model(global_ham, local_hams);
  const std::size_t n = product(m.dims);
  const auto g = static_cast<std::size_t>(global_ham.rows());
  require(g * n <= kDefaultDenseCap, ErrorKind::DimensionCapExceeded,
          "oracle distribution dimension " + std::to_string(g * n));
  std::vector<double> out(n, 0.0);
  const auto tuples = all_tuples(m.dims);

  if (basis == MarginalBasis::Vertex) {
    CVector psi = psi_h;
    for (const auto& p : psis) {
      CVector next(psi.size() * p.size());
      for (Eigen::Index a = 0; a < psi.size(); ++a) next.segment(a * p.size(), p.size()) = psi(a) * p;
      psi = next;
    }
    const CMatrix h = dense_hamiltonian(m);
    // Split the time so the series input stays under the norm cap.
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) * max_abs(h) / 100.0)));
    const CMatrix step = matrix_exp_series(Complex(0.0, t / steps) * h);
    for (int s = 0; s < steps; ++s) psi = step * psi;
    for (std::size_t y = 0; y < g; ++y)
      for (std::size_t k = 0; k < n; ++k) out[k] += std::norm(psi(y * n + k));
    return out;
  }

  // Tuple bases are fixed relative to the global Hamiltonian's own eigenbasis.
  auto global = jacobi_eigh(global_ham);
  canonical_gauge(global, tol);
  std::vector<JacobiResult> blocks;
  for (const auto& tuple : tuples) {
    auto r = jacobi_eigh(tuple_block(m, tuple));
    canonical_gauge(r, tol, global.vectors, true);
    blocks.push_back(std::move(r));
  }
  for (std::size_t kf = 0; kf < n; ++kf) {
    const auto& k = tuples[kf];  // same odometer order as positions
    for (std::size_t l = 0; l < g; ++l) {
      Complex amp = 0.0;
      for (std::size_t tf = 0; tf < tuples.size(); ++tf) {
        const auto& tuple = tuples[tf];
        Complex term = blocks[tf].vectors.col(l).dot(psi_h) *
                       std::exp(Complex(0.0, t * blocks[tf].values(l)));
        for (std::size_t j = 0; j < tuple.size(); ++j) {
          const CVector v = m.locals[j].vectors.col(tuple[j]);
          term *= v(k[j]) * v.dot(psis[j]);
        }
        amp += term;
      }
      out[kf] += std::norm(amp);
    }
  }
  return out;
}

}  // namespace hqw::oracle
