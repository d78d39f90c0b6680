#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hqw/common.hpp"
#include "hqw/graph.hpp"
#include "hqw/hierarchy.hpp"
#include "hqw/spectral.hpp"
#include "hqw/tensor.hpp"

namespace hqw {

inline constexpr double kStateTolerance = 1e-12;

/// Unit-norm amplitude vector.
class QuantumState {
 public:
  explicit QuantumState(CVector amplitudes, double tol = kStateTolerance)
      : amplitudes_(std::move(amplitudes)) {
    require(amplitudes_.size() > 0, ErrorKind::DimensionMismatch, "empty state");
    norm_ = amplitudes_.norm();
    require(std::abs(norm_ - 1.0) <= tol, ErrorKind::NotNormalized,
            "state norm " + std::to_string(norm_));
  }

  /// Rescales to unit norm when the defect is at most `accept`; `renormalized`
  /// reports whether rescaling was needed.
  static QuantumState normalized(CVector amplitudes, double accept, bool* renormalized = nullptr) {
    const double norm = amplitudes.norm();
    require(std::abs(norm - 1.0) <= accept, ErrorKind::NotNormalized,
            "state norm " + std::to_string(norm) + " is too far from 1");
    if (renormalized) *renormalized = std::abs(norm - 1.0) > kStateTolerance;
    return QuantumState(amplitudes / norm);
  }

  static QuantumState basis(std::size_t dim, std::size_t k) {
    CVector v = CVector::Zero(dim);
    v(k) = 1.0;
    return QuantumState(std::move(v));
  }

  const CVector& amplitudes() const noexcept { return amplitudes_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(amplitudes_.size()); }
  double norm() const noexcept { return norm_; }
  Complex operator()(std::size_t k) const { return amplitudes_(k); }

 private:
  CVector amplitudes_;
  double norm_ = 1.0;
};

enum class Formula { General, VertexMarginal, ClosedForm, ThreeTerm, Factorized, SingleGraph };

inline std::string_view to_string(Formula f) {
  switch (f) {
    case Formula::General: return "general";
    case Formula::VertexMarginal: return "vertex-marginal";
    case Formula::ClosedForm: return "closed-form";
    case Formula::ThreeTerm: return "three-term";
    case Formula::Factorized: return "factorized";
    case Formula::SingleGraph: return "single-graph";
  }
  return "unknown";
}

/// Probabilities over local positions (k_0..k_d), row-major with k_d fastest.
struct JointDistribution {
  TensorShape shape;
  std::vector<double> probabilities;
  double time = 0.0;
  Formula formula = Formula::General;

  double at(std::span<const std::size_t> k) const { return probabilities.at(shape.flatten(k)); }
  double total() const {
    double s = 0.0;
    for (double p : probabilities) s += p;
    return s;
  }
  double min() const { return *std::min_element(probabilities.begin(), probabilities.end()); }
  double mass_defect() const { return std::abs(total() - 1.0); }

  double max_difference(const JointDistribution& other) const {
    require(other.probabilities.size() == probabilities.size(), ErrorKind::ShapeMismatch,
            "distribution shapes differ");
    double worst = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i)
      worst = std::max(worst, std::abs(probabilities[i] - other.probabilities[i]));
    return worst;
  }
};

struct TupleHamiltonian {
  std::vector<std::size_t> labels;
  Vector lambda;          // diagonal of Λ^(tuple): local eigenvalues
  CMatrix block;          // Λ^{1/2} 𝓗_H Λ^{1/2}
  EigenSystem spectrum;   // canonical gauge, ascending
};

struct AssemblyOptions {
  double tolerance = kGroupingTolerance;
  std::size_t dense_cap = kDefaultDenseCap;
};

/// 𝓗_G = Σ_tuple 𝓗_H^(tuple) ⊗ ⊗_j |v_ℓj⟩⟨v_ℓj|, stored per tuple.
class HamiltonianAssembly {
 public:
  HamiltonianAssembly(CMatrix global_ham, std::vector<EigenSystem> local_systems,
                      AssemblyOptions options = {})
      : global_ham_(std::move(global_ham)), locals_(std::move(local_systems)), options_(options) {
    require(global_ham_.rows() == global_ham_.cols(), ErrorKind::DimensionMismatch,
            "global Hamiltonian must be square");
    require(hermitian_defect(global_ham_) <= kHermitianTolerance, ErrorKind::NotHermitian,
            "global Hamiltonian");
    require(static_cast<std::size_t>(global_ham_.rows()) == locals_.size(),
            ErrorKind::DimensionMismatch, "one local system per global vertex");
    std::vector<std::size_t> dims;
    for (std::size_t j = 0; j < locals_.size(); ++j) {
      const auto& sys = locals_[j];
      require(sys.size() > 0, ErrorKind::DimensionMismatch, "empty local system");
      require(sys.values.minCoeff() >= -kStochasticTolerance, ErrorKind::NegativeLocalEigenvalue,
              "local Hamiltonian " + std::to_string(j) + " has eigenvalue " +
                  std::to_string(sys.values.minCoeff()) + "; shift it to be nonnegative first");
      dims.push_back(sys.size());
    }
    shape_ = TensorShape(std::move(dims));
    // Tuple bases inherit the gauge of 𝓗_H's own canonical eigenbasis.
    reference_ = eigh_canonical(global_ham_, options_.tolerance).vectors;
    for (const auto& tuple : tuple_iterator(locals_)) {
      TupleHamiltonian th;
      th.labels = tuple.labels();
      th.lambda = tuple.values().unaryExpr([](double x) { return std::max(snap_zero(x), 0.0); });
      const Vector root = th.lambda.cwiseSqrt();
      th.block = root.cast<Complex>().asDiagonal() * global_ham_ * root.cast<Complex>().asDiagonal();
      th.block = 0.5 * (th.block + th.block.adjoint()).eval();
      th.spectrum = eigh_canonical(th.block, reference_, options_.tolerance);
      tuples_.push_back(std::move(th));
    }
  }

  const CMatrix& global_hamiltonian() const noexcept { return global_ham_; }
  /// Canonical eigenbasis of 𝓗_H; the Gram-Schmidt reference for every tuple block.
  const CMatrix& gauge_reference() const noexcept { return reference_; }
  const std::vector<EigenSystem>& local_systems() const noexcept { return locals_; }
  const std::vector<TupleHamiltonian>& tuples() const noexcept { return tuples_; }
  const TensorShape& local_shape() const noexcept { return shape_; }
  std::size_t global_size() const noexcept { return locals_.size(); }
  std::size_t local_size() const noexcept { return shape_.size(); }
  std::size_t total_dimension() const noexcept { return global_size() * local_size(); }
  const AssemblyOptions& options() const noexcept { return options_; }

  /// Dense 𝓗_G (below the cap).
  CMatrix dense() const {
    require(total_dimension() <= options_.dense_cap, ErrorKind::DimensionCapExceeded,
            "dense Hamiltonian of dimension " + std::to_string(total_dimension()));
    const auto dim = static_cast<Eigen::Index>(total_dimension());
    CMatrix out = CMatrix::Zero(dim, dim);
    for (const auto& th : tuples_) {
      CMatrix proj = CMatrix::Identity(1, 1);
      for (std::size_t j = 0; j < locals_.size(); ++j) {
        const auto v = locals_[j].vectors.col(th.labels[j]);
        proj = kron(proj, CMatrix(v * v.adjoint()));
      }
      out += kron(th.block, proj);
    }
    return out;
  }

  /// x ↦ Σ_tuple (f_tuple ⊗ projectors) x, where f_tuple acts on the global register.
  template <typename BlockFn>
  CVector apply_blockwise(const CVector& x, BlockFn&& block_for) const {
    require(static_cast<std::size_t>(x.size()) == total_dimension(), ErrorKind::DimensionMismatch,
            "state dimension " + std::to_string(x.size()) + " vs " +
                std::to_string(total_dimension()));
    const auto n = static_cast<Eigen::Index>(local_size());
    const auto g = static_cast<Eigen::Index>(global_size());
    // Coefficients in the local eigenbases, one column per global vertex.
    CMatrix coeff(n, g);
    for (Eigen::Index y = 0; y < g; ++y) {
      CVector piece = x.segment(y * n, n);
      for (std::size_t j = 0; j < locals_.size(); ++j)
        apply_on_register(CMatrix(locals_[j].vectors.adjoint()), piece, shape_, j);
      coeff.col(y) = piece;
    }
    for (std::size_t tau = 0; tau < tuples_.size(); ++tau) {
      const CVector mixed = block_for(tuples_[tau]) * coeff.row(tau).transpose();
      coeff.row(tau) = mixed.transpose();
    }
    CVector out(x.size());
    for (Eigen::Index y = 0; y < g; ++y) {
      CVector piece = coeff.col(y);
      for (std::size_t j = 0; j < locals_.size(); ++j)
        apply_on_register(locals_[j].vectors, piece, shape_, j);
      out.segment(y * n, n) = piece;
    }
    return out;
  }

  CVector apply(const CVector& x) const {
    return apply_blockwise(x, [](const TupleHamiltonian& th) -> const CMatrix& { return th.block; });
  }

 private:
  CMatrix global_ham_;
  std::vector<EigenSystem> locals_;
  AssemblyOptions options_;
  CMatrix reference_;
  TensorShape shape_;
  std::vector<TupleHamiltonian> tuples_;
};

inline HamiltonianAssembly assemble_hamiltonian(const CMatrix& global_ham,
                                                std::vector<EigenSystem> local_systems,
                                                AssemblyOptions options = {}) {
  return HamiltonianAssembly(global_ham, std::move(local_systems), options);
}

/// exp(it λ) phases applied in the tuple's global eigenbasis.
inline CMatrix tuple_propagator(const TupleHamiltonian& th, double t) {
  const CVector phases = (Complex(0.0, t) * th.spectrum.values.cast<Complex>()).array().exp();
  return th.spectrum.vectors * phases.asDiagonal() * th.spectrum.vectors.adjoint();
}

/// U_G(t)ψ = exp(it𝓗_G)ψ through the tuple-factored spectral decomposition.
inline QuantumState evolve(const HamiltonianAssembly& assembly, double t, const QuantumState& psi) {
  CVector out = assembly.apply_blockwise(
      psi.amplitudes(), [t](const TupleHamiltonian& th) { return tuple_propagator(th, t); });
  return QuantumState(std::move(out), 1e-10);
}

/// Dense U_G(t) assembled from its spectral decomposition (below the cap).
inline CMatrix spectral_propagator(const HamiltonianAssembly& assembly, double t) {
  require(assembly.total_dimension() <= assembly.options().dense_cap,
          ErrorKind::DimensionCapExceeded, "dense propagator");
  const auto dim = static_cast<Eigen::Index>(assembly.total_dimension());
  CMatrix out = CMatrix::Zero(dim, dim);
  for (const auto& th : assembly.tuples()) {
    CMatrix proj = CMatrix::Identity(1, 1);
    for (std::size_t j = 0; j < assembly.local_systems().size(); ++j) {
      const auto v = assembly.local_systems()[j].vectors.col(th.labels[j]);
      proj = kron(proj, CMatrix(v * v.adjoint()));
    }
    out += kron(tuple_propagator(th, t), proj);
  }
  return out;
}

inline QuantumState product_state(const QuantumState& global, std::span<const QuantumState> locals) {
  std::vector<CVector> factors{global.amplitudes()};
  for (const auto& s : locals) factors.push_back(s.amplitudes());
  return QuantumState(tensor_product(factors), 1e-10);
}

namespace detail {

inline void require_local_states(const TensorShape& shape, std::span<const QuantumState> psis) {
  require(psis.size() == shape.rank(), ErrorKind::DimensionMismatch,
          "need one initial state per local graph");
  for (std::size_t j = 0; j < psis.size(); ++j)
    require(psis[j].size() == shape.dim(j), ErrorKind::DimensionMismatch,
            "initial state " + std::to_string(j) + " has the wrong dimension");
}

/// ⟨v_ℓ|ψ_j⟩ for each local graph.
inline std::vector<CVector> local_overlaps(std::span<const EigenSystem> systems,
                                           std::span<const QuantumState> psis) {
  std::vector<CVector> out;
  for (std::size_t j = 0; j < systems.size(); ++j)
    out.push_back(systems[j].vectors.adjoint() * psis[j].amplitudes());
  return out;
}

/// Maps a tensor of tuple coefficients a(τ) to Σ_τ a(τ) Π_j ⟨k_j|v_τj⟩.
inline CVector to_positions(CVector coeff, std::span<const EigenSystem> systems,
                            const TensorShape& shape) {
  for (std::size_t j = 0; j < systems.size(); ++j)
    apply_on_register(systems[j].vectors, coeff, shape, j);
  return coeff;
}

inline JointDistribution make_distribution(const TensorShape& shape, double t, Formula f) {
  return JointDistribution{shape, std::vector<double>(shape.size(), 0.0), t, f};
}

/// Π_j ⟨v_ℓj|ψ_j⟩ for one tuple of labels.
inline Complex product_weight(std::span<const CVector> overlaps, std::span<const std::size_t> labels) {
  Complex out = 1.0;
  for (std::size_t j = 0; j < labels.size(); ++j) out *= overlaps[j](labels[j]);
  return out;
}

}  // namespace detail

/// ℙ(k) = Σ_ℓ |Σ_tuple ⟨v_ℓ^(tuple)|ψ_H⟩ e^{itλ_ℓ^(tuple)} Π_j ⟨k_j|v_ℓj⟩⟨v_ℓj|ψ_j⟩|².
inline JointDistribution joint_distribution(const HamiltonianAssembly& assembly, double t,
                                            const QuantumState& psi_h,
                                            std::span<const QuantumState> psis) {
  const auto& shape = assembly.local_shape();
  require(psi_h.size() == assembly.global_size(), ErrorKind::DimensionMismatch, "ψ_H dimension");
  detail::require_local_states(shape, psis);
  const auto overlaps = detail::local_overlaps(assembly.local_systems(), psis);
  auto dist = detail::make_distribution(shape, t, Formula::General);
  const auto n = static_cast<Eigen::Index>(shape.size());
  for (std::size_t l = 0; l < assembly.global_size(); ++l) {
    CVector coeff(n);
    for (Eigen::Index tau = 0; tau < n; ++tau) {
      const auto& th = assembly.tuples()[tau];
      const Complex local = detail::product_weight(overlaps, th.labels);
      const Complex global = th.spectrum.vectors.col(l).dot(psi_h.amplitudes());
      coeff(tau) = global * std::exp(Complex(0.0, t * th.spectrum.values(l))) * local;
    }
    const CVector amp = detail::to_positions(std::move(coeff), assembly.local_systems(), shape);
    for (Eigen::Index k = 0; k < n; ++k) dist.probabilities[k] += std::norm(amp(k));
  }
  return dist;
}

/// Diagnostic: Σ_y |⟨y, k|U_G(t)|ψ_H ⊗ ψ_0 ⊗ … ⊗ ψ_d⟩|², the marginal in the
/// vertex basis of the global register.
inline JointDistribution vertex_marginal(const HamiltonianAssembly& assembly, double t,
                                         const QuantumState& psi_h,
                                         std::span<const QuantumState> psis) {
  detail::require_local_states(assembly.local_shape(), psis);
  const auto state = evolve(assembly, t, product_state(psi_h, psis));
  auto dist = detail::make_distribution(assembly.local_shape(), t, Formula::VertexMarginal);
  const auto n = assembly.local_size();
  for (std::size_t y = 0; y < assembly.global_size(); ++y)
    for (std::size_t k = 0; k < n; ++k) dist.probabilities[k] += std::norm(state(y * n + k));
  return dist;
}

/// Single-graph CTQW law |⟨k|e^{it𝓗}|ψ⟩|² from the Hamiltonian's eigensystem.
inline std::vector<double> single_graph_distribution(const EigenSystem& ham, const QuantumState& psi,
                                                     double t) {
  require(psi.size() == ham.size(), ErrorKind::DimensionMismatch, "state dimension");
  const CVector phases = (Complex(0.0, t) * ham.values.cast<Complex>()).array().exp();
  const CVector amp =
      ham.vectors * (phases.asDiagonal() * (ham.vectors.adjoint() * psi.amplitudes()));
  std::vector<double> out(psi.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::norm(amp(k));
  return out;
}

/// CTQW on a reversible graph driven by its normalized Laplacian; the phases
/// are e^{it(1−λ)} with λ the transition eigenvalues.
inline std::vector<double> single_ctqw_distribution(const GraphModel& g, const QuantumState& psi,
                                                    double t) {
  const GraphModel walk = g.transition() ? g : uniform_walk_transition(g);
  return single_graph_distribution(analyse_walk(walk).laplacian_spectrum, psi, t);
}

// ---------------------------------------------------------------------------
// H = K̄_{d+1}: complete graph with self-loops, P[j][k] = q_k.

struct KbarSpec {
  Vector q;
  double tolerance = kGroupingTolerance;

  explicit KbarSpec(Vector weights, double tol = kGroupingTolerance)
      : q(std::move(weights)), tolerance(tol) {
    require(q.size() >= 1, ErrorKind::InvalidProbabilityVector, "q is empty");
    for (Eigen::Index j = 0; j < q.size(); ++j)
      require(std::isfinite(q(j)) && q(j) > 0.0 && q(j) < 1.0, ErrorKind::InvalidProbabilityVector,
              "q_" + std::to_string(j) + " must lie in (0,1)");
    require(std::abs(q.sum() - 1.0) <= kStochasticTolerance, ErrorKind::InvalidProbabilityVector,
            "q must sum to 1");
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(q.size()); }
};

/// (Σ√q_j|j⟩)(Σ√q_j⟨j|).
inline Matrix kbar_hamiltonian(const KbarSpec& spec) {
  const Vector root = spec.q.cwiseSqrt();
  return root * root.transpose();
}

enum class KbarBranch { Weighted, Uniform };

struct KbarTupleVector {
  Vector vector;
  KbarBranch branch = KbarBranch::Weighted;
  double weight = 0.0;  // Σ_j (1−λ_j) q_j, the nonzero eigenvalue of the tuple block
};

/// Unit vector spanning the range of the tuple block Λ^{1/2}𝓗_K̄Λ^{1/2}, or
/// Σ√q_j|j⟩ when every (1−λ_j) vanishes. `gaps` holds the 1−λ values.
inline KbarTupleVector kbar_tuple_vector(const Vector& gaps, const KbarSpec& spec) {
  require(gaps.size() == spec.q.size(), ErrorKind::DimensionMismatch, "tuple length");
  KbarTupleVector out;
  Vector w(gaps.size());
  for (Eigen::Index j = 0; j < gaps.size(); ++j) {
    const double weight = snap_zero(gaps(j)) * spec.q(j);
    require(weight >= -spec.tolerance, ErrorKind::NegativeWeight,
            "(1-λ)q is negative for register " + std::to_string(j));
    w(j) = std::max(weight, 0.0);
  }
  if (gaps.cwiseAbs().maxCoeff() > spec.tolerance) {
    out.branch = KbarBranch::Weighted;
    out.weight = w.sum();
    out.vector = w.cwiseSqrt() / std::sqrt(out.weight);
  } else {
    out.branch = KbarBranch::Uniform;
    out.weight = 0.0;
    out.vector = spec.q.cwiseSqrt();
  }
  return out;
}

namespace detail {

inline void require_kbar_inputs(const KbarSpec& spec, std::span<const EigenSystem> laplacians,
                                std::span<const QuantumState> psis) {
  require(laplacians.size() == spec.size(), ErrorKind::DimensionMismatch,
          "one local Laplacian per q entry");
  std::vector<std::size_t> dims;
  for (const auto& s : laplacians) dims.push_back(s.size());
  require_local_states(TensorShape(dims), psis);
}

/// A(t)(k) = Σ_tuple ⟨v^(tuple)|ψ_H⟩ Π_j e^{it(1−λ_j)q_j} ⟨k_j|v_ℓj⟩⟨v_ℓj|ψ_j⟩.
inline CVector kbar_leading_amplitude(const KbarSpec& spec, std::span<const EigenSystem> laplacians,
                                      double t, const QuantumState& psi_h,
                                      std::span<const QuantumState> psis) {
  const auto overlaps = local_overlaps(laplacians, psis);
  const TupleRange range(laplacians);
  CVector coeff(static_cast<Eigen::Index>(range.size()));
  for (auto it = range.begin(); it != range.end(); ++it) {
    const auto tuple = *it;
    const Vector gaps = tuple.values();
    const auto tv = kbar_tuple_vector(gaps, spec);
    Complex c = tv.vector.cast<Complex>().dot(psi_h.amplitudes());
    for (Eigen::Index j = 0; j < gaps.size(); ++j)
      c *= std::exp(Complex(0.0, t * gaps(j) * spec.q(j))) *
           overlaps[j](tuple.label(static_cast<std::size_t>(j)));
    coeff(it.index()) = c;
  }
  return to_positions(std::move(coeff), laplacians, range.shape());
}

/// Orthonormal basis of the complement of the unit vector v: Gram-Schmidt of
/// (I − vvᵀ)r over the reference columns, last to first when `top_down`
/// (the result is then listed in reverse so it lines up with ascending labels).
inline std::vector<Vector> complement_basis(const Vector& v, const Matrix& reference,
                                            bool top_down) {
  const auto n = v.size();
  const Matrix proj = Matrix::Identity(n, n) - v * v.transpose();
  const auto cols = reference.cols();
  std::vector<Vector> basis;
  for (Eigen::Index i = 0; i < cols && static_cast<Eigen::Index>(basis.size()) < n - 1; ++i) {
    Vector x = proj * reference.col(top_down ? cols - 1 - i : i);
    for (const auto& b : basis) x -= b * b.dot(x);
    for (const auto& b : basis) x -= b * b.dot(x);
    const double norm = x.norm();
    if (norm > 1e-6) basis.push_back(x / norm);
  }
  if (top_down) std::reverse(basis.begin(), basis.end());
  return basis;
}

/// Eigenbasis of √q√qᵀ in ascending order: the complement of √q (built from
/// e_0, e_1, …), then √q.
inline Matrix kbar_reference(const KbarSpec& spec) {
  const Vector root = spec.q.cwiseSqrt();
  const auto n = root.size();
  const auto kernel = complement_basis(root, Matrix::Identity(n, n), false);
  Matrix out(n, n);
  for (Eigen::Index c = 0; c + 1 < n; ++c) out.col(c) = kernel[c];
  out.col(n - 1) = root;
  return out;
}

}  // namespace detail

/// The general marginal formula evaluated with the closed-form tuple
/// eigenbasis: labels 0..d−1 span the kernel (phase 1), label d is
/// |v^(tuple)⟩ with phase Π_j e^{it(1−λ_j)q_j}.
inline JointDistribution kbar_closed_form_distribution(const KbarSpec& spec,
                                                 std::span<const EigenSystem> laplacians, double t,
                                                 const QuantumState& psi_h,
                                                 std::span<const QuantumState> psis) {
  detail::require_kbar_inputs(spec, laplacians, psis);
  require(psi_h.size() == spec.size(), ErrorKind::DimensionMismatch, "ψ_H dimension");
  const auto overlaps = detail::local_overlaps(laplacians, psis);
  const TupleRange range(laplacians);
  const auto g = spec.size();
  const auto n = static_cast<Eigen::Index>(range.size());
  std::vector<CVector> coeff(g, CVector::Zero(n));
  const Matrix reference = detail::kbar_reference(spec);
  for (auto it = range.begin(); it != range.end(); ++it) {
    const auto tuple = *it;
    const Vector gaps = tuple.values();
    const auto tv = kbar_tuple_vector(gaps, spec);
    const Complex local = detail::product_weight(overlaps, tuple.labels());
    const auto kernel = detail::complement_basis(tv.vector, reference, true);
    for (std::size_t l = 0; l + 1 < g; ++l)
      coeff[l](it.index()) = kernel[l].cast<Complex>().dot(psi_h.amplitudes()) * local;
    Complex phase = 1.0;
    for (Eigen::Index j = 0; j < gaps.size(); ++j)
      phase *= std::exp(Complex(0.0, t * gaps(j) * spec.q(j)));
    coeff[g - 1](it.index()) = tv.vector.cast<Complex>().dot(psi_h.amplitudes()) * phase * local;
  }
  auto dist = detail::make_distribution(range.shape(), t, Formula::ClosedForm);
  for (auto& c : coeff) {
    const CVector amp = detail::to_positions(std::move(c), laplacians, range.shape());
    for (Eigen::Index k = 0; k < n; ++k) dist.probabilities[k] += std::norm(amp(k));
  }
  return dist;
}

/// |A(t)|² + Π_j|⟨k_j|ψ_j⟩|² − |A(0)|², with 𝓗_Gj = 𝓛_Gj.
inline JointDistribution kbar_joint_distribution(const KbarSpec& spec,
                                                 std::span<const EigenSystem> laplacians, double t,
                                                 const QuantumState& psi_h,
                                                 std::span<const QuantumState> psis) {
  detail::require_kbar_inputs(spec, laplacians, psis);
  require(psi_h.size() == spec.size(), ErrorKind::DimensionMismatch, "ψ_H dimension");
  const CVector moving = detail::kbar_leading_amplitude(spec, laplacians, t, psi_h, psis);
  const CVector frozen = detail::kbar_leading_amplitude(spec, laplacians, 0.0, psi_h, psis);
  std::vector<std::size_t> dims;
  for (const auto& s : laplacians) dims.push_back(s.size());
  auto dist = detail::make_distribution(TensorShape(dims), t, Formula::ThreeTerm);
  std::vector<std::size_t> k(dims.size(), 0);
  for (std::size_t flat = 0; flat < dist.probabilities.size(); ++flat, dist.shape.next(k)) {
    double initial = 1.0;
    for (std::size_t j = 0; j < k.size(); ++j) initial *= std::norm(psis[j](k[j]));
    dist.probabilities[flat] = std::norm(moving(flat)) + initial - std::norm(frozen(flat));
  }
  return dist;
}

/// p·Π_j ℙ(X^(j)_{q_j t} = k_j) + (1−p)·Π_j ℙ(X^(j)_0 = k_j).
inline JointDistribution factorized_distribution(const KbarSpec& spec,
                                                 std::span<const EigenSystem> laplacians, double t,
                                                 double p, std::span<const QuantumState> psis) {
  require(std::isfinite(p) && p >= 0.0 && p <= 1.0, ErrorKind::InvalidP, "p must lie in [0,1]");
  detail::require_kbar_inputs(spec, laplacians, psis);
  std::vector<std::vector<double>> moving, frozen;
  std::vector<std::size_t> dims;
  for (std::size_t j = 0; j < laplacians.size(); ++j) {
    moving.push_back(single_graph_distribution(laplacians[j], psis[j], spec.q(j) * t));
    frozen.push_back(single_graph_distribution(laplacians[j], psis[j], 0.0));
    dims.push_back(laplacians[j].size());
  }
  auto dist = detail::make_distribution(TensorShape(dims), t, Formula::Factorized);
  std::vector<std::size_t> k(dims.size(), 0);
  for (std::size_t flat = 0; flat < dist.probabilities.size(); ++flat, dist.shape.next(k)) {
    double a = 1.0, b = 1.0;
    for (std::size_t j = 0; j < k.size(); ++j) {
      a *= moving[j][k[j]];
      b *= frozen[j][k[j]];
    }
    dist.probabilities[flat] = p * a + (1.0 - p) * b;
  }
  return dist;
}

/// Overlaps ⟨v^(tuple)|ψ_H⟩ over all tuples.
struct OverlapReport {
  double p = 0.0;                // mean of |⟨v^(tuple)|ψ_H⟩|²
  double modulus_spread = 0.0;   // max − min of |⟨v^(tuple)|ψ_H⟩|²
  double complex_spread = 0.0;   // max |⟨v^(tuple)|ψ_H⟩ − ⟨v^(first)|ψ_H⟩|
  Complex common = 0.0;          // overlap of the first tuple
};

inline OverlapReport tuple_overlaps(const KbarSpec& spec, std::span<const EigenSystem> laplacians,
                                    const QuantumState& psi_h) {
  require(psi_h.size() == spec.size(), ErrorKind::DimensionMismatch, "ψ_H dimension");
  OverlapReport r;
  double lo = 2.0, hi = -1.0, sum = 0.0;
  std::size_t count = 0;
  for (const auto& tuple : tuple_iterator(laplacians)) {
    const Complex ov = kbar_tuple_vector(tuple.values(), spec).vector.cast<Complex>().dot(
        psi_h.amplitudes());
    if (count == 0) r.common = ov;
    r.complex_spread = std::max(r.complex_spread, std::abs(ov - r.common));
    lo = std::min(lo, std::norm(ov));
    hi = std::max(hi, std::norm(ov));
    sum += std::norm(ov);
    ++count;
  }
  r.p = sum / static_cast<double>(count);
  r.modulus_spread = hi - lo;
  return r;
}

/// Returns p when the tuple overlaps share one complex value within `tol`.
inline double require_constant_overlap(const KbarSpec& spec, std::span<const EigenSystem> laplacians,
                                       const QuantumState& psi_h, double tol = kGroupingTolerance) {
  const auto r = tuple_overlaps(spec, laplacians, psi_h);
  require(r.complex_spread <= tol, ErrorKind::ConstantOverlapViolated,
          "tuple overlaps differ by " + std::to_string(r.complex_spread) +
              " (|overlap|² spread " + std::to_string(r.modulus_spread) + ")");
  return r.p;
}

}  // namespace hqw
