#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include "hqw/common.hpp"
#include "hqw/graph.hpp"
#include "hqw/spectral.hpp"
#include "hqw/tensor.hpp"

namespace hqw {

/// Which local graph a transition steps. Destination follows the operator
/// Σ_j P_H|j⟩⟨j| ⊗ lift(P_Gj) literally (the global walker's new vertex picks
/// the local graph); Source uses Σ_j |j⟩⟨j|P_H ⊗ lift(P_Gj).
enum class SelectionConvention { Destination, Source };

struct ModelOptions {
  std::size_t dense_cap = kDefaultDenseCap;
  double tolerance = kGroupingTolerance;
  SelectionConvention convention = SelectionConvention::Destination;
};

/// Per-graph random-walk data: transition, reversible measure, normalized
/// Laplacian and its spectrum.
struct WalkData {
  GraphModel graph;
  Vector measure;
  SymmetricOperator laplacian;
  EigenSystem laplacian_spectrum;
  TransitionSpectrum transition_spectrum;

  const Matrix& transition() const { return *graph.transition(); }
  std::size_t size() const { return graph.vertex_count(); }
};

inline WalkData analyse_walk(const GraphModel& g, double tol = kGroupingTolerance) {
  require(g.transition().has_value(), ErrorKind::MissingTransition, "graph has no transition");
  WalkData w{g, resolve_measure(g), {}, {}, {}};
  const auto balance = verify_detailed_balance(w.transition(), w.measure);
  require(balance.ok, ErrorKind::NotReversible,
          "detailed balance defect " + std::to_string(balance.max_defect));
  w.laplacian = normalized_laplacian(w.transition(), w.measure);
  w.laplacian_spectrum = eigh(w.laplacian.matrix, tol);
  w.transition_spectrum = transition_spectrum(w.laplacian_spectrum, w.measure);
  return w;
}

/// G = (H; G_0, …, G_d). Flat index of (y, k_0..k_d) is
/// y·Π n_j + Σ k_j·stride_j: global register slowest, local register d fastest.
class HierarchicalModel {
 public:
  HierarchicalModel(const GraphModel& global, const std::vector<GraphModel>& locals,
                    ModelOptions options = {})
      : options_(options), global_(analyse_walk(global, options.tolerance)) {
    require(locals.size() == global.vertex_count(), ErrorKind::DimensionMismatch,
            "H has " + std::to_string(global.vertex_count()) + " vertices but " +
                std::to_string(locals.size()) + " local graphs were given");
    std::vector<std::size_t> dims;
    for (const auto& g : locals) {
      locals_.push_back(analyse_walk(g, options.tolerance));
      spectra_.push_back(locals_.back().laplacian_spectrum);
      dims.push_back(g.vertex_count());
    }
    shape_ = TensorShape(std::move(dims));
  }

  std::size_t depth() const noexcept { return locals_.size() - 1; }
  std::size_t global_size() const noexcept { return locals_.size(); }
  const WalkData& global() const noexcept { return global_; }
  const WalkData& local(std::size_t j) const { return locals_.at(j); }
  const std::vector<WalkData>& locals() const noexcept { return locals_; }
  /// Laplacian spectra of the local graphs, in register order.
  std::span<const EigenSystem> local_spectra() const noexcept { return spectra_; }
  const TensorShape& local_shape() const noexcept { return shape_; }
  std::size_t local_size() const noexcept { return shape_.size(); }
  std::size_t total_dimension() const noexcept { return global_size() * local_size(); }
  const ModelOptions& options() const noexcept { return options_; }

  std::size_t flat_index(std::size_t y, std::span<const std::size_t> k) const {
    require(y < global_size(), ErrorKind::DimensionMismatch, "global index out of range");
    return y * local_size() + shape_.flatten(k);
  }

  void require_dense(const char* what) const {
    require(total_dimension() <= options_.dense_cap, ErrorKind::DimensionCapExceeded,
            std::string(what) + ": dimension " + std::to_string(total_dimension()) +
                " exceeds cap " + std::to_string(options_.dense_cap));
  }

 private:
  ModelOptions options_;
  WalkData global_;
  std::vector<WalkData> locals_;
  std::vector<EigenSystem> spectra_;
  TensorShape shape_;
};

/// I ⊗ … ⊗ A ⊗ … ⊗ I with A on local register j.
inline Matrix lift_local(const Matrix& a, const HierarchicalModel& model, std::size_t j) {
  const auto& shape = model.local_shape();
  require(j < shape.rank(), ErrorKind::DimensionMismatch, "register index");
  require(a.rows() == static_cast<Eigen::Index>(shape.dim(j)) && a.cols() == a.rows(),
          ErrorKind::DimensionMismatch, "operator does not match graph " + std::to_string(j));
  require(model.local_size() <= model.options().dense_cap, ErrorKind::DimensionCapExceeded,
          "lift_local");
  Matrix out = Matrix::Identity(1, 1);
  for (std::size_t i = 0; i < shape.rank(); ++i) {
    const auto n = static_cast<Eigen::Index>(shape.dim(i));
    out = kron(out, i == j ? a : Matrix(Matrix::Identity(n, n)));
  }
  return out;
}

/// Dense Σ_j (P_H|j⟩⟨j| or |j⟩⟨j|P_H) ⊗ lift(A_j) for per-graph local operators A_j.
inline Matrix assemble_hierarchical(const HierarchicalModel& model, std::span<const Matrix> ops,
                                    SelectionConvention convention) {
  require(ops.size() == model.global_size(), ErrorKind::DimensionMismatch, "one operator per G_j");
  model.require_dense("dense hierarchical operator");
  const auto n = static_cast<Eigen::Index>(model.local_size());
  const Matrix& ph = model.global().transition();
  std::vector<Matrix> lifted;
  for (std::size_t j = 0; j < ops.size(); ++j) lifted.push_back(lift_local(ops[j], model, j));
  Matrix out = Matrix::Zero(model.total_dimension(), model.total_dimension());
  for (Eigen::Index y = 0; y < ph.rows(); ++y)
    for (Eigen::Index z = 0; z < ph.cols(); ++z) {
      if (ph(y, z) == 0.0) continue;
      const auto& pick = convention == SelectionConvention::Destination ? lifted[z] : lifted[y];
      out.block(y * n, z * n, n, n) = ph(y, z) * pick;
    }
  return out;
}

/// Matrix-free action of the same operator on a column vector.
template <typename VectorT>
VectorT apply_hierarchical(const HierarchicalModel& model, std::span<const Matrix> ops,
                           SelectionConvention convention, const VectorT& x) {
  require(ops.size() == model.global_size(), ErrorKind::DimensionMismatch, "one operator per G_j");
  require(static_cast<std::size_t>(x.size()) == model.total_dimension(),
          ErrorKind::DimensionMismatch, "vector size");
  const auto n = static_cast<Eigen::Index>(model.local_size());
  const auto blocks = static_cast<Eigen::Index>(model.global_size());
  const Matrix& ph = model.global().transition();
  VectorT out = VectorT::Zero(x.size());
  if (convention == SelectionConvention::Destination) {
    for (Eigen::Index z = 0; z < blocks; ++z) {
      VectorT piece = x.segment(z * n, n);
      apply_on_register(ops[z], piece, model.local_shape(), static_cast<std::size_t>(z));
      for (Eigen::Index y = 0; y < blocks; ++y) out.segment(y * n, n) += ph(y, z) * piece;
    }
  } else {
    for (Eigen::Index y = 0; y < blocks; ++y) {
      VectorT mixed = VectorT::Zero(n);
      for (Eigen::Index z = 0; z < blocks; ++z) mixed += ph(y, z) * x.segment(z * n, n);
      apply_on_register(ops[y], mixed, model.local_shape(), static_cast<std::size_t>(y));
      out.segment(y * n, n) = mixed;
    }
  }
  return out;
}

inline std::vector<Matrix> local_transitions(const HierarchicalModel& model) {
  std::vector<Matrix> ops;
  for (const auto& w : model.locals()) ops.push_back(w.transition());
  return ops;
}

/// Transition matrix P_G of the hierarchical discrete-time walk.
inline Matrix build_hdtrw(const HierarchicalModel& model) {
  const auto ops = local_transitions(model);
  return assemble_hierarchical(model, ops, model.options().convention);
}

template <typename VectorT>
VectorT apply_hdtrw(const HierarchicalModel& model, const VectorT& x) {
  const auto ops = local_transitions(model);
  return apply_hierarchical(model, std::span<const Matrix>(ops), model.options().convention, x);
}

/// Eigenpair of P_G in factored form: block eigenvector ⊗ D^{-1/2} local eigenvectors.
struct HdtrwEigenpair {
  std::vector<std::size_t> labels;
  Complex value;
  CVector global_vector;

  CVector vector(const HierarchicalModel& model) const {
    std::vector<CVector> factors{global_vector};
    for (std::size_t j = 0; j < labels.size(); ++j)
      factors.push_back(model.local(j).transition_spectrum.right.col(labels[j]));
    return tensor_product(factors);
  }
};

struct HdtrwSpectrum {
  std::vector<HdtrwEigenpair> pairs;
  std::vector<std::vector<std::size_t>> defective;  // tuples whose block is not diagonalizable
};

/// Λ^(tuple) = diag of P-eigenvalues for the tuple.
inline Vector transition_values(const HierarchicalModel& model, const EigenTuple& tuple) {
  Vector lambda(model.global_size());
  for (std::size_t j = 0; j < model.global_size(); ++j)
    lambda(j) = model.local(j).transition_spectrum.values(tuple.label(j));
  return lambda;
}

/// Relative conditioning below which a block's eigenvector matrix is treated as singular.
inline constexpr double kDefectiveConditioning = 1e-6;

/// Eigenpairs of P_G assembled tuple by tuple from the eigenpairs of P_H Λ^(tuple).
inline HdtrwSpectrum hdtrw_eigenpairs(const HierarchicalModel& model) {
  HdtrwSpectrum out;
  const Matrix& ph = model.global().transition();
  for (const auto& tuple : tuple_iterator(model.local_spectra())) {
    const Vector lambda = transition_values(model, tuple);
    const Matrix block = model.options().convention == SelectionConvention::Destination
                             ? Matrix(ph * lambda.asDiagonal())
                             : Matrix(lambda.asDiagonal() * ph);
    Eigen::ComplexEigenSolver<CMatrix> solver(block.cast<Complex>());
    if (solver.info() != Eigen::Success) {
      out.defective.push_back(tuple.labels());
      continue;
    }
    CMatrix vecs = solver.eigenvectors();
    for (Eigen::Index c = 0; c < vecs.cols(); ++c) vecs.col(c).normalize();
    const Eigen::JacobiSVD<CMatrix> svd(vecs);
    const auto& s = svd.singularValues();
    const double residual =
        max_abs(CMatrix(block.cast<Complex>() * vecs - vecs * solver.eigenvalues().asDiagonal()));
    if (s(s.size() - 1) < kDefectiveConditioning * s(0) || residual > 1e-10) {
      out.defective.push_back(tuple.labels());
      continue;
    }
    for (Eigen::Index l = 0; l < vecs.cols(); ++l)
      out.pairs.push_back({tuple.labels(), solver.eigenvalues()(l), vecs.col(l)});
  }
  return out;
}

inline void require_times(const HierarchicalModel& model, const Vector& t) {
  require(t.size() == static_cast<Eigen::Index>(model.global_size()), ErrorKind::DimensionMismatch,
          "need one time per local graph");
  for (Eigen::Index j = 0; j < t.size(); ++j)
    require(std::isfinite(t(j)) && t(j) >= 0.0, ErrorKind::NegativeTime,
            "t_" + std::to_string(j) + " must be >= 0");
}

/// Heat semigroups exp{−t_j(I − P_Gj)}.
inline std::vector<Matrix> local_semigroups(const HierarchicalModel& model, const Vector& t) {
  require_times(model, t);
  std::vector<Matrix> ops;
  for (std::size_t j = 0; j < model.global_size(); ++j) {
    const Matrix& p = model.local(j).transition();
    const Matrix generator = -t(j) * (Matrix::Identity(p.rows(), p.cols()) - p);
    ops.push_back(generator.exp());
  }
  return ops;
}

/// Transition matrix P_G(t_0..t_d) of the hierarchical continuous-time walk.
inline Matrix build_hctrw(const HierarchicalModel& model, const Vector& t) {
  const auto ops = local_semigroups(model, t);
  return assemble_hierarchical(model, ops, model.options().convention);
}

template <typename VectorT>
VectorT apply_hctrw(const HierarchicalModel& model, const Vector& t, const VectorT& x) {
  const auto ops = local_semigroups(model, t);
  return apply_hierarchical(model, std::span<const Matrix>(ops), model.options().convention, x);
}

/// Diagonal of Λ^(tuple)_(t): exp{−t_j(1 − λ_j)}.
inline Vector hctrw_lambda(const Vector& lambda, const Vector& t) {
  require(lambda.size() == t.size(), ErrorKind::DimensionMismatch, "λ tuple and t lengths");
  return (-(t.array() * (1.0 - lambda.array()))).exp().matrix();
}

/// Symmetric core Λ^{1/2}(I − 𝓛_H)Λ^{1/2}.
inline Matrix hctrw_core(const HierarchicalModel& model, const Vector& lambda_t) {
  require(lambda_t.size() == static_cast<Eigen::Index>(model.global_size()),
          ErrorKind::DimensionMismatch, "Λ size");
  for (Eigen::Index j = 0; j < lambda_t.size(); ++j)
    require(lambda_t(j) > 0.0, ErrorKind::NonpositiveDiagonal,
            "Λ entry " + std::to_string(j) + " is not positive");
  const Matrix& lap = model.global().laplacian.matrix;
  const Vector root = lambda_t.cwiseSqrt();
  Matrix core = root.asDiagonal() * (Matrix::Identity(lap.rows(), lap.cols()) - lap) *
                root.asDiagonal();
  return 0.5 * (core + core.transpose());
}

struct DeformedBlock {
  std::vector<std::size_t> labels;
  Vector lambda_t;
  EigenSystem core;
  CMatrix right;  // columns: global parts of the right eigenvectors
  CMatrix left;   // rows: global parts of the left eigenvectors
};

/// Biorthogonal eigensystem of P_G(t) in tuple-factored form.
struct DeformedSpectrum {
  std::vector<DeformedBlock> blocks;

  double biorthogonality_defect() const {
    double worst = 0.0;
    for (const auto& b : blocks) {
      const auto n = b.right.cols();
      worst = std::max(worst, max_abs(CMatrix(b.left * b.right - CMatrix::Identity(n, n))));
    }
    return worst;
  }

  /// Σ_tuple Σ_ℓ λ · ṽ w̃ as a dense matrix.
  Matrix reconstruct(const HierarchicalModel& model) const {
    model.require_dense("deformed spectrum reconstruction");
    const auto dim = static_cast<Eigen::Index>(model.total_dimension());
    CMatrix out = CMatrix::Zero(dim, dim);
    for (const auto& b : blocks) {
      const CMatrix global = b.right * b.core.values.cast<Complex>().asDiagonal() * b.left;
      CMatrix local = CMatrix::Identity(1, 1);
      for (std::size_t j = 0; j < b.labels.size(); ++j) {
        const auto& ts = model.local(j).transition_spectrum;
        local = kron(local, CMatrix(ts.right.col(b.labels[j]) * ts.left.row(b.labels[j])));
      }
      out += kron(global, local);
    }
    return out.real();
  }
};

inline DeformedSpectrum hctrw_spectral(const HierarchicalModel& model, const Vector& t) {
  require_times(model, t);
  const Vector root_pi = model.global().measure.cwiseSqrt();
  DeformedSpectrum out;
  for (const auto& tuple : tuple_iterator(model.local_spectra())) {
    DeformedBlock block;
    block.labels = tuple.labels();
    block.lambda_t = hctrw_lambda(transition_values(model, tuple), t);
    block.core = eigh(hctrw_core(model, block.lambda_t), model.options().tolerance);
    const Vector root_l = block.lambda_t.cwiseSqrt();
    if (model.options().convention == SelectionConvention::Destination) {
      const Vector r = (root_l.cwiseInverse().array() / root_pi.array()).matrix();
      const Vector l = (root_pi.array() * root_l.array()).matrix();
      block.right = r.cast<Complex>().asDiagonal() * block.core.vectors;
      block.left = block.core.vectors.adjoint() * l.cast<Complex>().asDiagonal();
    } else {
      const Vector r = (root_l.array() / root_pi.array()).matrix();
      const Vector l = (root_pi.array() / root_l.array()).matrix();
      block.right = r.cast<Complex>().asDiagonal() * block.core.vectors;
      block.left = block.core.vectors.adjoint() * l.cast<Complex>().asDiagonal();
    }
    out.blocks.push_back(std::move(block));
  }
  return out;
}

}  // namespace hqw
