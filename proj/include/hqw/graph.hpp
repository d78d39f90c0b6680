#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "hqw/common.hpp"

namespace hqw {

struct Edge {
  std::size_t a = 0;
  std::size_t b = 0;
};

/// Finite undirected graph (self-loops allowed) with an optional random-walk
/// transition matrix and reversible measure. Immutable once built.
class GraphModel {
 public:
  GraphModel(std::size_t vertex_count, std::vector<Edge> edges,
             std::optional<Matrix> transition = std::nullopt,
             std::optional<Vector> measure = std::nullopt)
      : n_(vertex_count), edges_(std::move(edges)) {
    require(n_ > 0, ErrorKind::InvalidGraph, "vertex_count must be positive");
    adjacency_.assign(n_ * n_, false);
    for (const auto& e : edges_) {
      require(e.a < n_ && e.b < n_, ErrorKind::InvalidGraph,
              "edge (" + std::to_string(e.a) + "," + std::to_string(e.b) + ") out of range");
      adjacency_[e.a * n_ + e.b] = true;
      adjacency_[e.b * n_ + e.a] = true;
    }
    if (transition) set_transition(std::move(*transition));
    if (measure) set_measure(std::move(*measure));
  }

  std::size_t vertex_count() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  bool has_edge(std::size_t j, std::size_t k) const { return adjacency_.at(j * n_ + k); }

  /// Number of distinct neighbours; a self-loop counts once.
  std::size_t degree(std::size_t j) const {
    std::size_t d = 0;
    for (std::size_t k = 0; k < n_; ++k) d += has_edge(j, k) ? 1 : 0;
    return d;
  }

  const std::optional<Matrix>& transition() const noexcept { return transition_; }
  const std::optional<Vector>& measure() const noexcept { return measure_; }

  GraphModel with_transition(Matrix p) const {
    GraphModel g = *this;
    g.set_transition(std::move(p));
    return g;
  }

  GraphModel with_measure(Vector pi) const {
    GraphModel g = *this;
    g.set_measure(std::move(pi));
    return g;
  }

 private:
  void set_transition(Matrix p) {
    const auto n = static_cast<Eigen::Index>(n_);
    require(p.rows() == n && p.cols() == n, ErrorKind::DimensionMismatch,
            "transition must be " + std::to_string(n_) + "x" + std::to_string(n_));
    for (Eigen::Index j = 0; j < n; ++j) {
      double row = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        require(std::isfinite(p(j, k)) && p(j, k) >= 0.0, ErrorKind::NotRowStochastic,
                "row-stochastic: negative or non-finite entry at (" + std::to_string(j) + "," +
                    std::to_string(k) + ")");
        require(p(j, k) == 0.0 || has_edge(j, k), ErrorKind::InvalidGraph,
                "transition has support outside E(G) at (" + std::to_string(j) + "," +
                    std::to_string(k) + ")");
        row += p(j, k);
      }
      require(std::abs(row - 1.0) <= kStochasticTolerance, ErrorKind::NotRowStochastic,
              "row-stochastic: row " + std::to_string(j) + " sums to " + std::to_string(row));
    }
    transition_ = std::move(p);
  }

  void set_measure(Vector pi) {
    require(pi.size() == static_cast<Eigen::Index>(n_), ErrorKind::DimensionMismatch,
            "measure length");
    for (Eigen::Index j = 0; j < pi.size(); ++j)
      require(std::isfinite(pi(j)) && pi(j) > 0.0, ErrorKind::InvalidMeasure,
              "measure must be strictly positive");
    require(std::abs(pi.sum() - 1.0) <= kStochasticTolerance, ErrorKind::InvalidMeasure,
            "measure must sum to 1");
    measure_ = std::move(pi);
  }

  std::size_t n_;
  std::vector<Edge> edges_;
  std::vector<bool> adjacency_;
  std::optional<Matrix> transition_;
  std::optional<Vector> measure_;
};

/// Real symmetric operator with the asymmetry measured at construction.
struct SymmetricOperator {
  Matrix matrix;
  double symmetry_defect = 0.0;
};

struct BalanceReport {
  bool ok = false;
  double max_defect = 0.0;
};

/// Simple random walk: P[j][k] = 1/deg(j) for every neighbour k.
inline GraphModel uniform_walk_transition(const GraphModel& g) {
  const std::size_t n = g.vertex_count();
  Matrix p = Matrix::Zero(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t deg = g.degree(j);
    require(deg > 0, ErrorKind::IsolatedVertex, "vertex " + std::to_string(j) + " has degree 0");
    for (std::size_t k = 0; k < n; ++k)
      if (g.has_edge(j, k)) p(j, k) = 1.0 / static_cast<double>(deg);
  }
  return g.with_transition(std::move(p));
}

namespace detail {

inline std::vector<std::size_t> reachable(const Matrix& p, std::size_t from, bool transpose) {
  const auto n = static_cast<std::size_t>(p.rows());
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> order;
  std::queue<std::size_t> todo;
  todo.push(from);
  seen[from] = true;
  while (!todo.empty()) {
    const auto v = todo.front();
    todo.pop();
    order.push_back(v);
    for (std::size_t w = 0; w < n; ++w) {
      const double weight = transpose ? p(w, v) : p(v, w);
      if (weight > 0.0 && !seen[w]) {
        seen[w] = true;
        todo.push(w);
      }
    }
  }
  return order;
}

}  // namespace detail

/// Solves πP = π, Σπ = 1 for an irreducible chain.
inline Vector stationary_measure(const GraphModel& g) {
  require(g.transition().has_value(), ErrorKind::MissingTransition, "stationary_measure needs P");
  const Matrix& p = *g.transition();
  const auto n = p.rows();
  if (detail::reachable(p, 0, false).size() != static_cast<std::size_t>(n) ||
      detail::reachable(p, 0, true).size() != static_cast<std::size_t>(n))
    throw Error(ErrorKind::NotIrreducible, "transition support is not strongly connected");

  Matrix a = p.transpose() - Matrix::Identity(n, n);
  a.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  Vector pi = a.fullPivLu().solve(rhs);
  for (Eigen::Index j = 0; j < n; ++j)
    require(pi(j) > 0.0, ErrorKind::NoPositiveFixedVector,
            "fixed vector has non-positive component " + std::to_string(j));
  return pi / pi.sum();
}

/// The supplied measure if present (validated as stationary), else the computed one.
inline Vector resolve_measure(const GraphModel& g) {
  if (!g.measure()) return stationary_measure(g);
  const Vector& pi = *g.measure();
  if (g.transition()) {
    const double drift = (pi.transpose() * *g.transition() - pi.transpose()).cwiseAbs().maxCoeff();
    require(drift <= kBalanceTolerance, ErrorKind::InvalidMeasure,
            "supplied measure is not stationary (defect " + std::to_string(drift) + ")");
  }
  return pi;
}

inline BalanceReport verify_detailed_balance(const Matrix& p, const Vector& pi) {
  require(p.rows() == p.cols() && p.rows() == pi.size(), ErrorKind::DimensionMismatch,
          "transition/measure dimensions");
  BalanceReport report;
  for (Eigen::Index j = 0; j < p.rows(); ++j)
    for (Eigen::Index k = j + 1; k < p.cols(); ++k)
      report.max_defect = std::max(report.max_defect, std::abs(pi(j) * p(j, k) - pi(k) * p(k, j)));
  report.ok = report.max_defect <= kBalanceTolerance;
  return report;
}

/// 𝓛 = I − D^{1/2} P D^{−1/2} with D = diag(π).
inline SymmetricOperator normalized_laplacian(const Matrix& p, const Vector& pi) {
  require(p.rows() == p.cols() && p.rows() == pi.size(), ErrorKind::DimensionMismatch,
          "transition/measure dimensions");
  const Vector root = pi.cwiseSqrt();
  const Vector inv_root = root.cwiseInverse();
  SymmetricOperator out;
  out.matrix = Matrix::Identity(p.rows(), p.cols()) - root.asDiagonal() * p * inv_root.asDiagonal();
  out.symmetry_defect = max_abs(Matrix(out.matrix - out.matrix.transpose()));
  require(out.symmetry_defect <= kBalanceTolerance, ErrorKind::NotReversible,
          "normalized Laplacian asymmetric by " + std::to_string(out.symmetry_defect));
  // Symmetrize away the rounding so downstream eigensolvers see an exact symmetric matrix.
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
  return out;
}

// Common graphs used by tests, the CLI and the reference models.

inline GraphModel path_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t j = 0; j + 1 < n; ++j) edges.push_back({j, j + 1});
  return GraphModel(n, std::move(edges));
}

inline GraphModel cycle_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t j = 0; j < n; ++j) edges.push_back({j, (j + 1) % n});
  return GraphModel(n, std::move(edges));
}

inline GraphModel self_loop_vertex() { return GraphModel(1, {{0, 0}}); }

/// Complete graph with self-loops on q.size() vertices, P[j][k] = q_k, π = q.
inline GraphModel complete_with_loops(const Vector& q) {
  const auto n = static_cast<std::size_t>(q.size());
  for (Eigen::Index j = 0; j < q.size(); ++j)
    require(q(j) > 0.0 && q(j) < 1.0, ErrorKind::InvalidProbabilityVector,
            "q entries must lie in (0,1)");
  require(std::abs(q.sum() - 1.0) <= kStochasticTolerance, ErrorKind::InvalidProbabilityVector,
          "q must sum to 1");
  std::vector<Edge> edges;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = j; k < n; ++k) edges.push_back({j, k});
  Matrix p(n, n);
  for (std::size_t j = 0; j < n; ++j) p.row(j) = q.transpose();
  return GraphModel(n, std::move(edges), std::move(p), q);
}

}  // namespace hqw
