#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "hqw/graph.hpp"
#include "hqw/hierarchy.hpp"
#include "hqw/quantum_walk.hpp"

namespace hqw::test {

inline const std::string kDataDir = HQW_DATA_DIR;

// ---------------------------------------------------------------------------
// Reference models.

inline GraphModel p2() { return uniform_walk_transition(path_graph(2)); }
inline GraphModel c3() { return uniform_walk_transition(cycle_graph(3)); }
inline GraphModel loop1() { return uniform_walk_transition(self_loop_vertex()); }

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

struct Reference {
  std::string name;
  GraphModel global;
  std::vector<GraphModel> locals;
  std::optional<Vector> q;
};

inline std::vector<Reference> reference_models() {
  return {
      {"d0_selfloop_p2", loop1(), {p2()}, std::nullopt},
      {"kbar2_p2_p2", complete_with_loops(vec({0.5, 0.5})), {p2(), p2()}, vec({0.5, 0.5})},
      {"kbar2_p2_c3", complete_with_loops(vec({0.3, 0.7})), {p2(), c3()}, vec({0.3, 0.7})},
  };
}

inline HierarchicalModel build(const Reference& r,
                               SelectionConvention c = SelectionConvention::Destination) {
  ModelOptions o;
  o.convention = c;
  return HierarchicalModel(r.global, r.locals, o);
}

/// 𝓗_H = I − 𝓛_H and 𝓗_Gj = 𝓛_Gj.
inline HamiltonianAssembly laplacian_assembly(const HierarchicalModel& m) {
  const auto g = static_cast<Eigen::Index>(m.global_size());
  const CMatrix gh = (Matrix::Identity(g, g) - m.global().laplacian.matrix).cast<Complex>();
  return assemble_hamiltonian(gh, {m.local_spectra().begin(), m.local_spectra().end()});
}

inline std::vector<CMatrix> local_laplacians(const HierarchicalModel& m) {
  std::vector<CMatrix> out;
  for (const auto& w : m.locals()) out.push_back(w.laplacian.matrix.cast<Complex>());
  return out;
}

// ---------------------------------------------------------------------------
// Seeded generators for property tests.

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double gauss() { return std::normal_distribution<double>()(rng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  CVector unit(std::size_t n) {
    CVector v(n);
    for (std::size_t i = 0; i < n; ++i) v(i) = Complex(gauss(), gauss());
    return v / v.norm();
  }

  Vector real_unit(std::size_t n) {
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i) v(i) = gauss();
    return v / v.norm();
  }

  CMatrix hermitian(std::size_t n) {
    CMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a(i, j) = Complex(gauss(), gauss());
    return 0.5 * (a + a.adjoint());
  }

  Vector probability(std::size_t n) {
    Vector q(n);
    for (std::size_t i = 0; i < n; ++i) q(i) = uniform(0.2, 1.0);
    return q / q.sum();
  }

  /// Reversible chain from symmetric positive edge weights on a connected graph
  /// (a path plus random extra edges and loops): P = W / rowsum(W).
  GraphModel reversible(std::size_t n) {
    Matrix w = Matrix::Zero(n, n);
    std::vector<Edge> edges;
    auto add = [&](std::size_t a, std::size_t b) {
      if (w(a, b) > 0.0) return;
      w(a, b) = w(b, a) = uniform(0.2, 2.0);
      edges.push_back({a, b});
    };
    if (n == 1) add(0, 0);
    for (std::size_t j = 0; j + 1 < n; ++j) add(j, j + 1);
    for (std::size_t e = 0; e < n; ++e) add(index(n), index(n));
    Matrix p = w;
    for (std::size_t j = 0; j < n; ++j) p.row(j) /= w.row(j).sum();
    return GraphModel(n, edges, p);
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline std::vector<QuantumState> states(const std::vector<CVector>& vs) {
  std::vector<QuantumState> out;
  for (const auto& v : vs) out.emplace_back(v, 1e-10);
  return out;
}

inline std::vector<CVector> random_locals(Gen& gen, const HierarchicalModel& m) {
  std::vector<CVector> out;
  for (const auto& w : m.locals()) out.push_back(gen.unit(w.size()));
  return out;
}

}  // namespace hqw::test
