#include <gtest/gtest.h>

#include "support.hpp"

namespace hqw {
namespace {

using test::vec;

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no hqw::Error thrown";
  return ErrorKind::InvalidInput;
}

TEST(UniformWalk, PathOfTwo) {
  const auto g = uniform_walk_transition(path_graph(2));
  Matrix expected(2, 2);
  expected << 0, 1, 1, 0;
  EXPECT_EQ(*g.transition(), expected);
}

TEST(UniformWalk, SelfLoopVertex) {
  EXPECT_EQ(*uniform_walk_transition(self_loop_vertex()).transition(), Matrix::Ones(1, 1));
}

TEST(UniformWalk, Triangle) {
  const Matrix p = *uniform_walk_transition(cycle_graph(3)).transition();
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(p(j, k), j == k ? 0.0 : 0.5);
}

TEST(UniformWalk, IsolatedVertexRejected) {
  EXPECT_EQ(kind_of([] { uniform_walk_transition(GraphModel(2, {{0, 0}})); }),
            ErrorKind::IsolatedVertex);
}

TEST(GraphModel, RejectsBadInput) {
  EXPECT_EQ(kind_of([] { GraphModel(0, {}); }), ErrorKind::InvalidGraph);
  EXPECT_EQ(kind_of([] { GraphModel(2, {{0, 2}}); }), ErrorKind::InvalidGraph);
  Matrix not_stochastic(2, 2);
  not_stochastic << 0, 1.01, 1, 0;
  try {
    GraphModel(2, {{0, 1}}, not_stochastic);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotRowStochastic);
    EXPECT_NE(std::string(e.what()).find("row-stochastic"), std::string::npos);
  }
  Matrix off_support(2, 2);
  off_support << 0.5, 0.5, 1, 0;
  EXPECT_EQ(kind_of([&] { GraphModel(2, {{0, 1}}, off_support); }), ErrorKind::InvalidGraph);
  EXPECT_EQ(kind_of([] { GraphModel(2, {{0, 1}}, std::nullopt, vec({1.0, 0.0})); }),
            ErrorKind::InvalidMeasure);
  EXPECT_EQ(kind_of([] { GraphModel(2, {{0, 1}}, std::nullopt, vec({0.6, 0.6})); }),
            ErrorKind::InvalidMeasure);
}

TEST(GraphModel, SelfLoopCountsOnce) {
  const GraphModel g(2, {{0, 0}, {0, 1}});
  EXPECT_EQ(g.degree(0), 2u);
  EXPECT_EQ(g.degree(1), 1u);
}

TEST(StationaryMeasure, Examples) {
  EXPECT_TRUE(stationary_measure(test::p2()).isApprox(vec({0.5, 0.5}), 1e-12));
  EXPECT_TRUE(stationary_measure(test::c3()).isApprox(vec({1.0 / 3, 1.0 / 3, 1.0 / 3}), 1e-12));
}

/// Independent route: iterate the lazy chain (I+P)/2 until it settles.
Vector power_iteration(const Matrix& p) {
  const auto n = p.rows();
  Vector pi = Vector::Constant(n, 1.0 / static_cast<double>(n));
  const Matrix lazy = 0.5 * (Matrix::Identity(n, n) + p);
  for (int i = 0; i < 20000; ++i) pi = (pi.transpose() * lazy).transpose();
  return pi / pi.sum();
}

TEST(StationaryMeasure, StarMatchesPowerIteration) {
  const auto star = uniform_walk_transition(GraphModel(3, {{0, 1}, {0, 2}}));
  const Vector reference = power_iteration(*star.transition());
  const Vector pi = stationary_measure(star);
  EXPECT_LE((pi - reference).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(pi(0), 0.5, 1e-12);
  EXPECT_NEAR(pi(1), 0.25, 1e-12);
}

TEST(StationaryMeasure, Errors) {
  const auto split = uniform_walk_transition(GraphModel(4, {{0, 1}, {2, 3}}));
  EXPECT_EQ(kind_of([&] { stationary_measure(split); }), ErrorKind::NotIrreducible);
  EXPECT_EQ(kind_of([] { stationary_measure(path_graph(2)); }), ErrorKind::MissingTransition);
}

TEST(StationaryMeasure, SuppliedMeasureWinsAndIsValidated) {
  const auto g = test::p2();
  EXPECT_EQ(resolve_measure(g.with_measure(vec({0.5, 0.5}))), vec({0.5, 0.5}));
  EXPECT_EQ(kind_of([&] { resolve_measure(g.with_measure(vec({0.4, 0.6}))); }),
            ErrorKind::InvalidMeasure);
}

TEST(DetailedBalance, Examples) {
  const auto ok = verify_detailed_balance(*test::p2().transition(), vec({0.5, 0.5}));
  EXPECT_TRUE(ok.ok);
  EXPECT_EQ(ok.max_defect, 0.0);

  const Vector q = vec({0.3, 0.7});
  EXPECT_TRUE(verify_detailed_balance(*complete_with_loops(q).transition(), q).ok);

  Matrix biased(3, 3);
  biased << 0, 2.0 / 3, 1.0 / 3, 1.0 / 3, 0, 2.0 / 3, 2.0 / 3, 1.0 / 3, 0;
  const Vector uniform = Vector::Constant(3, 1.0 / 3);
  const auto bad = verify_detailed_balance(biased, uniform);
  EXPECT_FALSE(bad.ok);
  EXPECT_NEAR(bad.max_defect, 1.0 / 9, 1e-15);

  EXPECT_EQ(kind_of([&] { verify_detailed_balance(biased, vec({0.5, 0.5})); }),
            ErrorKind::DimensionMismatch);
}

TEST(NormalizedLaplacian, Examples) {
  Matrix p2_lap(2, 2);
  p2_lap << 1, -1, -1, 1;
  EXPECT_LE(max_abs(Matrix(normalized_laplacian(*test::p2().transition(), vec({0.5, 0.5})).matrix -
                           p2_lap)),
            1e-15);
  EXPECT_EQ(normalized_laplacian(Matrix::Ones(1, 1), vec({1.0})).matrix, Matrix::Zero(1, 1));
  const Matrix c3 = normalized_laplacian(*test::c3().transition(), Vector::Constant(3, 1.0 / 3)).matrix;
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(c3(j, k), j == k ? 1.0 : -0.5, 1e-15);
}

TEST(NormalizedLaplacian, NonReversibleRejected) {
  Matrix biased(3, 3);
  biased << 0, 2.0 / 3, 1.0 / 3, 1.0 / 3, 0, 2.0 / 3, 2.0 / 3, 1.0 / 3, 0;
  EXPECT_EQ(kind_of([&] { normalized_laplacian(biased, Vector::Constant(3, 1.0 / 3)); }),
            ErrorKind::NotReversible);
}

TEST(KbarGraph, TransitionAndMeasure) {
  const auto g = complete_with_loops(vec({0.3, 0.7}));
  EXPECT_EQ(g.transition()->row(1), vec({0.3, 0.7}).transpose());
  EXPECT_EQ(*g.measure(), vec({0.3, 0.7}));
  EXPECT_EQ(kind_of([] { complete_with_loops(vec({1.0, 0.0})); }),
            ErrorKind::InvalidProbabilityVector);
}

// Property: random reversible chains.
TEST(NormalizedLaplacianProperty, SymmetricPsdAndRoundTrip) {
  test::Gen gen(101);
  for (int trial = 0; trial < 60; ++trial) {
    const auto g = gen.reversible(1 + gen.index(7));
    const Vector pi = stationary_measure(g);
    const Matrix& p = *g.transition();
    ASSERT_TRUE(verify_detailed_balance(p, pi).ok);
    const auto lap = normalized_laplacian(p, pi);
    EXPECT_LE(lap.symmetry_defect, 1e-10);
    const Vector spectrum = Eigen::SelfAdjointEigenSolver<Matrix>(lap.matrix).eigenvalues();
    EXPECT_GE(spectrum.minCoeff(), -1e-10);
    EXPECT_LE(spectrum.maxCoeff(), 2.0 + 1e-10);
    const Vector root = pi.cwiseSqrt();
    const Matrix back = root.cwiseInverse().asDiagonal() * lap.matrix * root.asDiagonal();
    const auto n = p.rows();
    EXPECT_LE(max_abs(Matrix(back - (Matrix::Identity(n, n) - p))), 1e-10);
  }
}

}  // namespace
}  // namespace hqw
