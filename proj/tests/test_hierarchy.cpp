#include <gtest/gtest.h>

#include "hqw/oracle.hpp"
#include "support.hpp"

namespace hqw {
namespace {

using test::vec;

HierarchicalModel kbar_p2_p2(SelectionConvention c = SelectionConvention::Destination) {
  return test::build(test::reference_models()[1], c);
}

Matrix swap2() {
  Matrix a(2, 2);
  a << 0, 1, 1, 0;
  return a;
}

TEST(LiftLocal, Examples) {
  const HierarchicalModel d0(test::loop1(), {test::c3()});
  const Matrix a = *test::c3().transition();
  EXPECT_EQ(lift_local(a, d0, 0), a);

  const auto m = kbar_p2_p2();
  EXPECT_EQ(lift_local(swap2(), m, 1), kron(Matrix(Matrix::Identity(2, 2)), swap2()));
  EXPECT_EQ(lift_local(Matrix::Identity(2, 2), m, 0), Matrix(Matrix::Identity(4, 4)));
  EXPECT_THROW(lift_local(swap2(), m, 2), Error);
}

TEST(Hdtrw, DepthZeroReducesToLocalWalk) {
  const HierarchicalModel m(test::loop1(), {test::c3()});
  EXPECT_EQ(build_hdtrw(m), *test::c3().transition());
}

TEST(Hdtrw, KbarPathsIsDoublyStochasticAndMatchesLoops) {
  for (auto c : {SelectionConvention::Destination, SelectionConvention::Source}) {
    const auto m = kbar_p2_p2(c);
    const Matrix p = build_hdtrw(m);
    ASSERT_EQ(p.rows(), 8);
    EXPECT_LE((p.rowwise().sum() - Vector::Ones(8)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((p.colwise().sum() - Vector::Ones(8).transpose()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_GE(p.minCoeff(), 0.0);
    const auto ops = local_transitions(m);
    const Matrix loops = oracle::assemble_by_loops(m.global().transition(), ops,
                                                   c == SelectionConvention::Source);
    EXPECT_LE(max_abs(Matrix(p - loops)), 1e-15);
  }
}

TEST(Hdtrw, MatrixFreeActionMatchesDense) {
  const auto m = test::build(test::reference_models()[2]);
  test::Gen gen(7);
  const Vector x = gen.real_unit(m.total_dimension());
  EXPECT_LE((apply_hdtrw(m, x) - build_hdtrw(m) * x).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(HdtrwEigenpairs, DepthZeroGivesLocalPairs) {
  const HierarchicalModel m(test::loop1(), {test::p2()});
  const auto spec = hdtrw_eigenpairs(m);
  ASSERT_EQ(spec.pairs.size(), 2u);
  EXPECT_NEAR(spec.pairs[0].value.real(), 1.0, 1e-14);
  EXPECT_NEAR(spec.pairs[1].value.real(), -1.0, 1e-14);
}

TEST(HdtrwEigenpairs, KbarPathsBlocks) {
  const auto m = kbar_p2_p2();
  const auto spec = hdtrw_eigenpairs(m);
  // λ-tuple (1,1) is label tuple (0,0): block P_H with eigenvalues {0, 1}.
  std::vector<double> top;
  for (const auto& pair : spec.pairs)
    if (pair.labels == std::vector<std::size_t>{0, 0}) top.push_back(pair.value.real());
  std::sort(top.begin(), top.end());
  ASSERT_EQ(top.size(), 2u);
  EXPECT_NEAR(top[0], 0.0, 1e-14);
  EXPECT_NEAR(top[1], 1.0, 1e-14);
  // λ-tuples (1,−1) and (−1,1) give nilpotent blocks.
  EXPECT_EQ(spec.defective.size(), 2u);
  EXPECT_NE(std::find(spec.defective.begin(), spec.defective.end(),
                      std::vector<std::size_t>{0, 1}),
            spec.defective.end());
  const Matrix p = build_hdtrw(m);
  for (const auto& pair : spec.pairs) {
    const CVector w = pair.vector(m);
    EXPECT_LE((p.cast<Complex>() * w - pair.value * w).cwiseAbs().maxCoeff(),
              1e-8 * w.cwiseAbs().maxCoeff());
  }
}

TEST(Hctrw, ZeroTimeGivesGlobalWalkTimesIdentity) {
  const auto m = test::build(test::reference_models()[2]);
  const Matrix p = build_hctrw(m, vec({0.0, 0.0}));
  const Matrix expected = kron(m.global().transition(), Matrix(Matrix::Identity(6, 6)));
  EXPECT_LE(max_abs(Matrix(p - expected)), 1e-15);
}

TEST(Hctrw, DepthZeroPathAtLn2) {
  const HierarchicalModel m(test::loop1(), {test::p2()});
  const Matrix p = build_hctrw(m, vec({std::log(2.0)}));
  EXPECT_NEAR(p(0, 0), 5.0 / 8, 1e-14);
  EXPECT_NEAR(p(0, 1), 3.0 / 8, 1e-14);
  EXPECT_NEAR(p(1, 0), 3.0 / 8, 1e-14);
  EXPECT_NEAR(p(1, 1), 5.0 / 8, 1e-14);
}

TEST(Hctrw, RejectsNegativeTime) {
  const auto m = kbar_p2_p2();
  try {
    build_hctrw(m, vec({1.0, -0.1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NegativeTime);
  }
}

TEST(HctrwLambda, Examples) {
  EXPECT_EQ(hctrw_lambda(vec({1, 1}), vec({3, 4})), vec({1, 1}));
  const Vector a = hctrw_lambda(vec({1, -1}), vec({1, 1}));
  EXPECT_EQ(a(0), 1.0);
  EXPECT_NEAR(a(1), std::exp(-2.0), 1e-16);
  const Vector b = hctrw_lambda(vec({0, 0}), vec({std::log(2.0), std::log(2.0)}));
  EXPECT_NEAR(b(0), 0.5, 1e-15);
  EXPECT_NEAR(b(1), 0.5, 1e-15);
}

TEST(HctrwCore, Examples) {
  const auto m = kbar_p2_p2();
  const Matrix id_core = hctrw_core(m, vec({1, 1}));
  EXPECT_LE(max_abs(Matrix(id_core - (Matrix::Identity(2, 2) - m.global().laplacian.matrix))), 0.0);
  const double a = 0.3, b = 0.8;
  const Matrix core = hctrw_core(m, vec({a, b}));
  EXPECT_NEAR(core(0, 0), a / 2, 1e-15);
  EXPECT_NEAR(core(1, 1), b / 2, 1e-15);
  EXPECT_NEAR(core(0, 1), std::sqrt(a * b) / 2, 1e-15);
  EXPECT_NEAR(core(1, 0), std::sqrt(a * b) / 2, 1e-15);
  // Self-loop H: 𝓛_H = 0 so the core is Λ_t itself; with P2 as H, 𝓛_H has zero diagonal.
  const HierarchicalModel path_global(test::p2(), {test::loop1(), test::loop1()});
  const Matrix off = hctrw_core(path_global, vec({1, 1}));
  EXPECT_EQ(off.diagonal(), Vector::Zero(2));
  EXPECT_THROW(hctrw_core(m, vec({0.0, 1.0})), Error);
}

TEST(HctrwSpectral, Examples) {
  const auto m = kbar_p2_p2();
  const auto zero = hctrw_spectral(m, vec({0, 0}));
  for (const auto& b : zero.blocks) {
    EXPECT_NEAR(b.core.values(0), 0.0, 1e-14);
    EXPECT_NEAR(b.core.values(1), 1.0, 1e-14);
  }
  EXPECT_LE(max_abs(Matrix(zero.reconstruct(m) - build_hctrw(m, vec({0, 0})))), 1e-12);

  const HierarchicalModel d0(test::loop1(), {test::p2()});
  const auto single = hctrw_spectral(d0, vec({0.7}));
  EXPECT_NEAR(single.blocks[0].core.values(0), 1.0, 1e-14);
  EXPECT_NEAR(single.blocks[1].core.values(0), std::exp(-1.4), 1e-14);

  const auto one = hctrw_spectral(m, vec({1, 1}));
  const auto report = oracle::compare(one.reconstruct(m), build_hctrw(m, vec({1, 1})), 1e-8);
  EXPECT_TRUE(report.pass) << report.max_abs_diff;
}

TEST(DenseCap, EnforcedForDenseOperators) {
  ModelOptions o;
  o.dense_cap = 4;
  const HierarchicalModel m(complete_with_loops(vec({0.5, 0.5})), {test::p2(), test::p2()}, o);
  try {
    hctrw_spectral(m, vec({1, 1})).reconstruct(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionCapExceeded);
  }
}

// Properties over random reversible hierarchies.

HierarchicalModel random_model(test::Gen& gen, SelectionConvention c) {
  const auto g = 1 + gen.index(3);
  const auto global = g == 1 ? test::loop1() : gen.reversible(g);
  std::vector<GraphModel> locals;
  for (std::size_t j = 0; j < g; ++j) locals.push_back(gen.reversible(1 + gen.index(3)));
  ModelOptions o;
  o.convention = c;
  return HierarchicalModel(global, locals, o);
}

TEST(HierarchyProperty, StochasticResidualsAndReconstruction) {
  test::Gen gen(303);
  for (int trial = 0; trial < 25; ++trial) {
    const auto c = trial % 2 ? SelectionConvention::Source : SelectionConvention::Destination;
    const auto m = random_model(gen, c);
    const Matrix p = build_hdtrw(m);
    const auto n = static_cast<Eigen::Index>(m.total_dimension());
    EXPECT_LE((p.rowwise().sum() - Vector::Ones(n)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GE(p.minCoeff(), 0.0);
    for (const auto& pair : hdtrw_eigenpairs(m).pairs) {
      const CVector w = pair.vector(m);
      EXPECT_LE((p.cast<Complex>() * w - pair.value * w).cwiseAbs().maxCoeff(),
                1e-8 * w.cwiseAbs().maxCoeff());
    }
    Vector t(m.global_size());
    for (Eigen::Index j = 0; j < t.size(); ++j) t(j) = gen.uniform(0.1, 2.0);
    const Matrix pt = build_hctrw(m, t);
    EXPECT_LE((pt.rowwise().sum() - Vector::Ones(n)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GE(pt.minCoeff(), -1e-12);
    const auto spectral = hctrw_spectral(m, t);
    EXPECT_LE(spectral.biorthogonality_defect(), 1e-8);
    EXPECT_LE(max_abs(Matrix(spectral.reconstruct(m) - pt)), 1e-8);
    // Independent exponential: the oracle's series on each local generator.
    std::vector<Matrix> ops;
    for (std::size_t j = 0; j < m.global_size(); ++j) {
      const Matrix& pj = m.local(j).transition();
      const Matrix gen_j = -t(j) * (Matrix::Identity(pj.rows(), pj.cols()) - pj);
      ops.push_back(oracle::matrix_exp(gen_j).real());
    }
    const Matrix loops = oracle::assemble_by_loops(m.global().transition(), ops,
                                                   c == SelectionConvention::Source);
    EXPECT_LE(max_abs(Matrix(loops - pt)), 1e-10);
  }
}

TEST(HierarchyProperty, SmallTimeLimit) {
  test::Gen gen(304);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_model(gen, SelectionConvention::Destination);
    const Vector t = Vector::Constant(m.global_size(), 1e-6);
    const auto n = static_cast<Eigen::Index>(m.local_size());
    const Matrix limit = kron(m.global().transition(), Matrix(Matrix::Identity(n, n)));
    EXPECT_LE(max_abs(Matrix(build_hctrw(m, t) - limit)), 1e-5);
  }
}

}  // namespace
}  // namespace hqw
