#include <gtest/gtest.h>

#include <cmath>

#include "ctsls/analysis.hpp"
#include "ctsls/h2_synth.hpp"
#include "ctsls/hinf_synth.hpp"
#include "test_util.hpp"

using namespace ctsls;
using namespace ctsls::test;

TEST(ResidueGram, KnownEntries) {
  EXPECT_NEAR(residue_gram(real_poles({-1.0})).M(0, 0).real(), 0.5, 1e-15);
  const PoleSet ps = PoleSet::from_list(std::vector<Complex>{{-1, 1}, {-1, -1}});
  const CMatrix M = residue_gram(ps).M;
  EXPECT_NEAR(std::abs(M(0, 0) - 0.5), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(M(1, 1) - 0.5), 0.0, 1e-15);
  // pole 0 is -1 + j
  EXPECT_NEAR(std::abs(M(0, 1) - Complex(0.25, -0.25)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(M(1, 0) - std::conj(M(0, 1))), 0.0, 1e-15);
}

TEST(ResidueGram, PositiveDefinite) {
  for (int K = 2; K <= 12; K += 2) {
    const CMatrix M = residue_gram(spiral_poles(K)).M;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(M);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0) << K;
    const Matrix G = real_residue_gram(spiral_poles(K));
    EXPECT_TRUE(G.isApprox(G.transpose()));
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(G).eigenvalues().minCoeff(), 0.0);
  }
}

TEST(ResidueNorm, FirstOrder) {
  const std::vector<Complex> p{{-1, 0}};
  const std::vector<CMatrix> c{CMatrix::Ones(1, 1)};
  EXPECT_NEAR(residue_h2_norm(p, c), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(H2Norm, ScalarOnePointEnsemble) {
  const PlantRealization p = scalar_plant(0.0, 1.0);
  const CostWeights w = CostWeights::scaled_identity(1, 1, 1.0, 1.0);
  ResponseEnsemble e;
  e.poles = real_poles({-1.0});
  e.PhiX = {CMatrix::Ones(1, 1)};
  e.PhiU = {-CMatrix::Ones(1, 1)};
  EXPECT_NEAR(h2_norm(e, w), 1.0, 1e-14);

  const SynthesisResult r = synth_h2(p, w, real_poles({-1.0}));
  EXPECT_NEAR(r.norm, 1.0, 1e-12);
  EXPECT_NEAR(std::abs(r.ensemble.PhiU[0](0, 0) + 1.0), 0.0, 1e-12);
  EXPECT_LE(r.residual, 1e-10);
}

TEST(H2Norm, MatchesLyapunovOracle) {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 4;
    const PlantRealization p = random_plant(rng, n);
    const ResponseEnsemble e = random_feasible(rng, p, spiral_poles(2 + 2 * (trial % 4)));
    const CostWeights w = CostWeights::scaled_identity(n, n, 1.0 + trial, 0.5);
    const double a = h2_norm(e, w);
    const double b = h2_norm_ss(real_realization(e, w));
    EXPECT_NEAR(a, b, 1e-8 * b) << trial;
  }
}

TEST(H2Norm, RealGramAgreesWithComplexForm) {
  const PoleSet ps = spiral_poles(6);
  const Matrix G = real_residue_gram(ps);
  std::mt19937 rng(4);
  std::normal_distribution<double> g;
  Vector c(ps.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = g(rng);
  // coordinates (Re, Im) of each pair leader give the coefficients (a, conj a)
  std::vector<Complex> coef(size_t(ps.size()));
  for (Eigen::Index k = 0; k < ps.num_pairs(); ++k) {
    coef[size_t(2 * k)] = Complex(c(2 * k), c(2 * k + 1));
    coef[size_t(2 * k + 1)] = Complex(c(2 * k), -c(2 * k + 1));
  }
  std::vector<CMatrix> cm;
  for (const Complex& v : coef) cm.push_back(CMatrix::Constant(1, 1, v));
  const double direct = residue_h2_norm(ps.poles(), cm);
  EXPECT_NEAR(c.dot(G * c), direct * direct, 1e-12 * (1 + direct * direct));
}

TEST(H2Synth, ChainBenchmark) {
  const PlantRealization p = make_chain(11, 0.6, 0.4, 1.0);
  const CostWeights w = CostWeights::scaled_identity(11, 11, 1.0, 10.0);
  const SparsityMask m = build_supports(p, 2);
  SynthesisResult r = synth_h2(p, w, spiral_poles(4), &m);
  const LqrBaseline lqr = lqr_baseline(p, w);
  EXPECT_NEAR(lqr.h2_cost, 12.25880132626493, 1e-8);
  attach_baseline(r, lqr.h2_cost);
  EXPECT_NEAR(r.normalized_cost, 1.054212274, 1e-8);
  EXPECT_GE(r.normalized_cost, 1.05);
  EXPECT_LE(r.normalized_cost, 1.30);
  EXPECT_LE(r.residual, 1e-6);
  EXPECT_EQ(mask_violation(r.ensemble, m), 0.0);
  EXPECT_NEAR(r.norm, h2_norm(r.ensemble, w), 1e-10 * r.norm);
}

TEST(H2Synth, ColumnSplitMatchesFullSolve) {
  const PlantRealization p = make_chain(5, 0.6, 0.4, 1.0);
  const CostWeights w = CostWeights::scaled_identity(5, 5, 1.0, 2.0);
  const PoleSet ps = spiral_poles(4);
  const SparsityMask m = build_supports(p, 1);
  const SynthesisResult full = synth_h2(p, w, ps, &m);
  std::vector<ColumnSolution> parts;
  double obj = 0;
  for (Eigen::Index j = 0; j < 5; ++j) {
    const std::vector<Eigen::Index> col{j};
    parts.push_back(synth_h2_column(p, w, ps, &m, col));
    obj += parts.back().objective;
  }
  const ResponseEnsemble merged = merge_columns(p, ps, &m, parts);
  for (size_t l = 0; l < merged.PhiX.size(); ++l) {
    EXPECT_LT((merged.PhiX[l] - full.ensemble.PhiX[l]).norm(), 1e-8);
    EXPECT_LT((merged.PhiU[l] - full.ensemble.PhiU[l]).norm(), 1e-8);
  }
  EXPECT_NEAR(std::sqrt(obj), full.norm, 1e-10 * full.norm);

  const std::vector<Eigen::Index> all{0, 1, 2, 3, 4};
  const ColumnSolution one = synth_h2_column(p, w, ps, &m, all);
  EXPECT_NEAR(std::sqrt(one.objective), full.norm, 1e-10 * full.norm);
}

TEST(H2Synth, ParallelMatchesSerial) {
  const PlantRealization p = make_chain(6, 0.6, 0.4, 1.0);
  const CostWeights w = CostWeights::scaled_identity(6, 6, 1.0, 1.0);
  SynthesisOptions par;
  par.workers = 3;
  const SynthesisResult a = synth_h2(p, w, spiral_poles(6));
  const SynthesisResult b = synth_h2(p, w, spiral_poles(6), nullptr, par);
  EXPECT_EQ(a.norm, b.norm);
}

TEST(H2Synth, DecoupledPlantClosedForm) {
  Matrix A = Matrix::Zero(3, 3);
  A.diagonal() << 0.5, -1.0, 2.0;
  const PlantRealization p(A, Matrix::Identity(3, 3));
  const double q = 2.0, r = 0.5;
  const CostWeights w = CostWeights::scaled_identity(3, 3, q, r);
  const SparsityMask m = build_supports(p, 1);
  const PoleSet ps = spiral_poles(6);
  const SynthesisResult res = synth_h2(p, w, ps, &m);

  // per column: Phi_u(l) = (p_l - a) Phi_x(l), sum Phi_x(l) = 1, so the
  // cost is c^H H c with H = q M + r D^H M D; the minimum is 1 / 1^T H^{-1} 1
  const CMatrix M = residue_gram(ps).M;
  double total = 0;
  for (int i = 0; i < 3; ++i) {
    CMatrix D = CMatrix::Zero(ps.size(), ps.size());
    for (Eigen::Index l = 0; l < ps.size(); ++l) D(l, l) = ps[l] - A(i, i);
    const CMatrix H = q * M + r * D.adjoint() * M * D;
    const CVector ones = CVector::Ones(ps.size());
    total += 1.0 / (ones.adjoint() * H.inverse() * ones)(0, 0).real();
  }
  EXPECT_NEAR(res.norm, std::sqrt(total), 1e-9 * res.norm);
  EXPECT_EQ(mask_violation(res.ensemble, m), 0.0);
}

TEST(H2Synth, RelaxingMaskNeverHurts) {
  const PlantRealization p = make_chain(9, 0.6, 0.4, 1.0);
  const CostWeights w = CostWeights::scaled_identity(9, 9, 1.0, 10.0);
  double prev = 1e300;
  for (int d = 1; d <= 8; ++d) {
    const SparsityMask m = build_supports(p, d);
    const double c = synth_h2(p, w, spiral_poles(4), &m).norm;
    EXPECT_LE(c, prev * (1 + 1e-9)) << d;
    prev = c;
  }
  EXPECT_NEAR(prev, synth_h2(p, w, spiral_poles(4)).norm, 1e-9 * prev);
}

TEST(H2Synth, NeverBeatsLqr) {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    const PlantRealization p = random_plant(rng, 3);
    const CostWeights w = CostWeights::scaled_identity(3, 3, 1.0, 1.0);
    const double lqr = lqr_baseline(p, w).h2_cost;
    for (int K : {2, 6, 10}) {
      const double c = synth_h2(p, w, spiral_poles(K)).norm;
      EXPECT_GE(c / lqr, 1 - 1e-6) << trial << " K=" << K;
    }
  }
}

TEST(H2Synth, InfeasiblePlant) {
  const PlantRealization p = scalar_plant(1.0, 0.0);
  const CostWeights w = CostWeights::scaled_identity(1, 1, 1.0, 1.0);
  EXPECT_THROW(synth_h2(p, w, spiral_poles(4)), InfeasibleError);
}

TEST(H2Synth, BaselineValidation) {
  SynthesisResult r;
  r.norm = 2.0;
  attach_baseline(r, 4.0);
  EXPECT_DOUBLE_EQ(r.normalized_cost, 0.5);
  EXPECT_THROW(attach_baseline(r, 0.0), InvalidArgument);
}
