#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ctsls/plant.hpp"

using namespace ctsls;

TEST(Chain, PaperBenchmark) {
  const PlantRealization p = make_chain(11, 0.6, 0.4, 1.0);
  ASSERT_EQ(p.num_states(), 11);
  ASSERT_EQ(p.num_inputs(), 11);
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      const double expect = i == j ? 0.6 : (std::abs(i - j) == 1 ? 0.4 : 0.0);
      EXPECT_EQ(p.A()(i, j), expect) << i << "," << j;
    }
  }
  EXPECT_TRUE(p.B().isIdentity(0.0));
}

TEST(Chain, ZeroCoupling) {
  const PlantRealization p = make_chain(2, 0.0, 0.0, 1.0);
  EXPECT_TRUE(p.A().isZero(0.0));
  EXPECT_TRUE(p.B().isIdentity(0.0));
}

TEST(Chain, SpectralAbscissaClosedForm) {
  const PlantRealization p = make_chain(3, 0.6, 0.4, 1.0);
  EXPECT_NEAR(spectral_abscissa(p.A()), 0.6 + 0.8 * std::cos(std::numbers::pi / 4), 1e-12);
}

TEST(Chain, RejectsTinyChain) { EXPECT_THROW(make_chain(1, 0.6, 0.4, 1.0), InvalidArgument); }

TEST(Grid, ThreeByThreeStructure) {
  const PlantRealization p = make_grid({});
  ASSERT_EQ(p.num_states(), 18);
  ASSERT_EQ(p.num_inputs(), 9);
  // corner bus 0 has 2 neighbours, bus 1 has 3, centre bus 4 has 4
  const int degree[9] = {2, 3, 2, 3, 4, 3, 2, 3, 2};
  for (int i = 0; i < 9; ++i) {
    Eigen::Matrix2d blk = p.A().block<2, 2>(2 * i, 2 * i);
    Eigen::Matrix2d expect;
    expect << 0, 1, -degree[i], -1;
    EXPECT_TRUE(blk.isApprox(expect)) << "bus " << i << "\n" << blk;
    EXPECT_EQ(p.B()(2 * i + 1, i), 1.0);
    EXPECT_EQ(p.B()(2 * i, i), 0.0);
    EXPECT_EQ(p.state_subsystems()[size_t(2 * i)], i);
    EXPECT_EQ(p.state_subsystems()[size_t(2 * i + 1)], i);
  }
  // bus 0 couples to buses 1 and 3 through the angle
  EXPECT_EQ(p.A()(1, 2), 1.0);
  EXPECT_EQ(p.A()(1, 6), 1.0);
  EXPECT_EQ(p.A()(1, 8), 0.0);
  EXPECT_EQ(p.B().sum(), 9.0);
}

TEST(Grid, SingleBus) {
  GridParams gp;
  gp.rows = gp.cols = 1;
  gp.damping = 0.5;
  const PlantRealization p = make_grid(gp);
  Eigen::Matrix2d expect;
  expect << 0, 1, 0, -0.5;
  EXPECT_TRUE(p.A().isApprox(expect));
  EXPECT_NEAR(spectral_abscissa(p.A()), 0.0, 1e-14);
}

TEST(Grid, MarginalSpectrum) {
  const PlantRealization p = make_grid({});
  Eigen::EigenSolver<Matrix> es(p.A());
  double best = -1e9;
  int zeros = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    best = std::max(best, es.eigenvalues()(i).real());
    if (std::abs(es.eigenvalues()(i)) < 1e-8) ++zeros;
  }
  EXPECT_NEAR(best, 0.0, 1e-9);
  EXPECT_EQ(zeros, 1);
  EXPECT_NEAR(spectral_abscissa(p.A()), 0.0, 1e-9);
}

TEST(Grid, RandomizedIsSeeded) {
  GridParams gp;
  gp.randomize = true;
  gp.seed = 3;
  const PlantRealization a = make_grid(gp), b = make_grid(gp);
  EXPECT_TRUE(a.A().isApprox(b.A()));
  gp.seed = 4;
  EXPECT_FALSE(make_grid(gp).A().isApprox(a.A()));
  for (int i = 0; i < 9; ++i) {
    const double d = -a.A()(2 * i + 1, 2 * i + 1);
    EXPECT_GE(d, 0.5);
    EXPECT_LE(d, 1.5);
  }
  // Laplacian rows still sum to zero
  for (int i = 0; i < 9; ++i) {
    double s = 0;
    for (int j = 0; j < 9; ++j) s += a.A()(2 * i + 1, 2 * j);
    EXPECT_NEAR(s, 0.0, 1e-12);
  }
}

TEST(Stabilizable, Scalars) {
  EXPECT_FALSE(is_stabilizable(Matrix::Constant(1, 1, 1.0), Matrix::Zero(1, 1)));
  EXPECT_TRUE(is_stabilizable(Matrix::Constant(1, 1, -1.0), Matrix::Zero(1, 1)));
  EXPECT_TRUE(is_stabilizable(Matrix::Constant(1, 1, 1.0), Matrix::Ones(1, 1)));
}

TEST(Stabilizable, UnstableChain) {
  const PlantRealization p = make_chain(11, 0.6, 0.4, 1.0);
  EXPECT_TRUE(is_stabilizable(p));
  EXPECT_GT(spectral_abscissa(p.A()), 0.0);
}

TEST(Stabilizable, UncontrollableUnstableMode) {
  Matrix A(2, 2), B(2, 1);
  A << 1, 0, 0, -1;
  B << 0, 1;
  EXPECT_FALSE(is_stabilizable(A, B));
  A(0, 0) = -2;
  EXPECT_TRUE(is_stabilizable(A, B));
}

TEST(Detectable, Dual) {
  Matrix A(2, 2), C(1, 2);
  A << 1, 0, 0, -1;
  C << 0, 1;
  EXPECT_FALSE(is_detectable(A, C));
  C << 1, 0;
  EXPECT_TRUE(is_detectable(A, C));
}

TEST(Plant, Validation) {
  EXPECT_THROW(PlantRealization(Matrix::Zero(2, 3), Matrix::Zero(2, 1)), InvalidArgument);
  EXPECT_THROW(PlantRealization(Matrix::Zero(2, 2), Matrix::Zero(3, 1)), InvalidArgument);
  EXPECT_THROW(PlantRealization(Matrix::Zero(2, 2), Matrix::Zero(2, 1), {0}, {0}),
               InvalidArgument);
  Matrix A = Matrix::Zero(1, 1);
  A(0, 0) = std::nan("");
  EXPECT_THROW(PlantRealization(A, Matrix::Ones(1, 1)), InvalidArgument);
}

TEST(Weights, Validation) {
  EXPECT_NO_THROW(CostWeights::scaled_identity(3, 2, 1.0, 10.0));
  EXPECT_THROW(CostWeights(Matrix::Identity(2, 2), Matrix::Zero(1, 1)), InvalidArgument);
  EXPECT_THROW(CostWeights(-Matrix::Identity(2, 2), Matrix::Ones(1, 1)), InvalidArgument);
  Matrix Q(2, 2);
  Q << 1, 2, 0, 1;
  EXPECT_THROW(CostWeights(Q, Matrix::Ones(1, 1)), InvalidArgument);
}
