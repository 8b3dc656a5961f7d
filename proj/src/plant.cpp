#include "ctsls/plant.hpp"

#include <cmath>
#include <random>
#include <string>

namespace ctsls {

namespace {

std::vector<int> iota_vector(Eigen::Index n) {
  std::vector<int> v(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) v[static_cast<size_t>(i)] = int(i);
  return v;
}

}  // namespace

PlantRealization::PlantRealization(Matrix A, Matrix B,
                                   std::vector<int> state_subsystems,
                                   std::vector<int> input_subsystems)
    : A_(std::move(A)),
      B_(std::move(B)),
      state_sub_(std::move(state_subsystems)),
      input_sub_(std::move(input_subsystems)) {
  if (A_.rows() < 1 || A_.rows() != A_.cols()) {
    throw InvalidArgument("A must be square with n >= 1");
  }
  if (B_.rows() != A_.rows() || B_.cols() < 1) {
    throw InvalidArgument("B must be n x m with m >= 1");
  }
  if (state_sub_.size() != static_cast<size_t>(A_.rows())) {
    throw InvalidArgument("every state needs exactly one subsystem");
  }
  if (input_sub_.size() != static_cast<size_t>(B_.cols())) {
    throw InvalidArgument("every input needs exactly one subsystem");
  }
  if (!A_.allFinite() || !B_.allFinite()) {
    throw InvalidArgument("plant matrices must be finite");
  }
}

PlantRealization::PlantRealization(Matrix A, Matrix B)
    : PlantRealization(A, B, iota_vector(A.rows()), iota_vector(B.cols())) {}

CostWeights::CostWeights(Matrix Q_, Matrix R_)
    : Q(std::move(Q_)), R(std::move(R_)) {
  require_square(Q, "Q");
  require_square(R, "R");
  constexpr double tol = 1e-10;
  if (!is_symmetric(Q, tol * std::max(1.0, Q.cwiseAbs().maxCoeff())) ||
      !is_symmetric(R, tol * std::max(1.0, R.cwiseAbs().maxCoeff()))) {
    throw InvalidArgument("Q and R must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eq(Q, Eigen::EigenvaluesOnly);
  if (eq.eigenvalues().minCoeff() < -tol * std::max(1.0, Q.norm())) {
    throw InvalidArgument("Q must be positive semidefinite");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> er(R, Eigen::EigenvaluesOnly);
  if (er.eigenvalues().minCoeff() <= 0.0) {
    throw InvalidArgument("R must be positive definite");
  }
}

CostWeights CostWeights::scaled_identity(Eigen::Index n, Eigen::Index m,
                                         double q, double r) {
  return CostWeights(q * Matrix::Identity(n, n), r * Matrix::Identity(m, m));
}

PlantRealization make_chain(int n, double a_diag, double a_off,
                            double b_diag) {
  if (n < 2) throw InvalidArgument("chain needs n >= 2, got " + std::to_string(n));
  Matrix A = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    A(i, i) = a_diag;
    if (i > 0) A(i, i - 1) = A(i - 1, i) = a_off;
  }
  Matrix B = b_diag * Matrix::Identity(n, n);
  return PlantRealization(std::move(A), std::move(B));
}

PlantRealization make_grid(const GridParams& p) {
  if (p.rows < 1 || p.cols < 1) throw InvalidArgument("grid needs rows, cols >= 1");
  if (!(p.inertia > 0 && p.damping > 0 && p.coupling > 0)) {
    throw InvalidArgument("grid parameters must be strictly positive");
  }
  const int buses = p.rows * p.cols;
  const int n = 2 * buses;

  std::vector<double> inertia(buses, p.inertia), damping(buses, p.damping);
  // Couplings for the right (c, c+1) and down (r, r+1) edges of each bus.
  std::vector<double> k_right(buses, p.coupling), k_down(buses, p.coupling);
  if (p.randomize) {
    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<double> unit(0.5, 1.5);
    for (int b = 0; b < buses; ++b) {
      damping[b] = unit(rng);
      k_right[b] = unit(rng);
      k_down[b] = unit(rng);
    }
  }

  Matrix A = Matrix::Zero(n, n);
  Matrix B = Matrix::Zero(n, buses);
  std::vector<int> state_sub(n), input_sub(buses);
  auto bus = [&](int r, int c) { return r * p.cols + c; };
  auto couple = [&](int i, int j, double k) {
    A(2 * i + 1, 2 * i) -= k / inertia[i];
    A(2 * i + 1, 2 * j) += k / inertia[i];
    A(2 * j + 1, 2 * j) -= k / inertia[j];
    A(2 * j + 1, 2 * i) += k / inertia[j];
  };
  for (int r = 0; r < p.rows; ++r) {
    for (int c = 0; c < p.cols; ++c) {
      const int i = bus(r, c);
      A(2 * i, 2 * i + 1) = 1.0;
      A(2 * i + 1, 2 * i + 1) = -damping[i] / inertia[i];
      B(2 * i + 1, i) = 1.0;
      state_sub[2 * i] = state_sub[2 * i + 1] = i;
      input_sub[i] = i;
      if (c + 1 < p.cols) couple(i, bus(r, c + 1), k_right[i]);
      if (r + 1 < p.rows) couple(i, bus(r + 1, c), k_down[i]);
    }
  }
  return PlantRealization(std::move(A), std::move(B), std::move(state_sub),
                          std::move(input_sub));
}

bool is_stabilizable(const Eigen::Ref<const Matrix>& A,
                     const Eigen::Ref<const Matrix>& B) {
  require_square(A, "A");
  if (B.rows() != A.rows()) throw InvalidArgument("B row count must match A");
  const Eigen::Index n = A.rows();
  Eigen::EigenSolver<Matrix> es(A, false);
  const CVector lambda = es.eigenvalues();
  CMatrix pbh(n, n + B.cols());
  pbh.rightCols(B.cols()) = B.cast<Complex>();
  for (Eigen::Index k = 0; k < n; ++k) {
    const Complex l = lambda(k);
    if (l.real() < -1e-10 * (1.0 + std::abs(l))) continue;
    pbh.leftCols(n) = l * CMatrix::Identity(n, n) - A.cast<Complex>();
    if (numerical_rank(pbh, 1e-8) < n) return false;
  }
  return true;
}

bool is_detectable(const Eigen::Ref<const Matrix>& A,
                   const Eigen::Ref<const Matrix>& C) {
  return is_stabilizable(A.transpose(), C.transpose());
}

}  // namespace ctsls
