#pragma once

#include <cstdint>
#include <vector>

#include "ctsls/linalg.hpp"

namespace ctsls {

/// Continuous-time LTI plant  x' = A x + B u + w  with every state and input
/// assigned to a subsystem.
class PlantRealization {
 public:
  PlantRealization(Matrix A, Matrix B, std::vector<int> state_subsystems,
                   std::vector<int> input_subsystems);

  /// One subsystem per state; input j belongs to subsystem j.
  PlantRealization(Matrix A, Matrix B);

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  Eigen::Index num_states() const { return A_.rows(); }
  Eigen::Index num_inputs() const { return B_.cols(); }
  const std::vector<int>& state_subsystems() const { return state_sub_; }
  const std::vector<int>& input_subsystems() const { return input_sub_; }

 private:
  Matrix A_;
  Matrix B_;
  std::vector<int> state_sub_;
  std::vector<int> input_sub_;
};

/// LQ weights, Q >= 0 and R > 0.
struct CostWeights {
  CostWeights(Matrix Q, Matrix R);

  /// Q = q I_n, R = r I_m.
  static CostWeights scaled_identity(Eigen::Index n, Eigen::Index m, double q,
                                     double r);

  Matrix Q;
  Matrix R;
};

/// Swing-equation lattice. Scalars are the nominal values for every bus and
/// edge; with `randomize` the couplings and dampings are drawn uniformly
/// from [0.5, 1.5] using `seed`.
struct GridParams {
  int rows = 3;
  int cols = 3;
  double inertia = 1.0;
  double damping = 1.0;
  double coupling = 1.0;
  bool randomize = false;
  std::uint64_t seed = 0;
};

PlantRealization make_chain(int n, double a_diag, double a_off, double b_diag);

/// Bus i = r * cols + c owns states (theta_i, dtheta_i) at 2i, 2i+1 and
/// input i, which drives dtheta_i.
PlantRealization make_grid(const GridParams& params);

/// PBH test over the eigenvalues with nonnegative real part. A singular
/// value below 1e-8 times the largest counts as rank deficiency.
bool is_stabilizable(const Eigen::Ref<const Matrix>& A,
                     const Eigen::Ref<const Matrix>& B);

inline bool is_stabilizable(const PlantRealization& plant) {
  return is_stabilizable(plant.A(), plant.B());
}

/// (C, A) detectable, via stabilizability of the dual pair.
bool is_detectable(const Eigen::Ref<const Matrix>& A,
                   const Eigen::Ref<const Matrix>& C);

}  // namespace ctsls
