#pragma once

#include "ctsls/linalg.hpp"
#include "ctsls/plant.hpp"
#include "ctsls/poles.hpp"

namespace ctsls {

/// Strictly proper system x' = A x + B w, z = C x.
struct StateSpace {
  Matrix A;
  Matrix B;
  Matrix C;

  void validate() const;
  Eigen::Index order() const { return A.rows(); }
  /// C (sI - A)^{-1} B
  CMatrix evaluate(Complex s) const;
};

enum class LyapunovMethod { Auto, Kronecker, Schur };

/// Solves A P + P A^T + W = 0 for Hurwitz A. Auto uses the Kronecker form up
/// to order 40 and complex-Schur back substitution above.
Matrix lyapunov(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& W,
                LyapunovMethod method = LyapunovMethod::Auto);

/// sqrt(trace(C P C^T)) with A P + P A^T + B B^T = 0. DomainError if A is not
/// Hurwitz.
double h2_norm_ss(const StateSpace& sys);

struct HinfNorm {
  double value = 0.0;  // attained lower bound
  double lower = 0.0;
  double upper = 0.0;
  double peak_frequency = 0.0;
  double sweep_max = 0.0;
};

/// Peak gain over omega in {0} U logspace(-3, 3, 2000), refined with the
/// imaginary-axis eigenvalue test on
///   H(gamma) = [A, B B^T / gamma; -C^T C / gamma, -A^T].
/// On return the norm lies in [lower, upper], upper <= lower (1 + 2 tol) + tol.
HinfNorm hinf_norm_bounds(const StateSpace& sys, double tol = 1e-8);

inline double hinf_norm_ss(const StateSpace& sys, double tol = 1e-8) {
  return hinf_norm_bounds(sys, tol).value;
}

/// Largest singular value of C (j omega I - A)^{-1} B over a given grid,
/// using one Schur factorization.
Vector sigma_max_sweep(const StateSpace& sys, const Eigen::Ref<const Vector>& omega);

/// Real modal realization of a conjugate-closed pole/residue model.
StateSpace realize_pole_residue(const PoleResidueModel& model);

struct CareSolution {
  Matrix P;
  Matrix K;  // R^{-1} B^T P
  int iterations = 0;
  double residual = 0.0;  // ||A^T P + P A - P B R^{-1} B^T P + Q||_F
};

/// Stabilizing solution of A^T P + P A - P B R^{-1} B^T P + Q = 0. Warm start
/// from the matrix sign function of the Hamiltonian (falling back to a Bass
/// gain), then Newton-Kleinman until the residual is below 1e-9 ||Q||.
CareSolution care(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                  const Eigen::Ref<const Matrix>& Q, const Eigen::Ref<const Matrix>& R);

struct LqrBaseline {
  Matrix K;
  Matrix P;
  double h2_cost = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

/// LQR with u = -K x; h2_cost is the H2 norm from w to
/// [Q^{1/2} x; R^{1/2} u].
LqrBaseline lqr_baseline(const PlantRealization& plant, const CostWeights& weights);

/// Stabilizing P >= 0 for A^T P + P A + P (I / gamma^2 - B R^{-1} B^T) P + Q = 0
/// exists (full-information state feedback achieving ||T_zw|| < gamma).
bool hinf_riccati_feasible(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                           const Eigen::Ref<const Matrix>& Q, const Eigen::Ref<const Matrix>& R,
                           double gamma, Matrix* P = nullptr);

/// Optimal full-information H-infinity level by bisection on
/// hinf_riccati_feasible, to relative tolerance `rel_tol`.
double hinf_riccati_bisection(const Eigen::Ref<const Matrix>& A,
                              const Eigen::Ref<const Matrix>& B,
                              const Eigen::Ref<const Matrix>& Q,
                              const Eigen::Ref<const Matrix>& R, double rel_tol = 1e-9);

enum class HinfBaselineMethod { Riccati, Sls };

struct HinfBaselineOptions {
  HinfBaselineMethod method = HinfBaselineMethod::Riccati;
  int sls_poles = 16;
  double rel_tol = 1e-9;
};

/// Centralized H-infinity level used to normalize H-infinity costs.
double hinf_baseline(const PlantRealization& plant, const CostWeights& weights,
                     const HinfBaselineOptions& options = {});

}  // namespace ctsls
