#pragma once

#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "ctsls/linalg.hpp"

namespace ctsls {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Semidefinite program in the form
///
///   maximize b^T y  subject to  S_k = C_k - sum_i y_i A_{i,k}  >= 0,  k = 1..nblocks,
///
/// where y = (svec(X), f) splits into a symmetric N x N matrix X and free
/// scalars f. X enters block k as  L_k^T X R_k + R_k^T X L_k  (L_k, R_k are
/// N x n_k); each free scalar carries one sparse symmetric matrix per block.
struct StructuredSdp {
  std::vector<Matrix> C;  // constant term per block

  Eigen::Index x_dim = 0;  // N; 0 when there is no matrix variable
  struct XTerm {
    Eigen::Index block = 0;
    Matrix L;
    Matrix R;
  };
  std::vector<XTerm> x_terms;  // at most one per block

  /// free[i][k]: coefficient of free scalar i in block k (empty = zero)
  std::vector<std::vector<SparseMatrix>> free;

  Vector b;  // length svec_size(x_dim) + free.size()

  Eigen::Index num_blocks() const { return Eigen::Index(C.size()); }
  Eigen::Index num_x() const { return svec_size(x_dim); }
  Eigen::Index num_free() const { return Eigen::Index(free.size()); }
  Eigen::Index num_y() const { return num_x() + num_free(); }

  /// Throws InvalidArgument on inconsistent sizes.
  void validate() const;

  /// sum_i y_i A_{i,k} for every block.
  std::vector<Matrix> apply_adjoint(const Eigen::Ref<const Vector>& y) const;

  /// (<A_{i,.}, W>)_i for a block-diagonal symmetric W.
  Vector apply(const std::vector<Matrix>& W) const;
};

struct SdpOptions {
  double tol = 1e-9;
  int max_iter = 100;
  /// fraction of the distance to the cone boundary taken per step
  double step_fraction = 0.98;
  /// give up after this many iterations without halving the worst residual
  int stall_iterations = 30;
  bool verbose = false;
};

enum class SdpStatus { Optimal, NearOptimal, Stalled, MaxIterations, NumericalFailure };

std::string to_string(SdpStatus status);

struct SdpResult {
  SdpStatus status = SdpStatus::NumericalFailure;
  Vector y;
  std::vector<Matrix> S;  // C - A^*(y), recomputed from y
  std::vector<Matrix> Z;  // primal matrices
  double primal_objective = 0.0;  // <C, Z>
  double dual_objective = 0.0;    // b^T y
  double relative_gap = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  int iterations = 0;

  Matrix X(Eigen::Index n) const { return smat(y.head(svec_size(n)), n); }
};

/// Infeasible-start primal-dual path following with the HKM direction and a
/// Mehrotra predictor-corrector. The Schur complement is dense.
SdpResult solve_sdp(const StructuredSdp& problem, const SdpOptions& options = {});

namespace detail {
/// Schur complement M_ij = <A_i, Z A_j G> summed over blocks.
Matrix schur_matrix(const StructuredSdp& problem, const std::vector<Matrix>& Z,
                    const std::vector<Matrix>& G);
}  // namespace detail

}  // namespace ctsls
