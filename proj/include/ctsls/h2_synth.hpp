#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ctsls/constraints.hpp"
#include "ctsls/plant.hpp"
#include "ctsls/poles.hpp"

namespace ctsls {

/// M_lk = 1 / (-conj(p_l) - p_k), the Gram matrix of {e^{p_l t}} on [0, inf).
struct ResidueGram {
  CMatrix M;
};

/// Throws InvalidArgument when M fails to be Hermitian positive definite.
ResidueGram residue_gram(const PoleSet& poles);

/// Real form Re(T^H M T) in the canonical coordinates of `poles`, where T
/// maps (Re, Im) of each pair leader to the coefficients of (p, conj p).
Matrix real_residue_gram(const PoleSet& poles);

/// H2 norm of sum_l C_l / (s - p_l) for distinct stable poles (need not be
/// conjugate-closed).
double residue_h2_norm(std::span<const Complex> poles, std::span<const CMatrix> coefficients);

/// blkdiag(Q^{1/2}, R^{1/2}).
Matrix weight_root(const CostWeights& weights);

/// Columns of W acting on the unmasked entries of one column block
/// (x rows, then u rows).
Matrix column_weight(const Matrix& Wroot, Eigen::Index n, const ColumnBlock& block);

/// || W [Phi_x; Phi_u] ||_H2 with W = weight_root(weights).
double h2_norm(const ResponseEnsemble& ensemble, const CostWeights& weights);

struct SynthesisOptions {
  /// absolute tolerance on the equality residual
  double feasibility_tol = 1e-6;
  /// parallel column solves (h2); 0 or 1 runs inline
  int workers = 1;
  /// relative gap / infeasibility target of the H-infinity SDP
  double sdp_tol = 1e-9;
  int sdp_max_iter = 100;
  bool verbose = false;
};

struct SynthesisResult {
  ResponseEnsemble ensemble;
  /// achieved H2 or H-infinity norm of the weighted responses
  double norm = 0.0;
  /// norm / baseline, NaN until a baseline is attached
  double normalized_cost = std::numeric_limits<double>::quiet_NaN();
  double baseline = std::numeric_limits<double>::quiet_NaN();
  /// max residual over 100 deterministic samples with |s| <= 10
  double residual = 0.0;
  double solve_ms = 0.0;
  double kkt_primal = 0.0;
  double kkt_stationarity = 0.0;
  bool rank_deficient = false;
  std::string status = "optimal";

  // H-infinity extras
  bool has_gamma = false;
  double gamma = 0.0;
  double lmi_margin = 0.0;
  double X_min_eig = 0.0;
  Matrix X;
};

/// Attach a baseline and fill in normalized_cost.
void attach_baseline(SynthesisResult& result, double baseline);

/// Solution for a subset of columns.
struct ColumnSolution {
  std::vector<Eigen::Index> columns;
  std::vector<Vector> x;  // one per column, in the variable order of assemble
  double objective = 0.0;  // sum of squared H2 norms of the columns
  double kkt_primal = 0.0;
  double kkt_stationarity = 0.0;
  bool rank_deficient = false;
};

ColumnSolution synth_h2_column(const PlantRealization& plant, const CostWeights& weights,
                               const PoleSet& poles, const SparsityMask* mask,
                               std::span<const Eigen::Index> columns,
                               const SynthesisOptions& options = {});

/// Minimize the H2 norm of W [Phi_x; Phi_u] over ensembles on `poles`
/// satisfying the SLS constraints and the mask. Columns are independent
/// problems and are solved separately (optionally in parallel).
SynthesisResult synth_h2(const PlantRealization& plant, const CostWeights& weights,
                         const PoleSet& poles, const SparsityMask* mask = nullptr,
                         const SynthesisOptions& options = {});

/// Merge per-column solutions into one ensemble.
ResponseEnsemble merge_columns(const PlantRealization& plant, const PoleSet& poles,
                               const SparsityMask* mask,
                               std::span<const ColumnSolution> parts);

}  // namespace ctsls
