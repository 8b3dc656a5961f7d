#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ctsls/linalg.hpp"
#include "ctsls/plant.hpp"
#include "ctsls/poles.hpp"

namespace ctsls {

/// Closed-loop responses in partial-fraction form,
///   Phi_x(s) = sum_l PhiX[l] / (s - p_l),  Phi_u(s) = sum_l PhiU[l] / (s - p_l),
/// indexed like the canonical order of `poles`.
struct ResponseEnsemble {
  PoleSet poles;
  std::vector<CMatrix> PhiX;  // n x n each
  std::vector<CMatrix> PhiU;  // m x n each

  Eigen::Index num_states() const { return PhiX.empty() ? 0 : PhiX[0].rows(); }
  Eigen::Index num_inputs() const { return PhiU.empty() ? 0 : PhiU[0].rows(); }

  /// Throws InvalidArgument on inconsistent sizes.
  void validate() const;

  /// Largest |PhiX[partner(l)] - conj(PhiX[l])| (and likewise for PhiU).
  double conjugacy_error() const;
};

/// Responses with repeated poles: Phi(s) = sum_l sum_j Phi[l][j] / (s - p_l)^{j+1}.
struct MultiPoleEnsemble {
  std::vector<Complex> poles;
  std::vector<std::vector<CMatrix>> PhiX;
  std::vector<std::vector<CMatrix>> PhiU;
};

struct SparsityMask {
  BoolMatrix Sx;  // n x n
  BoolMatrix Su;  // m x n
  int d = 0;

  /// All-true masks (centralized design), d = 0.
  static SparsityMask dense(Eigen::Index n, Eigen::Index m);
};

/// Sx = supp((supp(A) + I)^d), Su = supp(supp(B)^T Sx), by boolean products.
SparsityMask build_supports(const PlantRealization& plant, int d);

/// One free real variable: part (re/im) of entry (row, col) of PhiX or PhiU
/// at the canonical index `pole` of a representative.
struct VarIndex {
  Eigen::Index pole = 0;
  bool imag = false;
  bool is_u = false;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
};

/// Constraints for a single column j of [PhiX; PhiU], i.e. a closed set of
/// equations in the variables of that column alone.
///
/// Variables are ordered coordinate-major: for each canonical coordinate c
/// (see PoleSet) the unmasked rows of PhiX(:, j) then of PhiU(:, j).
/// Rows: n for sum_l PhiX(l) = I, then n per coordinate for the dynamics.
struct ColumnBlock {
  Eigen::Index col = 0;
  Matrix E;
  Vector b;
  std::vector<VarIndex> vars;
  std::vector<Eigen::Index> x_rows;  // unmasked rows of PhiX(:, j)
  std::vector<Eigen::Index> u_rows;  // unmasked rows of PhiU(:, j)

  Eigen::Index vars_per_coordinate() const {
    return Eigen::Index(x_rows.size() + u_rows.size());
  }
};

/// Real linear system over the free variables, block diagonal by column.
struct ConstraintSystem {
  PoleSet poles;
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  std::vector<ColumnBlock> blocks;

  Eigen::Index num_vars() const;
  Eigen::Index num_rows() const;

  /// Stacked E and b (block diagonal).
  Matrix matrix() const;
  Vector rhs() const;

  /// Scatter per-block solutions back to an ensemble. `x` lists one vector
  /// per block; masked entries are exactly zero.
  ResponseEnsemble reconstruct(const std::vector<Vector>& x) const;

  /// Inverse of reconstruct (reads the unmasked entries).
  std::vector<Vector> extract(const ResponseEnsemble& ensemble) const;
};

/// Assemble the equality constraints for the given columns (all columns when
/// `columns` is empty).
ConstraintSystem assemble(const PlantRealization& plant, const PoleSet& poles,
                          const SparsityMask* mask = nullptr,
                          std::span<const Eigen::Index> columns = {});

/// x = x0 + Z xi describes the solution set of E x = b. Z has orthonormal
/// columns; x0 is the minimum-norm solution.
struct AffineSolutionSet {
  Vector x0;
  Matrix Z;
  Eigen::Index rank = 0;
  double residual = 0.0;  // ||E x0 - b||
};

/// Rank-revealing QR of E^T. Throws InfeasibleError when the system is
/// inconsistent beyond `tol` (absolute, in the residual of E x0 - b).
AffineSolutionSet solve_affine(const ColumnBlock& block, double tol = 1e-6);

/// Minimum-norm ensemble satisfying the constraints.
ResponseEnsemble solve_feasible(const ConstraintSystem& system, double tol = 1e-6);

/// Phi_x(s), Phi_u(s). Throws DomainError when s hits a pole.
std::pair<CMatrix, CMatrix> evaluate(const ResponseEnsemble& ensemble, Complex s);
std::pair<CMatrix, CMatrix> evaluate(const MultiPoleEnsemble& ensemble, Complex s);

/// max over samples of ||(sI - A) Phi_x(s) - B Phi_u(s) - I||_F.
double residual(const ResponseEnsemble& ensemble, const PlantRealization& plant,
                std::span<const Complex> samples);
double residual(const MultiPoleEnsemble& ensemble, const PlantRealization& plant,
                std::span<const Complex> samples);

/// Coefficient form of the same check for repeated poles: the largest
/// Frobenius violation of
///   sum_l Phi_x(l, 1) = I,
///   (p_l I - A) Phi_x(l, j) - B Phi_u(l, j) + Phi_x(l, j + 1) = 0,
///   (p_l I - A) Phi_x(l, m_l) - B Phi_u(l, m_l) = 0.
double coefficient_residual(const MultiPoleEnsemble& ensemble,
                            const PlantRealization& plant);

/// `count` deterministic samples in the disk |s| <= radius, kept at least
/// 1e-3 away from every pole.
std::vector<Complex> random_samples(const PoleSet& poles, int count,
                                    double radius = 10.0,
                                    std::uint64_t seed = 12345);

/// Largest |entry| of PhiX / PhiU outside the mask.
double mask_violation(const ResponseEnsemble& ensemble, const SparsityMask& mask);

}  // namespace ctsls
