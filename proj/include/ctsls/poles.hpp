#pragma once

#include <span>
#include <vector>

#include "ctsls/linalg.hpp"

namespace ctsls {

/// Conjugate-closed set of distinct poles in the open left half plane.
///
/// Poles are kept in a canonical order: complex pairs first, each as
/// (p, conj(p)) with Im(p) > 0, followed by the real poles. The canonical
/// index doubles as the index of the real coordinate used by the
/// constraint layer: slot 2k holds Re(.) and slot 2k+1 holds Im(.) of
/// the coefficient attached to pair k.
class PoleSet {
 public:
  PoleSet() = default;

  /// Validates and reorders. Imaginary parts below `real_tol * (1 + |p|)`
  /// are snapped to zero. `input_order()` records where each input landed.
  static PoleSet from_list(std::span<const Complex> poles,
                           double real_tol = 1e-12);

  Eigen::Index size() const { return Eigen::Index(poles_.size()); }
  const Complex& operator[](Eigen::Index i) const { return poles_[size_t(i)]; }
  const std::vector<Complex>& poles() const { return poles_; }

  Eigen::Index num_pairs() const { return num_pairs_; }
  Eigen::Index num_real() const { return size() - 2 * num_pairs_; }
  bool is_real(Eigen::Index i) const { return i >= 2 * num_pairs_; }

  /// Index of the conjugate partner (itself for real poles).
  Eigen::Index partner(Eigen::Index i) const;

  /// Canonical indices of one pole per conjugate class (pair leaders, then
  /// real poles).
  std::vector<Eigen::Index> representatives() const;

  /// canonical index of the i-th pole passed to from_list.
  const std::vector<Eigen::Index>& input_order() const { return input_order_; }

  /// Smallest |Re p|; the set lies left of -min_decay().
  double min_decay() const;

 private:
  std::vector<Complex> poles_;
  std::vector<Eigen::Index> input_order_;
  Eigen::Index num_pairs_ = 0;
};

/// s = (z - 1) / (z + 1). Maps the open unit disk onto the open left half
/// plane. Throws DomainError at z = -1.
Complex bilinear(Complex z);

/// z = (1 + s) / (1 - s), the inverse of bilinear. Throws DomainError at s = 1.
Complex inv_bilinear(Complex s);

/// Archimedes-spiral points in the unit disk: for k = 1..K/2,
/// theta_k = 2 sqrt(pi k), r_k = sqrt(2k / (m + 2)), z = r_k e^{+-j theta_k}.
/// `spiral_m` = 0 selects m = K. Returned as (z_k, conj z_k) pairs.
std::vector<Complex> spiral_points(int K, int spiral_m = 0);

/// Bilinear image of spiral_points. Poles closer than 1e-8 are pushed apart
/// by shrinking the later spiral radius by 1e-6.
PoleSet spiral_poles(int K, int spiral_m = 0);

struct CoveringReport {
  double distance = 0.0;
  /// nearest candidate for each target, in target order
  std::vector<Complex> nearest;
};

/// max over targets of the distance to the nearest candidate.
CoveringReport covering_distance(std::span<const Complex> candidates,
                                 std::span<const Complex> targets);

inline CoveringReport covering_distance(const PoleSet& candidates,
                                        std::span<const Complex> targets) {
  return covering_distance(std::span<const Complex>(candidates.poles()),
                           targets);
}

struct LipschitzConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double c4 = 0.0;
  double c5 = 0.0;
};

/// c4 = max |1 - q|, c5 = 1 + min |q|, c1 = 2 c5 / (c4 (c4 + c5)),
/// c2 = c4 (c4 + c5) / 2. Whenever |z_p - z_q| <= c1 we have
/// |p - q| <= c2 |z_p - z_q|.
LipschitzConstants lipschitz_constants(std::span<const Complex> targets);

/// A strictly proper transfer matrix in pole/residue form,
/// sum_q R_q / (s - q).
struct PoleResidueModel {
  std::vector<Complex> poles;
  std::vector<CMatrix> residues;

  CMatrix evaluate(Complex s) const;
};

struct SpaFitOptions {
  double omega_min = 1e-3;
  double omega_max = 1e3;
  int num_frequencies = 400;
};

struct SpaFit {
  /// one coefficient per pole of the fitting set, canonical order
  std::vector<CMatrix> coefficients;
  double h2_error = 0.0;
  double hinf_error = 0.0;
  bool rank_deficient = false;
};

/// Weighted least-squares fit of sum_p G_p / (s - p) to `target` on the
/// grid {0} U logspace(omega_min, omega_max). Coefficients of conjugate
/// poles are conjugate by construction. Errors are exact norms of the
/// mismatch.
SpaFit spa_fit(const PoleResidueModel& target, const PoleSet& poles,
               const SpaFitOptions& options = {});

/// Frequency grid and central-difference weights used by spa_fit.
void spa_frequency_grid(const SpaFitOptions& options, Vector& omega,
                        Vector& weight);

}  // namespace ctsls
