#pragma once

#include <iosfwd>
#include <limits>
#include <vector>

#include "ctsls/constraints.hpp"
#include "ctsls/linalg.hpp"
#include "ctsls/plant.hpp"

namespace ctsls {

/// u = K(s) x with  xi' = Ak xi + Bk x,  u = Ck xi + Dk x.
///
/// Built from  v = x + (I - s Phi_x) v,  u = s Phi_u v  in real modal
/// coordinates. The n integrator modes of that loop cannot be seen from u and
/// are projected out, so the order is n (K - 1) for a generic ensemble.
struct ControllerRealization {
  Matrix Ak;
  Matrix Bk;
  Matrix Ck;
  Matrix Dk;
  Eigen::Index removed_modes = 0;

  Eigen::Index order() const { return Ak.rows(); }
  CMatrix evaluate(Complex s) const;
};

/// Throws InvalidArgument when sum_l PhiX(l) differs from I by more than
/// `tol` or the ensemble is not conjugate-closed.
ControllerRealization realize_controller(const ResponseEnsemble& ensemble, double tol = 1e-6);

/// Same, refusing (InfeasibleError) ensembles whose SLS residual against
/// `plant` exceeds `tol`.
ControllerRealization realize_controller(const ResponseEnsemble& ensemble,
                                         const PlantRealization& plant, double tol = 1e-6);

/// [A + B Dk, B Ck; Bk, Ak]
Matrix closed_loop_matrix(const PlantRealization& plant, const ControllerRealization& k);

/// w = impulse * delta(t), or nothing.
struct Disturbance {
  Vector impulse;  // empty means zero
};

struct SimResult {
  Vector t;
  Matrix x;  // samples x n
  Matrix u;  // samples x m
  bool stable = true;
  double spectral_abscissa = 0.0;
  /// max over t and over the states of each subsystem of |x_i(t)|
  std::vector<double> subsystem_peak;
  double settling_time_2pct = std::numeric_limits<double>::infinity();
};

/// Exact propagation with expm(Acl dt); the controller starts at rest.
SimResult simulate_closed_loop(const PlantRealization& plant, const ControllerRealization& k,
                               const Vector& x0, const Disturbance& w, double t_end, double dt);

/// Largest |x_i(t)| over states with allowed[i] == false.
double containment_leak(const SimResult& result, const std::vector<bool>& allowed);

/// First time after which max_i |x_i| stays within 2% of its overall peak.
double settling_time(const Vector& t, const Matrix& x, double fraction = 0.02);

/// (Re sum_l PhiX(l) e^{p_l t} x0, Re sum_l PhiU(l) e^{p_l t} x0) on the grid.
std::pair<Matrix, Matrix> impulse_response(const ResponseEnsemble& ensemble, const Vector& x0,
                                           const Vector& t);

struct StabilityReport {
  bool stable = false;
  double spectral_abscissa = 0.0;
  double peak_response = 0.0;  // largest entry of the delta_y / delta_u impulse responses
};

/// Augmented spectrum plus impulses injected at y = x + dy and u + du.
StabilityReport internal_stability_check(const PlantRealization& plant,
                                         const ControllerRealization& k,
                                         double t_end = 50.0, double dt = 0.05);

void write_csv(std::ostream& os, const SimResult& result);

}  // namespace ctsls
