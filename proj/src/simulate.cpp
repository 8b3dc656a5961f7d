#include "ctsls/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "ctsls/hinf_synth.hpp"

namespace ctsls {

CMatrix ControllerRealization::evaluate(Complex s) const {
  if (Ak.rows() == 0) return Dk.cast<Complex>();
  const CMatrix M = s * CMatrix::Identity(Ak.rows(), Ak.cols()) - Ak.cast<Complex>();
  return Ck.cast<Complex>() * M.partialPivLu().solve(Bk.cast<Complex>()) + Dk.cast<Complex>();
}

ControllerRealization realize_controller(const ResponseEnsemble& ens, double tol) {
  ens.validate();
  const Eigen::Index n = ens.num_states(), m = ens.num_inputs(), K = ens.poles.size();
  CMatrix sum = CMatrix::Zero(n, n);
  for (const auto& P : ens.PhiX) sum += P;
  const double sum_err = (sum - CMatrix::Identity(n, n)).norm();
  if (sum_err > tol) {
    throw InvalidArgument("sum of PhiX residues differs from I by " + std::to_string(sum_err));
  }
  if (ens.conjugacy_error() > tol) throw InvalidArgument("ensemble is not conjugate-closed");

  // I - s Phi_x = sum -p_l PhiX(l) / (s - p_l),  s Phi_u = D + sum p_l PhiU(l) / (s - p_l)
  CMatrix C1(n, n * K), C2(m, n * K);
  CMatrix D = CMatrix::Zero(m, n);
  for (Eigen::Index l = 0; l < K; ++l) {
    C1.middleCols(l * n, n) = -ens.poles[l] * ens.PhiX[size_t(l)];
    C2.middleCols(l * n, n) = ens.poles[l] * ens.PhiU[size_t(l)];
    D += ens.PhiU[size_t(l)];
  }
  const RealTransform rt = real_transform(ens.poles, n);
  const Matrix G1 = transform_output(rt, C1);
  const Matrix G2 = transform_output(rt, C2);
  const Matrix Dr = D.real();

  const Matrix A = rt.A + rt.B * G1;
  const Matrix C = G2 + Dr * G1;

  // Unobservable kernel of (C, A) at s = 0.
  Matrix stacked(A.rows() + C.rows(), A.cols());
  stacked << A, C;
  Eigen::JacobiSVD<Matrix> svd(stacked, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double thresh = 1e-9 * std::max(1.0, sv.size() ? sv(0) : 0.0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > thresh) ++rank;
  const Matrix Vo = svd.matrixV().leftCols(rank);

  ControllerRealization k;
  k.Ak = Vo.transpose() * A * Vo;
  k.Bk = Vo.transpose() * rt.B;
  k.Ck = C * Vo;
  k.Dk = Dr;
  k.removed_modes = A.cols() - rank;
  return k;
}

ControllerRealization realize_controller(const ResponseEnsemble& ens,
                                         const PlantRealization& plant, double tol) {
  if (ens.num_states() != plant.num_states() || ens.num_inputs() != plant.num_inputs()) {
    throw InvalidArgument("ensemble and plant dimensions differ");
  }
  const double res = residual(ens, plant, random_samples(ens.poles, 100));
  if (res > tol) {
    throw InfeasibleError("ensemble residual " + std::to_string(res) +
                          " too large to realize a controller");
  }
  return realize_controller(ens, tol);
}

Matrix closed_loop_matrix(const PlantRealization& plant, const ControllerRealization& k) {
  const Eigen::Index n = plant.num_states(), r = k.order();
  if (k.Dk.rows() != plant.num_inputs() || k.Dk.cols() != n) {
    throw InvalidArgument("controller does not match the plant");
  }
  Matrix Acl(n + r, n + r);
  Acl.topLeftCorner(n, n) = plant.A() + plant.B() * k.Dk;
  Acl.topRightCorner(n, r) = plant.B() * k.Ck;
  Acl.bottomLeftCorner(r, n) = k.Bk;
  Acl.bottomRightCorner(r, r) = k.Ak;
  return Acl;
}

double settling_time(const Vector& t, const Matrix& x, double fraction) {
  if (t.size() == 0) return std::numeric_limits<double>::infinity();
  const Vector mag = x.cwiseAbs().rowwise().maxCoeff();
  const double peak = mag.maxCoeff();
  if (peak == 0.0) return 0.0;
  const double band = fraction * peak;
  Eigen::Index last = -1;
  for (Eigen::Index i = mag.size() - 1; i >= 0; --i) {
    if (mag(i) > band) {
      last = i;
      break;
    }
  }
  if (last < 0) return t(0);
  if (last == mag.size() - 1) return std::numeric_limits<double>::infinity();
  return t(last + 1);
}

SimResult simulate_closed_loop(const PlantRealization& plant, const ControllerRealization& k,
                               const Vector& x0, const Disturbance& w, double t_end,
                               double dt) {
  if (!(dt > 0) || !(t_end >= 0)) throw InvalidArgument("need dt > 0 and t_end >= 0");
  const Eigen::Index n = plant.num_states(), r = k.order();
  if (x0.size() != n) throw InvalidArgument("x0 has the wrong length");
  if (w.impulse.size() != 0 && w.impulse.size() != n) {
    throw InvalidArgument("disturbance impulse has the wrong length");
  }
  const Matrix Acl = closed_loop_matrix(plant, k);
  const Matrix Ad = expm(Acl * dt);
  const auto steps = Eigen::Index(std::llround(t_end / dt));

  SimResult res;
  res.spectral_abscissa = spectral_abscissa(Acl);
  res.stable = res.spectral_abscissa < 0;
  res.t = Vector::LinSpaced(steps + 1, 0.0, double(steps) * dt);
  res.x.resize(steps + 1, n);
  res.u.resize(steps + 1, plant.num_inputs());

  Vector z = Vector::Zero(n + r);
  z.head(n) = x0;
  if (w.impulse.size()) z.head(n) += w.impulse;
  Matrix Cu(plant.num_inputs(), n + r);
  Cu << k.Dk, k.Ck;
  for (Eigen::Index i = 0; i <= steps; ++i) {
    res.x.row(i) = z.head(n).transpose();
    res.u.row(i) = (Cu * z).transpose();
    if (i < steps) z = Ad * z;
  }

  const auto& sub = plant.state_subsystems();
  const int nsub = sub.empty() ? 0 : *std::max_element(sub.begin(), sub.end()) + 1;
  res.subsystem_peak.assign(size_t(nsub), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double& p = res.subsystem_peak[size_t(sub[size_t(i)])];
    p = std::max(p, res.x.col(i).cwiseAbs().maxCoeff());
  }
  res.settling_time_2pct = settling_time(res.t, res.x);
  return res;
}

double containment_leak(const SimResult& result, const std::vector<bool>& allowed) {
  if (Eigen::Index(allowed.size()) != result.x.cols()) {
    throw InvalidArgument("allowed pattern has the wrong length");
  }
  double leak = 0.0;
  for (Eigen::Index i = 0; i < result.x.cols(); ++i) {
    if (!allowed[size_t(i)]) leak = std::max(leak, result.x.col(i).cwiseAbs().maxCoeff());
  }
  return leak;
}

std::pair<Matrix, Matrix> impulse_response(const ResponseEnsemble& ens, const Vector& x0,
                                           const Vector& t) {
  ens.validate();
  const Eigen::Index K = ens.poles.size();
  CMatrix X = CMatrix::Zero(t.size(), ens.num_states());
  CMatrix U = CMatrix::Zero(t.size(), ens.num_inputs());
  const CVector x0c = x0.cast<Complex>();
  for (Eigen::Index l = 0; l < K; ++l) {
    const CVector ax = ens.PhiX[size_t(l)] * x0c;
    const CVector au = ens.PhiU[size_t(l)] * x0c;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const Complex e = std::exp(ens.poles[l] * t(i));
      X.row(i) += e * ax.transpose();
      U.row(i) += e * au.transpose();
    }
  }
  return {X.real(), U.real()};
}

StabilityReport internal_stability_check(const PlantRealization& plant,
                                         const ControllerRealization& k, double t_end,
                                         double dt) {
  StabilityReport rep;
  const Matrix Acl = closed_loop_matrix(plant, k);
  rep.spectral_abscissa = spectral_abscissa(Acl);
  const Eigen::Index n = plant.num_states(), m = plant.num_inputs(), r = k.order();

  // dy enters the controller and the static gain, du enters the plant.
  Matrix Bd(n + r, n + m);
  Bd.topLeftCorner(n, n) = plant.B() * k.Dk;
  Bd.bottomLeftCorner(r, n) = k.Bk;
  Bd.topRightCorner(n, m) = plant.B();
  Bd.bottomRightCorner(r, m).setZero();
  const Matrix Ad = expm(Acl * dt);
  Matrix Z = Bd;
  const auto steps = Eigen::Index(std::llround(t_end / dt));
  double peak = Z.cwiseAbs().maxCoeff(), tail = 0.0;
  for (Eigen::Index i = 0; i < steps; ++i) {
    Z = Ad * Z;
    tail = Z.cwiseAbs().maxCoeff();
    peak = std::max(peak, tail);
    if (!std::isfinite(tail)) break;
  }
  rep.peak_response = peak;
  rep.stable = rep.spectral_abscissa < 0 && std::isfinite(peak) && tail <= peak;
  return rep;
}

void write_csv(std::ostream& os, const SimResult& result) {
  os << "t";
  for (Eigen::Index i = 0; i < result.x.cols(); ++i) os << ",x" << i + 1;
  for (Eigen::Index i = 0; i < result.u.cols(); ++i) os << ",u" << i + 1;
  os << '\n';
  const auto old = os.precision(17);
  for (Eigen::Index k = 0; k < result.t.size(); ++k) {
    os << result.t(k);
    for (Eigen::Index i = 0; i < result.x.cols(); ++i) os << ',' << result.x(k, i);
    for (Eigen::Index i = 0; i < result.u.cols(); ++i) os << ',' << result.u(k, i);
    os << '\n';
  }
  os.precision(old);
}

}  // namespace ctsls
