#include "ctsls/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "ctsls/hinf_synth.hpp"

namespace ctsls {

namespace {

void require_hurwitz(const Matrix& A, const char* who) {
  const double a = spectral_abscissa(A);
  if (!(a < 0.0)) {
    throw DomainError(std::string(who) + ": A is not Hurwitz (spectral abscissa " +
                      std::to_string(a) + ")");
  }
}

// Newton iteration for sign(H) with Frobenius-norm scaling.
bool matrix_sign(const Matrix& H, Matrix& S) {
  S = H;
  bool scale = true;
  double prev = INFINITY;
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<Matrix> lu(S);
    const double rc = lu.rcond();
    if (!(rc > 1e-14)) return false;
    const Matrix Si = lu.inverse();
    double c = 1.0;
    if (scale) c = std::sqrt(Si.norm() / S.norm());
    Matrix next = 0.5 * (c * S + Si / c);
    const double diff = (next - S).lpNorm<1>();
    const double size = next.lpNorm<1>();
    S = std::move(next);
    if (diff <= 1e-2 * size) scale = false;
    if (diff <= 1e-13 * size) return true;
    // near-imaginary eigenvalues leave a rounding floor above 1e-13; callers
    // check the Riccati residual anyway
    if (!scale && diff <= 1e-8 * size && diff >= 0.5 * prev) return true;
    if (!scale) prev = diff;
  }
  return false;
}

// Stable Lagrangian subspace [I; P] of a Hamiltonian [[A, G], [-Q, -A^T]].
bool hamiltonian_riccati(const Matrix& H, Matrix& P) {
  const Eigen::Index n = H.rows() / 2;
  Matrix S;
  if (!matrix_sign(H, S)) return false;
  Matrix lhs(2 * n, n), rhs(2 * n, n);
  lhs << S.topRightCorner(n, n), S.bottomRightCorner(n, n) + Matrix::Identity(n, n);
  rhs << S.topLeftCorner(n, n) + Matrix::Identity(n, n), S.bottomLeftCorner(n, n);
  Eigen::ColPivHouseholderQR<Matrix> qr(lhs);
  if (qr.rank() < n) return false;
  P = -qr.solve(rhs);
  P = 0.5 * (P + P.transpose());
  return P.allFinite();
}

bool has_imaginary_eigenvalue(const Matrix& H, double rel) {
  Eigen::EigenSolver<Matrix> es(H, false);
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (std::abs(es.eigenvalues()(i).real()) <= rel * scale) return true;
  }
  return false;
}

double care_residual(const Matrix& A, const Matrix& BRB, const Matrix& Q, const Matrix& P) {
  return (A.transpose() * P + P * A - P * BRB * P + Q).norm();
}

Matrix bass_gain(const Matrix& A, const Matrix& B) {
  const Eigen::Index n = A.rows();
  const double beta = A.lpNorm<1>() + 1.0;
  const Matrix As = -(A + beta * Matrix::Identity(n, n));
  const Matrix Z = lyapunov(As, -2.0 * B * B.transpose());
  Eigen::LLT<Matrix> llt(0.5 * (Z + Z.transpose()));
  if (llt.info() != Eigen::Success) {
    throw SolverError("no stabilizing warm start: (A, B) is not controllable");
  }
  return B.transpose() * llt.solve(Matrix::Identity(n, n));
}

}  // namespace

void StateSpace::validate() const {
  require_square(A, "A");
  if (B.rows() != A.rows() || C.cols() != A.rows()) {
    throw InvalidArgument("state-space dimensions are inconsistent");
  }
}

CMatrix StateSpace::evaluate(Complex s) const {
  validate();
  const Eigen::Index n = A.rows();
  CMatrix M = s * CMatrix::Identity(n, n) - A.cast<Complex>();
  return C.cast<Complex>() * M.partialPivLu().solve(B.cast<Complex>());
}

Matrix lyapunov(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& W,
                LyapunovMethod method) {
  require_square(A, "A");
  const Eigen::Index n = A.rows();
  if (W.rows() != n || W.cols() != n) throw InvalidArgument("lyapunov: W has the wrong size");
  if (method == LyapunovMethod::Auto) {
    method = n <= 40 ? LyapunovMethod::Kronecker : LyapunovMethod::Schur;
  }
  Matrix P(n, n);
  if (method == LyapunovMethod::Kronecker) {
    const Matrix I = Matrix::Identity(n, n);
    Matrix L = Matrix::Zero(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        L.block(i * n, j * n, n, n) += A(i, j) * I;  // A (x) I
        if (i == j) L.block(i * n, i * n, n, n) += A;  // I (x) A
      }
    }
    const Vector w = Eigen::Map<const Vector>(Matrix(W).data(), n * n);
    Eigen::PartialPivLU<Matrix> lu(L);
    const Vector p = lu.solve(-w);
    P = Eigen::Map<const Matrix>(p.data(), n, n);
  } else {
    Eigen::ComplexSchur<Matrix> schur(A);
    const CMatrix& T = schur.matrixT();
    const CMatrix& U = schur.matrixU();
    CMatrix C = -(U.adjoint() * W.cast<Complex>() * U);
    CMatrix Y(n, n);
    // T Y + Y T^H = C, columns from the last one backwards.
    for (Eigen::Index k = n - 1; k >= 0; --k) {
      CVector rhs = C.col(k);
      for (Eigen::Index j = k + 1; j < n; ++j) rhs -= std::conj(T(k, j)) * Y.col(j);
      CMatrix Tk = T;
      Tk.diagonal().array() += std::conj(T(k, k));
      Y.col(k) = Tk.triangularView<Eigen::Upper>().solve(rhs);
    }
    P = (U * Y * U.adjoint()).real();
  }
  return 0.5 * (P + P.transpose());
}

double h2_norm_ss(const StateSpace& sys) {
  sys.validate();
  require_hurwitz(sys.A, "h2_norm_ss");
  if (sys.B.size() == 0 || sys.C.size() == 0) return 0.0;
  const Matrix P = lyapunov(sys.A, sys.B * sys.B.transpose());
  return std::sqrt(std::max((sys.C * P * sys.C.transpose()).trace(), 0.0));
}

Vector sigma_max_sweep(const StateSpace& sys, const Eigen::Ref<const Vector>& omega) {
  sys.validate();
  Eigen::ComplexSchur<Matrix> schur(sys.A);
  const CMatrix& T = schur.matrixT();
  const CMatrix UB = schur.matrixU().adjoint() * sys.B.cast<Complex>();
  const CMatrix CU = sys.C.cast<Complex>() * schur.matrixU();
  Vector out(omega.size());
  for (Eigen::Index i = 0; i < omega.size(); ++i) {
    CMatrix M = -T;
    M.diagonal().array() += Complex(0.0, omega(i));
    const CMatrix G = CU * M.triangularView<Eigen::Upper>().solve(UB);
    Eigen::JacobiSVD<CMatrix> svd(G);
    out(i) = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  }
  return out;
}

HinfNorm hinf_norm_bounds(const StateSpace& sys, double tol) {
  sys.validate();
  require_hurwitz(sys.A, "hinf_norm_ss");
  HinfNorm r;
  if (sys.B.size() == 0 || sys.C.size() == 0 || sys.B.isZero(0) || sys.C.isZero(0)) return r;

  Vector omega(2001);
  omega(0) = 0.0;
  for (int i = 0; i < 2000; ++i) omega(i + 1) = std::pow(10.0, -3.0 + 6.0 * i / 1999.0);
  const Vector sig = sigma_max_sweep(sys, omega);
  Eigen::Index arg;
  r.sweep_max = sig.maxCoeff(&arg);
  r.peak_frequency = omega(arg);
  double lb = r.sweep_max;

  const Eigen::Index n = sys.A.rows();
  const Matrix BB = sys.B * sys.B.transpose();
  const Matrix CC = sys.C.transpose() * sys.C;
  double ub = 0.0;
  for (int it = 0; it < 60; ++it) {
    const double g = lb * (1.0 + 2.0 * tol) + tol;
    Matrix H(2 * n, 2 * n);
    H << sys.A, BB / g, -CC / g, -sys.A.transpose();
    Eigen::EigenSolver<Matrix> es(H, false);
    std::vector<double> w;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      const Complex l = es.eigenvalues()(i);
      if (l.imag() >= 0.0 && std::abs(l.real()) <= 1e-7 * (1.0 + std::abs(l))) {
        w.push_back(l.imag());
      }
    }
    if (w.empty()) {
      ub = g;
      break;
    }
    std::sort(w.begin(), w.end());
    std::vector<double> cand(w);
    for (size_t i = 0; i + 1 < w.size(); ++i) cand.push_back(0.5 * (w[i] + w[i + 1]));
    const Vector cw = Eigen::Map<const Vector>(cand.data(), Eigen::Index(cand.size()));
    const Vector cs = sigma_max_sweep(sys, cw);
    Eigen::Index k;
    const double best = cs.maxCoeff(&k);
    if (best <= lb || best < g * (1.0 - 1e-6)) {
      // only near-axis eigenvalues with no gain behind them
      if (best > lb) {
        lb = best;
        r.peak_frequency = cw(k);
      }
      ub = lb * (1.0 + 2.0 * tol) + tol;
      break;
    }
    lb = best;
    r.peak_frequency = cw(k);
  }
  if (ub == 0.0) throw SolverError("hinf_norm_ss: peak search did not converge");
  r.value = r.lower = lb;
  r.upper = ub;
  return r;
}

StateSpace realize_pole_residue(const PoleResidueModel& model) {
  if (model.poles.empty() || model.poles.size() != model.residues.size()) {
    throw InvalidArgument("pole/residue lists must be nonempty and of equal length");
  }
  const Eigen::Index p = model.residues[0].rows(), c = model.residues[0].cols();
  const size_t K = model.poles.size();
  std::vector<bool> used(K, false);
  std::vector<Matrix> Ablocks, Cblocks;
  for (size_t i = 0; i < K; ++i) {
    if (used[i]) continue;
    const Complex q = model.poles[i];
    const CMatrix& R = model.residues[i];
    const double scale = 1.0 + std::abs(q);
    if (std::abs(q.imag()) <= 1e-12 * scale) {
      if (R.imag().cwiseAbs().maxCoeff() > 1e-9 * (1.0 + R.cwiseAbs().maxCoeff())) {
        throw InvalidArgument("real pole with a complex residue");
      }
      used[i] = true;
      Ablocks.push_back(q.real() * Matrix::Identity(c, c));
      Cblocks.push_back(R.real());
      continue;
    }
    size_t mate = K;
    for (size_t j = i + 1; j < K; ++j) {
      if (!used[j] && std::abs(model.poles[j] - std::conj(q)) <= 1e-9 * scale) {
        mate = j;
        break;
      }
    }
    if (mate == K) throw InvalidArgument("pole/residue model is not conjugate-closed");
    if ((model.residues[mate] - R.conjugate()).cwiseAbs().maxCoeff() >
        1e-9 * (1.0 + R.cwiseAbs().maxCoeff())) {
      throw InvalidArgument("residues of conjugate poles must be conjugate");
    }
    used[i] = used[mate] = true;
    const Complex lead = q.imag() > 0 ? q : model.poles[mate];
    const CMatrix& Rl = q.imag() > 0 ? R : model.residues[mate];
    Matrix Ab(2 * c, 2 * c);
    const Matrix I = Matrix::Identity(c, c);
    Ab << lead.real() * I, lead.imag() * I, -lead.imag() * I, lead.real() * I;
    Matrix Cb(p, 2 * c);
    Cb << Rl.real() - Rl.imag(), Rl.real() + Rl.imag();
    Ablocks.push_back(Ab);
    Cblocks.push_back(Cb);
  }
  Eigen::Index N = 0;
  for (const auto& a : Ablocks) N += a.rows();
  StateSpace sys{Matrix::Zero(N, N), Matrix::Zero(N, c), Matrix::Zero(p, N)};
  Eigen::Index off = 0;
  for (size_t b = 0; b < Ablocks.size(); ++b) {
    const Eigen::Index s = Ablocks[b].rows();
    sys.A.block(off, off, s, s) = Ablocks[b];
    sys.C.middleCols(off, s) = Cblocks[b];
    for (Eigen::Index k = 0; k < s; k += c) sys.B.block(off + k, 0, c, c).setIdentity();
    off += s;
  }
  return sys;
}

CareSolution care(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                  const Eigen::Ref<const Matrix>& Q, const Eigen::Ref<const Matrix>& R) {
  require_square(A, "A");
  const Eigen::Index n = A.rows();
  if (B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols()) {
    throw InvalidArgument("care: inconsistent dimensions");
  }
  Eigen::LLT<Matrix> Rllt(R);
  if (Rllt.info() != Eigen::Success) throw InvalidArgument("care: R must be positive definite");
  const Matrix RiBt = Rllt.solve(B.transpose());
  const Matrix BRB = B * RiBt;
  const double qn = Q.norm();
  const double target = qn > 0 ? 1e-9 * qn : 1e-12;

  CareSolution sol;
  Matrix P;
  Matrix H(2 * n, 2 * n);
  H << A, -BRB, -Q, -A.transpose();
  bool warm = hamiltonian_riccati(H, P) && is_hurwitz(A - BRB * P);
  Matrix K;
  if (warm) {
    K = RiBt * P;
  } else {
    K = bass_gain(A, B);
    if (!is_hurwitz(A - B * K)) throw SolverError("care: no stabilizing warm start found");
    P = Matrix::Zero(n, n);
  }
  double res = warm ? care_residual(A, BRB, Q, P) : INFINITY;
  int it = 0;
  while (!(res <= target)) {
    if (++it > 100) {
      throw SolverError("care: Newton-Kleinman stagnated, residual " + std::to_string(res));
    }
    const Matrix Ac = A - B * K;
    P = lyapunov(Ac.transpose(), Q + K.transpose() * R * K);
    K = RiBt * P;
    res = care_residual(A, BRB, Q, P);
    if (it > 1 && !is_hurwitz(A - B * K)) throw SolverError("care: iteration lost stability");
  }
  sol.P = P;
  sol.K = K;
  sol.iterations = it;
  sol.residual = res;
  return sol;
}

LqrBaseline lqr_baseline(const PlantRealization& plant, const CostWeights& w) {
  const Eigen::Index n = plant.num_states();
  if (w.Q.rows() != n || w.R.rows() != plant.num_inputs()) {
    throw InvalidArgument("weights do not match the plant");
  }
  if (!is_stabilizable(plant)) throw InvalidArgument("lqr_baseline: (A, B) is not stabilizable");
  const Matrix Qh = psd_sqrt(w.Q);
  if (!is_detectable(plant.A(), Qh)) {
    throw InvalidArgument("lqr_baseline: (Q^{1/2}, A) is not detectable");
  }
  const CareSolution c = care(plant.A(), plant.B(), w.Q, w.R);
  LqrBaseline out;
  out.K = c.K;
  out.P = c.P;
  out.iterations = c.iterations;
  out.residual = c.residual;
  StateSpace cl;
  cl.A = plant.A() - plant.B() * c.K;
  cl.B = Matrix::Identity(n, n);
  cl.C.resize(n + plant.num_inputs(), n);
  cl.C << Qh, -psd_sqrt(w.R) * c.K;
  out.h2_cost = h2_norm_ss(cl);
  return out;
}

bool hinf_riccati_feasible(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                           const Eigen::Ref<const Matrix>& Q, const Eigen::Ref<const Matrix>& R,
                           double gamma, Matrix* Pout) {
  if (!(gamma > 0)) return false;
  const Eigen::Index n = A.rows();
  const Matrix G = Matrix::Identity(n, n) / (gamma * gamma) - B * R.llt().solve(B.transpose());
  Matrix H(2 * n, 2 * n);
  H << A, G, -Q, -A.transpose();
  if (has_imaginary_eigenvalue(H, 1e-9)) return false;
  Matrix P;
  if (!hamiltonian_riccati(H, P)) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(P, Eigen::EigenvaluesOnly);
  const double pn = std::max(1.0, P.norm());
  if (es.eigenvalues().minCoeff() < -1e-8 * pn) return false;
  const double res = (A.transpose() * P + P * A + P * G * P + Q).norm();
  if (res > 1e-6 * std::max(1.0, Q.norm()) * pn) return false;
  if (!is_hurwitz(A + G * P)) return false;
  if (Pout) *Pout = P;
  return true;
}

double hinf_riccati_bisection(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                              const Eigen::Ref<const Matrix>& Q, const Eigen::Ref<const Matrix>& R,
                              double rel_tol) {
  double hi = 1.0;
  int guard = 0;
  while (!hinf_riccati_feasible(A, B, Q, R, hi)) {
    hi *= 2.0;
    if (++guard > 60) throw SolverError("H-infinity Riccati bisection: no feasible level found");
  }
  double lo = hi / 2.0;
  guard = 0;
  while (hinf_riccati_feasible(A, B, Q, R, lo)) {
    hi = lo;
    lo /= 2.0;
    if (++guard > 200) return 0.0;
  }
  while (hi - lo > rel_tol * hi) {
    const double mid = std::sqrt(lo * hi);
    if (hinf_riccati_feasible(A, B, Q, R, mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double hinf_baseline(const PlantRealization& plant, const CostWeights& w,
                     const HinfBaselineOptions& options) {
  if (w.Q.rows() != plant.num_states() || w.R.rows() != plant.num_inputs()) {
    throw InvalidArgument("weights do not match the plant");
  }
  if (!is_stabilizable(plant)) throw InvalidArgument("hinf_baseline: (A, B) is not stabilizable");
  if (options.method == HinfBaselineMethod::Sls) {
    const SynthesisResult r = synth_hinf(plant, w, spiral_poles(options.sls_poles));
    return r.gamma;
  }
  return hinf_riccati_bisection(plant.A(), plant.B(), w.Q, w.R, options.rel_tol);
}

}  // namespace ctsls
