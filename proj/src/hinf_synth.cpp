#include "ctsls/hinf_synth.hpp"

#include <chrono>
#include <cmath>
#include <string>

namespace ctsls {

namespace {

// Ctil columns (c * n + col, c = 0..K-1) generated by one column's variables.
Matrix column_output(const PoleSet& poles, const Matrix& Wj, const Eigen::Ref<const Vector>& x) {
  const Eigen::Index K = poles.size(), nv = Wj.cols();
  const Matrix Y = Wj * Eigen::Map<const Matrix>(x.data(), nv, K);
  Matrix out(Y.rows(), K);
  for (Eigen::Index k = 0; k < poles.num_pairs(); ++k) {
    out.col(2 * k) = Y.col(2 * k) - Y.col(2 * k + 1);
    out.col(2 * k + 1) = Y.col(2 * k) + Y.col(2 * k + 1);
  }
  for (Eigen::Index l = 2 * poles.num_pairs(); l < K; ++l) out.col(l) = Y.col(l);
  return out;
}

double min_eig(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Lower-left placement of a p x N block C in an (N + m + p) square, mirrored.
void add_output_block(std::vector<Eigen::Triplet<double>>& trip, Eigen::Index N, Eigen::Index m,
                      Eigen::Index row, Eigen::Index col, double v) {
  trip.emplace_back(N + m + row, col, v);
  trip.emplace_back(col, N + m + row, v);
}

}  // namespace

CMatrix StackedRealization::evaluate(Complex s) const {
  const Eigen::Index N = A.rows();
  CMatrix M = s * CMatrix::Identity(N, N) - A;
  return C * M.partialPivLu().solve(B);
}

StackedRealization stacked_realization(const ResponseEnsemble& ens, const CostWeights& w) {
  ens.validate();
  const Eigen::Index n = ens.num_states(), m = ens.num_inputs(), K = ens.poles.size();
  if (w.Q.rows() != n || w.R.rows() != m) throw InvalidArgument("weights do not match the ensemble");
  const CMatrix W = weight_root(w).cast<Complex>();
  StackedRealization s{CMatrix::Zero(n * K, n * K), CMatrix::Zero(n * K, n),
                       CMatrix::Zero(n + m, n * K)};
  for (Eigen::Index l = 0; l < K; ++l) {
    s.A.block(l * n, l * n, n, n).diagonal().setConstant(ens.poles[l]);
    s.B.block(l * n, 0, n, n).setIdentity();
    CMatrix stacked(n + m, n);
    stacked << ens.PhiX[size_t(l)], ens.PhiU[size_t(l)];
    s.C.middleCols(l * n, n) = W * stacked;
  }
  return s;
}

RealTransform real_transform(const PoleSet& poles, Eigen::Index n) {
  if (n < 1) throw InvalidArgument("n must be positive");
  const Eigen::Index K = poles.size();
  if (K == 0) throw InvalidArgument("pole set is empty");
  RealTransform rt;
  rt.n = n;
  rt.T = CMatrix::Zero(n * K, n * K);
  rt.A = Matrix::Zero(n * K, n * K);
  rt.B = Matrix::Zero(n * K, n);
  const Complex a(0.5, 0.5), b(0.5, -0.5);
  const Matrix I = Matrix::Identity(n, n);
  for (Eigen::Index k = 0; k < poles.num_pairs(); ++k) {
    const Eigen::Index o = 2 * k * n;
    const Complex p = poles[2 * k];
    rt.T.block(o, o, n, n).diagonal().setConstant(a);
    rt.T.block(o, o + n, n, n).diagonal().setConstant(b);
    rt.T.block(o + n, o, n, n).diagonal().setConstant(b);
    rt.T.block(o + n, o + n, n, n).diagonal().setConstant(a);
    rt.A.block(o, o, n, n) = p.real() * I;
    rt.A.block(o, o + n, n, n) = p.imag() * I;
    rt.A.block(o + n, o, n, n) = -p.imag() * I;
    rt.A.block(o + n, o + n, n, n) = p.real() * I;
  }
  for (Eigen::Index l = 2 * poles.num_pairs(); l < K; ++l) {
    rt.T.block(l * n, l * n, n, n).setIdentity();
    rt.A.block(l * n, l * n, n, n) = poles[l].real() * I;
  }
  for (Eigen::Index l = 0; l < K; ++l) rt.B.block(l * n, 0, n, n) = I;
  return rt;
}

Matrix transform_output(const RealTransform& rt, const CMatrix& Ccal) {
  if (Ccal.cols() != rt.T.rows()) throw InvalidArgument("output matrix has the wrong width");
  const CMatrix C = Ccal * rt.T;
  const double scale = 1.0 + C.cwiseAbs().maxCoeff();
  if (C.imag().cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw InvalidArgument("transformed output is not real; the ensemble violates conjugacy");
  }
  return C.real();
}

StateSpace real_realization(const ResponseEnsemble& ens, const CostWeights& w) {
  const StackedRealization s = stacked_realization(ens, w);
  const RealTransform rt = real_transform(ens.poles, ens.num_states());
  return {rt.A, rt.B, transform_output(rt, s.C)};
}

double lmi_epsilon(const Eigen::Ref<const Matrix>& A) {
  Eigen::JacobiSVD<Matrix> svd(A);
  return 1e-7 * (1.0 + (svd.singularValues().size() ? svd.singularValues()(0) : 0.0));
}

KypResult kyp_check(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                    const Eigen::Ref<const Matrix>& C, double gamma, const SdpOptions& options) {
  require_square(A, "A");
  const Eigen::Index N = A.rows(), m = B.cols(), p = C.rows();
  if (B.rows() != N || C.cols() != N) throw InvalidArgument("kyp_check: inconsistent dimensions");
  KypResult out;
  if (!(gamma > 0)) {
    out.diagnostic = "gamma must be positive";
    return out;
  }
  if (!is_hurwitz(A)) {
    out.diagnostic = "A is not Hurwitz; the LMI cannot hold";
    return out;
  }
  const double eps = lmi_epsilon(A);
  const Eigen::Index L = N + m + p;

  StructuredSdp sdp;
  Matrix C1 = Matrix::Zero(L, L);
  C1.block(N, N, m, m).diagonal().setConstant(gamma);
  C1.block(N + m, N + m, p, p).diagonal().setConstant(gamma);
  C1.block(N + m, 0, p, N) = -C;
  C1.block(0, N + m, N, p) = -C.transpose();
  sdp.C = {C1, Matrix::Zero(N, N), Matrix::Ones(1, 1)};
  sdp.x_dim = N;
  Matrix L1 = Matrix::Zero(N, L), R1 = Matrix::Zero(N, L);
  L1.leftCols(N).setIdentity();
  R1.leftCols(N) = A;
  R1.middleCols(N, m) = B;
  sdp.x_terms.push_back({0, L1, R1});
  sdp.x_terms.push_back({1, Matrix::Identity(N, N), -0.5 * Matrix::Identity(N, N)});
  std::vector<SparseMatrix> t(3);
  for (Eigen::Index k = 0; k < 3; ++k) {
    const Eigen::Index sz = sdp.C[size_t(k)].rows();
    t[size_t(k)].resize(sz, sz);
    t[size_t(k)].setIdentity();
  }
  sdp.free.push_back(t);
  sdp.b = Vector::Zero(sdp.num_y());
  sdp.b(sdp.num_x()) = 1.0;

  const SdpResult r = solve_sdp(sdp, options);
  const double tstar = r.y(sdp.num_x());
  out.X = r.X(N);
  // Margins recomputed from the returned X.
  const double lmi = min_eig(sdp.C[0] - sdp.apply_adjoint(r.y)[0] + tstar * Matrix::Identity(L, L));
  out.margin = std::min(lmi, min_eig(out.X));
  out.feasible = out.margin >= eps &&
                 (r.status == SdpStatus::Optimal || r.status == SdpStatus::NearOptimal ||
                  out.margin > 10 * eps);
  out.diagnostic = "sdp " + to_string(r.status) + ", margin " + std::to_string(out.margin);
  return out;
}

double kyp_bisection(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                     const Eigen::Ref<const Matrix>& C, double rel_tol) {
  if (!is_hurwitz(A)) throw DomainError("kyp_bisection: A is not Hurwitz");
  double hi = std::max(1.0, C.norm() * B.norm());
  int guard = 0;
  while (!kyp_check(A, B, C, hi).feasible) {
    hi *= 2.0;
    if (++guard > 60) throw SolverError("kyp_bisection: no feasible level");
  }
  double lo = 0.0;
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (kyp_check(A, B, C, mid).feasible) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

SynthesisResult synth_hinf(const PlantRealization& plant, const CostWeights& weights,
                           const PoleSet& poles, const SparsityMask* mask,
                           const SynthesisOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::Index n = plant.num_states(), m = plant.num_inputs(), K = poles.size();
  if (weights.Q.rows() != n || weights.R.rows() != m) {
    throw InvalidArgument("weights do not match the plant");
  }
  const Eigen::Index N = n * K, p = n + m, L = N + n + p;
  const ConstraintSystem sys = assemble(plant, poles, mask);
  const RealTransform rt = real_transform(poles, n);
  const Matrix Wroot = weight_root(weights);
  const double eps = lmi_epsilon(rt.A);

  // Per column: x = x0 + Zr xi, with Zr restricted to directions that move Ctil.
  std::vector<Vector> x0(static_cast<size_t>(n));
  std::vector<Matrix> Zr(static_cast<size_t>(n));
  Matrix C0 = Matrix::Zero(p, N);
  StructuredSdp sdp;
  bool reduced = false;
  for (size_t bi = 0; bi < sys.blocks.size(); ++bi) {
    const ColumnBlock& blk = sys.blocks[bi];
    const AffineSolutionSet aff = solve_affine(blk, options.feasibility_tol);
    const Matrix Wj = column_weight(Wroot, n, blk);
    x0[bi] = aff.x0;
    const Matrix c0 = column_output(poles, Wj, aff.x0);
    for (Eigen::Index c = 0; c < K; ++c) C0.col(c * n + blk.col) = c0.col(c);
    if (aff.Z.cols() == 0) {
      Zr[bi] = Matrix::Zero(aff.Z.rows(), 0);
      continue;
    }
    Matrix Mj(p * K, aff.Z.cols());
    for (Eigen::Index q = 0; q < aff.Z.cols(); ++q) {
      const Matrix cq = column_output(poles, Wj, aff.Z.col(q));
      Mj.col(q) = Eigen::Map<const Vector>(cq.data(), p * K);
    }
    Eigen::JacobiSVD<Matrix> svd(Mj, Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    Eigen::Index r = 0;
    while (r < sv.size() && sv(r) > 1e-10 * std::max(1.0, sv(0))) ++r;
    if (r < aff.Z.cols()) reduced = true;
    // Scaled so every free direction moves Ctil by a unit amount.
    Zr[bi] = aff.Z * svd.matrixV().leftCols(r) * sv.head(r).cwiseInverse().asDiagonal();
    for (Eigen::Index q = 0; q < r; ++q) {
      const Matrix cq = column_output(poles, Wj, Zr[bi].col(q));
      std::vector<Eigen::Triplet<double>> trip;
      for (Eigen::Index c = 0; c < K; ++c) {
        for (Eigen::Index i = 0; i < p; ++i) {
          if (cq(i, c) != 0.0) add_output_block(trip, N, n, i, c * n + blk.col, cq(i, c));
        }
      }
      SparseMatrix F(L, L);
      F.setFromTriplets(trip.begin(), trip.end());
      sdp.free.push_back({F, SparseMatrix()});
    }
  }
  Matrix C1 = -eps * Matrix::Identity(L, L);
  C1.block(N + n, 0, p, N) -= C0;
  C1.block(0, N + n, N, p) -= C0.transpose();
  sdp.C = {C1, -eps * Matrix::Identity(N, N)};
  sdp.x_dim = N;
  Matrix L1 = Matrix::Zero(N, L), R1 = Matrix::Zero(N, L);
  L1.leftCols(N).setIdentity();
  R1.leftCols(N) = rt.A;
  R1.middleCols(N, n) = rt.B;
  sdp.x_terms.push_back({0, L1, R1});
  sdp.x_terms.push_back({1, Matrix::Identity(N, N), -0.5 * Matrix::Identity(N, N)});
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index i = N; i < L; ++i) trip.emplace_back(i, i, -1.0);
    SparseMatrix F(L, L);
    F.setFromTriplets(trip.begin(), trip.end());
    sdp.free.push_back({F, SparseMatrix()});
  }
  sdp.b = Vector::Zero(sdp.num_y());
  sdp.b(sdp.num_y() - 1) = -1.0;

  SdpOptions so;
  so.tol = options.sdp_tol;
  so.max_iter = options.sdp_max_iter;
  so.verbose = options.verbose;
  const SdpResult r = solve_sdp(sdp, so);
  if (r.status != SdpStatus::Optimal && r.status != SdpStatus::NearOptimal) {
    throw SolverError("H-infinity SDP did not converge: " + to_string(r.status) + " after " +
                      std::to_string(r.iterations) + " iterations (gap " +
                      std::to_string(r.relative_gap) + ", pinf " +
                      std::to_string(r.primal_infeasibility) + ", dinf " +
                      std::to_string(r.dual_infeasibility) + ")");
  }

  std::vector<Vector> x(sys.blocks.size());
  Eigen::Index off = sdp.num_x();
  for (size_t bi = 0; bi < sys.blocks.size(); ++bi) {
    const Eigen::Index k = Zr[bi].cols();
    x[bi] = x0[bi] + Zr[bi] * r.y.segment(off, k);
    off += k;
  }

  SynthesisResult res;
  res.ensemble = sys.reconstruct(x);
  res.has_gamma = true;
  res.gamma = r.y(sdp.num_y() - 1);
  res.X = r.X(N);
  res.X_min_eig = min_eig(res.X);
  res.lmi_margin = std::min(eps + min_eig(r.S[0]), res.X_min_eig);
  res.norm = hinf_norm_ss(real_realization(res.ensemble, weights), 1e-9);
  res.residual = residual(res.ensemble, plant, random_samples(poles, 100));
  double kp = 0.0;
  for (size_t bi = 0; bi < sys.blocks.size(); ++bi) {
    kp = std::max(kp, (sys.blocks[bi].E * x[bi] - sys.blocks[bi].b).norm());
  }
  res.kkt_primal = kp;
  res.status = to_string(r.status);
  if (reduced) res.status += " (objective-invariant directions fixed)";
  res.solve_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace ctsls
