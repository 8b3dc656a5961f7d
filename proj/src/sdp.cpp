#include "ctsls/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace ctsls {

namespace {

Matrix sym(const Matrix& W) { return 0.5 * (W + W.transpose()); }

double inner(const std::vector<Matrix>& A, const std::vector<Matrix>& B) {
  double s = 0.0;
  for (size_t k = 0; k < A.size(); ++k) s += A[k].cwiseProduct(B[k]).sum();
  return s;
}

double frob(const std::vector<Matrix>& A) {
  double s = 0.0;
  for (const auto& a : A) s += a.squaredNorm();
  return std::sqrt(s);
}

double sparse_dot(const SparseMatrix& F, const Matrix& T) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < F.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(F, c); it; ++it) s += it.value() * T(it.row(), c);
  }
  return s;
}

// Largest alpha with X + alpha dX >= 0 (infinity when dX >= 0).
double max_step(const Matrix& X, const Matrix& dX) {
  Eigen::LLT<Matrix> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  Matrix T = llt.matrixL().solve(dX);
  T = llt.matrixL().solve(T.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(T), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

struct FreeColumns {
  std::vector<Eigen::Index> cols;
  Matrix dense;  // F(:, cols)
};

struct Workspace {
  const StructuredSdp& P;
  std::vector<std::vector<FreeColumns>> fc;  // [block][free]
  std::vector<std::pair<Eigen::Index, Eigen::Index>> xidx;  // svec index -> (i, j)
  std::vector<int> term_of_block;

  explicit Workspace(const StructuredSdp& p) : P(p) {
    const auto nb = size_t(P.num_blocks());
    term_of_block.assign(nb, -1);
    for (size_t t = 0; t < P.x_terms.size(); ++t) term_of_block[size_t(P.x_terms[t].block)] = int(t);
    fc.resize(nb);
    for (size_t k = 0; k < nb; ++k) {
      fc[k].resize(P.free.size());
      for (size_t i = 0; i < P.free.size(); ++i) {
        const SparseMatrix& F = P.free[i][k];
        if (F.nonZeros() == 0) continue;
        for (Eigen::Index c = 0; c < F.outerSize(); ++c) {
          if (SparseMatrix::InnerIterator(F, c)) fc[k][i].cols.push_back(c);
        }
        fc[k][i].dense = Matrix(F)(Eigen::all, fc[k][i].cols);
      }
    }
    for (Eigen::Index j = 0; j < P.x_dim; ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) xidx.emplace_back(i, j);
    }
  }

  // M_ij = <A_i, Z A_j G>, summed over blocks.
  void schur(const std::vector<Matrix>& Z, const std::vector<Matrix>& G, Matrix& M) const {
    const Eigen::Index nx = P.num_x(), nf = P.num_free(), N = P.x_dim;
    M.setZero(nx + nf, nx + nf);
    for (Eigen::Index k = 0; k < P.num_blocks(); ++k) {
      const Matrix& Zk = Z[size_t(k)];
      const Matrix& Gk = G[size_t(k)];
      std::vector<Matrix> T(static_cast<size_t>(nf));
      for (Eigen::Index i = 0; i < nf; ++i) {
        const FreeColumns& f = fc[size_t(k)][size_t(i)];
        if (f.cols.empty()) continue;
        T[size_t(i)] = (Zk * f.dense) * Gk(f.cols, Eigen::all);
      }
      // free-free
      for (Eigen::Index i = 0; i < nf; ++i) {
        if (fc[size_t(k)][size_t(i)].cols.empty()) continue;
        const SparseMatrix& Fi = P.free[size_t(i)][size_t(k)];
        for (Eigen::Index j = i; j < nf; ++j) {
          if (T[size_t(j)].size() == 0) continue;
          const double v = sparse_dot(Fi, T[size_t(j)]);
          M(nx + i, nx + j) += v;
          if (j != i) M(nx + j, nx + i) += v;
        }
      }
      const int t = term_of_block[size_t(k)];
      if (t < 0) continue;
      const Matrix& L = P.x_terms[size_t(t)].L;
      const Matrix& R = P.x_terms[size_t(t)].R;
      // X-free
      for (Eigen::Index j = 0; j < nf; ++j) {
        if (T[size_t(j)].size() == 0) continue;
        const Matrix RT = R * sym(T[size_t(j)]) * L.transpose();
        const Vector v = svec(RT + RT.transpose());
        M.col(nx + j).head(nx) += v;
        M.row(nx + j).head(nx) += v.transpose();
      }
      // X-X: sum of four terms tr(E P_q E' Q_q).
      const Matrix LZ = L * Zk, RZ = R * Zk, LG = L * Gk, RG = R * Gk;
      const Matrix Pq[4] = {RZ * L.transpose(), RZ * R.transpose(), LZ * L.transpose(),
                            LZ * R.transpose()};
      const Matrix Qq[4] = {RG * L.transpose(), LG * L.transpose(), RG * R.transpose(),
                            LG * R.transpose()};
      Matrix U(N, 8), W(N, 8), Y(N, N);
      for (Eigen::Index r = 0; r < nx; ++r) {
        const auto [a, b] = xidx[size_t(r)];
        const double sab = a == b ? 0.5 : M_SQRT1_2;
        for (int q = 0; q < 4; ++q) {
          U.col(2 * q) = Pq[q].row(b).transpose();
          U.col(2 * q + 1) = Pq[q].row(a).transpose();
          W.col(2 * q) = Qq[q].col(a);
          W.col(2 * q + 1) = Qq[q].col(b);
        }
        Y.noalias() = U * W.transpose();
        Eigen::Index col = 0;
        for (Eigen::Index d = 0; d < N; ++d) {
          for (Eigen::Index c = 0; c < d; ++c, ++col) {
            M(r, col) += sab * M_SQRT1_2 * (Y(c, d) + Y(d, c));
          }
          M(r, col++) += sab * Y(d, d);
        }
      }
    }
  }
};

}  // namespace

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::NearOptimal: return "near-optimal";
    case SdpStatus::Stalled: return "stalled";
    case SdpStatus::MaxIterations: return "max-iterations";
    case SdpStatus::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

void StructuredSdp::validate() const {
  if (C.empty()) throw InvalidArgument("SDP needs at least one block");
  for (const auto& c : C) {
    if (c.rows() != c.cols() || c.rows() == 0) throw InvalidArgument("SDP blocks must be square");
  }
  std::vector<bool> has_term(C.size(), false);
  for (const auto& t : x_terms) {
    if (t.block < 0 || t.block >= num_blocks()) throw InvalidArgument("X term block out of range");
    if (has_term[size_t(t.block)]) throw InvalidArgument("at most one X term per block");
    has_term[size_t(t.block)] = true;
    const Eigen::Index nk = C[size_t(t.block)].rows();
    if (t.L.rows() != x_dim || t.R.rows() != x_dim || t.L.cols() != nk || t.R.cols() != nk) {
      throw InvalidArgument("X term factors must be N x n_k");
    }
  }
  for (const auto& f : free) {
    if (Eigen::Index(f.size()) != num_blocks()) {
      throw InvalidArgument("each free variable needs one matrix per block");
    }
    for (size_t k = 0; k < f.size(); ++k) {
      const Eigen::Index nk = C[k].rows();
      if (f[k].nonZeros() > 0 && (f[k].rows() != nk || f[k].cols() != nk)) {
        throw InvalidArgument("free-variable matrix has the wrong size");
      }
    }
  }
  if (b.size() != num_y()) throw InvalidArgument("objective vector has the wrong length");
}

std::vector<Matrix> StructuredSdp::apply_adjoint(const Eigen::Ref<const Vector>& y) const {
  std::vector<Matrix> out;
  for (const auto& c : C) out.push_back(Matrix::Zero(c.rows(), c.cols()));
  if (x_dim > 0) {
    const Matrix X = smat(y.head(num_x()), x_dim);
    for (const auto& t : x_terms) {
      const Matrix T = t.L.transpose() * X * t.R;
      out[size_t(t.block)] += T + T.transpose();
    }
  }
  for (Eigen::Index i = 0; i < num_free(); ++i) {
    const double yi = y(num_x() + i);
    if (yi == 0.0) continue;
    for (size_t k = 0; k < C.size(); ++k) {
      const SparseMatrix& F = free[size_t(i)][k];
      for (Eigen::Index c = 0; c < F.outerSize(); ++c) {
        for (SparseMatrix::InnerIterator it(F, c); it; ++it) out[k](it.row(), c) += yi * it.value();
      }
    }
  }
  return out;
}

Vector StructuredSdp::apply(const std::vector<Matrix>& W) const {
  Vector v = Vector::Zero(num_y());
  if (x_dim > 0) {
    Matrix acc = Matrix::Zero(x_dim, x_dim);
    for (const auto& t : x_terms) {
      const Matrix RWL = t.R * W[size_t(t.block)] * t.L.transpose();
      acc += RWL + RWL.transpose();
    }
    v.head(num_x()) = svec(acc);
  }
  for (Eigen::Index i = 0; i < num_free(); ++i) {
    double s = 0.0;
    for (size_t k = 0; k < C.size(); ++k) {
      if (free[size_t(i)][k].nonZeros() > 0) s += sparse_dot(free[size_t(i)][k], W[k]);
    }
    v(num_x() + i) = s;
  }
  return v;
}

SdpResult solve_sdp(const StructuredSdp& P, const SdpOptions& opt) {
  P.validate();
  const Workspace ws(P);
  const size_t nb = size_t(P.num_blocks());
  const Eigen::Index m = P.num_y();
  double nn = 0.0;
  for (const auto& c : P.C) nn += double(c.rows());

  // Infeasible starting point, scaled to the data.
  double normA = 0.0;
  for (const auto& t : P.x_terms) normA = std::max(normA, 2.0 * t.L.norm() * t.R.norm());
  for (const auto& f : P.free) {
    double s = 0.0;
    for (const auto& F : f) s += F.squaredNorm();
    normA = std::max(normA, std::sqrt(s));
  }
  const double normC = frob(P.C);
  const double normb = P.b.norm();
  const double zeta = std::max({10.0, std::sqrt(nn), std::sqrt(nn) * (1.0 + P.b.cwiseAbs().maxCoeff()) /
                                                         (1.0 + normA)});
  const double eta = std::max({10.0, std::sqrt(nn), normC, normA});

  std::vector<Matrix> Z, S, G(nb), Rd(nb);
  for (const auto& c : P.C) {
    Z.push_back(zeta * Matrix::Identity(c.rows(), c.rows()));
    S.push_back(eta * Matrix::Identity(c.rows(), c.rows()));
  }
  Vector y = Vector::Zero(m);

  SdpResult res;
  res.status = SdpStatus::MaxIterations;
  Matrix M;
  double best_err = std::numeric_limits<double>::infinity();
  int stall = 0;
  for (int it = 0; it <= opt.max_iter; ++it) {
    const std::vector<Matrix> Ay = P.apply_adjoint(y);
    for (size_t k = 0; k < nb; ++k) Rd[k] = P.C[k] - S[k] - Ay[k];
    const Vector Rp = P.b - P.apply(Z);
    const double pobj = inner(P.C, Z);
    const double dobj = P.b.dot(y);
    const double mu = inner(Z, S) / nn;
    res.relative_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    res.primal_infeasibility = Rp.norm() / (1.0 + normb);
    res.dual_infeasibility = frob(Rd) / (1.0 + normC);
    res.primal_objective = pobj;
    res.dual_objective = dobj;
    res.iterations = it;
    const double err =
        std::max({res.relative_gap, res.primal_infeasibility, res.dual_infeasibility});
    if (opt.verbose) {
      std::fprintf(stderr,
                   "sdp %3d  pobj %+.9e  dobj %+.9e  gap %.2e  pinf %.2e  dinf %.2e  mu %.2e  |y| %.2e  |Z| %.2e\n",
                   it, pobj, dobj, res.relative_gap, res.primal_infeasibility,
                   res.dual_infeasibility, mu, y.norm(), frob(Z));
    }
    if (err <= opt.tol) {
      res.status = SdpStatus::Optimal;
      break;
    }
    if (it == opt.max_iter) break;
    if (err < 0.5 * best_err) {
      best_err = err;
      stall = 0;
    } else if (++stall >= opt.stall_iterations) {
      res.status = err <= 1e-6 ? SdpStatus::NearOptimal : SdpStatus::Stalled;
      break;
    }

    bool ok = true;
    for (size_t k = 0; k < nb && ok; ++k) {
      Eigen::LLT<Matrix> llt(S[k]);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      G[k] = sym(llt.solve(Matrix::Identity(S[k].rows(), S[k].cols())));
    }
    if (!ok) {
      res.status = SdpStatus::NumericalFailure;
      break;
    }
    ws.schur(Z, G, M);
    Eigen::LLT<Matrix> chol;
    const double dmax = std::max(1e-300, M.diagonal().cwiseAbs().maxCoeff());
    for (double shift : {0.0, 1e-14, 1e-12, 1e-10, 1e-8}) {
      if (shift > 0) M.diagonal().array() += shift * dmax;
      chol.compute(M);
      if (chol.info() == Eigen::Success) break;
    }
    if (chol.info() != Eigen::Success) {
      res.status = SdpStatus::NumericalFailure;
      break;
    }

    std::vector<Matrix> ZRdG(nb);
    for (size_t k = 0; k < nb; ++k) ZRdG[k] = sym(Z[k] * Rd[k] * G[k]);
    const Vector base = P.b + P.apply(ZRdG);

    // predictor
    Vector dy = chol.solve(base);
    std::vector<Matrix> dS(nb), dZ(nb);
    std::vector<Matrix> Ady = P.apply_adjoint(dy);
    double ap = 1.0, ad = 1.0;
    for (size_t k = 0; k < nb; ++k) {
      dS[k] = Rd[k] - Ady[k];
      dZ[k] = -Z[k] - sym(Z[k] * dS[k] * G[k]);
      ap = std::min(ap, max_step(Z[k], dZ[k]));
      ad = std::min(ad, max_step(S[k], dS[k]));
    }
    double mu_aff = 0.0;
    for (size_t k = 0; k < nb; ++k) {
      mu_aff += (Z[k] + ap * dZ[k]).cwiseProduct(S[k] + ad * dS[k]).sum();
    }
    mu_aff /= nn;
    // Short predictor steps call for more centering.
    const double expon = std::max(1.0, 3.0 * std::pow(std::min(ap, ad), 2));
    const double sigma =
        std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, expon), 0.0, 1.0);
    const double pred_step = std::min({1.0, ap, ad});

    // corrector
    std::vector<Matrix> corr(nb);
    for (size_t k = 0; k < nb; ++k) corr[k] = sym(dZ[k] * dS[k] * G[k]);
    auto corrected = [&](bool second_order) {
      const Vector h = base - sigma * mu * P.apply(G) + (second_order ? P.apply(corr) : Vector::Zero(m));
      dy = chol.solve(h);
      Ady = P.apply_adjoint(dy);
      ap = ad = std::numeric_limits<double>::infinity();
      for (size_t k = 0; k < nb; ++k) {
        dS[k] = Rd[k] - Ady[k];
        dZ[k] = -Z[k] + sigma * mu * G[k] - sym(Z[k] * dS[k] * G[k]);
        if (second_order) dZ[k] -= corr[k];
        ap = std::min(ap, max_step(Z[k], dZ[k]));
        ad = std::min(ad, max_step(S[k], dS[k]));
      }
    };
    corrected(true);
    // a corrector that cuts the step below the predictor's is doing harm
    if (std::min(ap, ad) < 0.5 * pred_step) corrected(false);
    const double frac = std::max(opt.step_fraction, 0.9 + 0.09 * pred_step);
    ap = std::min(1.0, frac * ap);
    ad = std::min(1.0, frac * ad);
    if (opt.verbose) std::fprintf(stderr, "    sigma %.2e  ap %.2e  ad %.2e\n", sigma, ap, ad);
    if (ap < 1e-10 && ad < 1e-10) {
      res.status = err <= 1e-6 ? SdpStatus::NearOptimal : SdpStatus::Stalled;
      break;
    }
    for (size_t k = 0; k < nb; ++k) {
      Z[k] = sym(Z[k] + ap * dZ[k]);
      S[k] = sym(S[k] + ad * dS[k]);
    }
    y += ad * dy;
  }

  res.y = y;
  res.Z = Z;
  const std::vector<Matrix> Ay = P.apply_adjoint(y);
  res.S.resize(nb);
  for (size_t k = 0; k < nb; ++k) res.S[k] = P.C[k] - Ay[k];
  return res;
}

namespace detail {
Matrix schur_matrix(const StructuredSdp& P, const std::vector<Matrix>& Z,
                    const std::vector<Matrix>& G) {
  P.validate();
  const Workspace ws(P);
  Matrix M;
  ws.schur(Z, G, M);
  return M;
}
}  // namespace detail

}  // namespace ctsls
