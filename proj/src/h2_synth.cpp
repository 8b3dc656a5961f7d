#include "ctsls/h2_synth.hpp"

#include <chrono>
#include <cmath>
#include <thread>

namespace ctsls {

Matrix column_weight(const Matrix& Wroot, Eigen::Index n, const ColumnBlock& blk) {
  const Eigen::Index nx = Eigen::Index(blk.x_rows.size());
  const Eigen::Index nu = Eigen::Index(blk.u_rows.size());
  Matrix Wj(Wroot.rows(), nx + nu);
  for (Eigen::Index r = 0; r < nx; ++r) Wj.col(r) = Wroot.col(blk.x_rows[size_t(r)]);
  for (Eigen::Index r = 0; r < nu; ++r) Wj.col(nx + r) = Wroot.col(n + blk.u_rows[size_t(r)]);
  return Wj;
}

ResidueGram residue_gram(const PoleSet& poles) {
  const Eigen::Index K = poles.size();
  if (K == 0) throw InvalidArgument("pole set is empty");
  CMatrix M(K, K);
  for (Eigen::Index l = 0; l < K; ++l) {
    for (Eigen::Index k = 0; k < K; ++k) {
      M(l, k) = 1.0 / (-std::conj(poles[l]) - poles[k]);
    }
  }
  Eigen::LLT<CMatrix> llt(M);
  if (llt.info() != Eigen::Success) {
    throw InvalidArgument("residue Gram matrix is not positive definite");
  }
  return {M};
}

Matrix real_residue_gram(const PoleSet& poles) {
  const Eigen::Index K = poles.size();
  const CMatrix& M = residue_gram(poles).M;
  CMatrix T = CMatrix::Zero(K, K);
  const Complex j(0.0, 1.0);
  for (Eigen::Index k = 0; k < poles.num_pairs(); ++k) {
    T(2 * k, 2 * k) = 1.0;
    T(2 * k, 2 * k + 1) = j;
    T(2 * k + 1, 2 * k) = 1.0;
    T(2 * k + 1, 2 * k + 1) = -j;
  }
  for (Eigen::Index l = 2 * poles.num_pairs(); l < K; ++l) T(l, l) = 1.0;
  Matrix Mr = (T.adjoint() * M * T).real();
  return 0.5 * (Mr + Mr.transpose());
}

double residue_h2_norm(std::span<const Complex> poles, std::span<const CMatrix> coefs) {
  if (poles.size() != coefs.size()) throw InvalidArgument("one coefficient per pole expected");
  const size_t K = poles.size();
  double total = 0.0;
  for (size_t l = 0; l < K; ++l) {
    if (!(poles[l].real() < 0)) throw InvalidArgument("poles must be stable");
    for (size_t k = 0; k < K; ++k) {
      const Complex Mlk = 1.0 / (-std::conj(poles[l]) - poles[k]);
      total += (Mlk * (coefs[l].conjugate().cwiseProduct(coefs[k])).sum()).real();
    }
  }
  return std::sqrt(std::max(total, 0.0));
}

Matrix weight_root(const CostWeights& w) {
  const Eigen::Index n = w.Q.rows(), m = w.R.rows();
  Matrix W = Matrix::Zero(n + m, n + m);
  W.topLeftCorner(n, n) = psd_sqrt(w.Q);
  W.bottomRightCorner(m, m) = psd_sqrt(w.R);
  return W;
}

double h2_norm(const ResponseEnsemble& ens, const CostWeights& weights) {
  ens.validate();
  const Eigen::Index n = ens.num_states(), m = ens.num_inputs();
  if (weights.Q.rows() != n || weights.R.rows() != m) {
    throw InvalidArgument("weights do not match the ensemble");
  }
  const CMatrix W = weight_root(weights).cast<Complex>();
  const CMatrix& M = residue_gram(ens.poles).M;
  std::vector<CMatrix> psi;
  psi.reserve(ens.PhiX.size());
  for (size_t l = 0; l < ens.PhiX.size(); ++l) {
    CMatrix stacked(n + m, n);
    stacked << ens.PhiX[l], ens.PhiU[l];
    psi.push_back(W * stacked);
  }
  double total = 0.0;
  for (size_t l = 0; l < psi.size(); ++l) {
    for (size_t k = 0; k < psi.size(); ++k) {
      total += (M(Eigen::Index(l), Eigen::Index(k)) *
                (psi[l].conjugate().cwiseProduct(psi[k])).sum())
                   .real();
    }
  }
  return std::sqrt(std::max(total, 0.0));
}

void attach_baseline(SynthesisResult& r, double baseline) {
  if (!(baseline > 0)) throw InvalidArgument("baseline must be positive");
  r.baseline = baseline;
  r.normalized_cost = r.norm / baseline;
}

ColumnSolution synth_h2_column(const PlantRealization& plant, const CostWeights& weights,
                               const PoleSet& poles, const SparsityMask* mask,
                               std::span<const Eigen::Index> columns,
                               const SynthesisOptions& options) {
  if (weights.Q.rows() != plant.num_states() || weights.R.rows() != plant.num_inputs()) {
    throw InvalidArgument("weights do not match the plant");
  }
  if (columns.empty()) throw InvalidArgument("column block is empty");
  const ConstraintSystem sys = assemble(plant, poles, mask, columns);
  const Matrix Mr = real_residue_gram(poles);
  const Matrix L = Mr.llt().matrixL();
  const Matrix Wroot = weight_root(weights);
  const Eigen::Index K = poles.size();

  ColumnSolution out;
  for (const auto& blk : sys.blocks) {
    out.columns.push_back(blk.col);
    const AffineSolutionSet aff = solve_affine(blk, options.feasibility_tol);
    const Matrix Wj = column_weight(Wroot, plant.num_states(), blk);
    const Eigen::Index p = Wj.rows(), nv = Wj.cols();
    // F = kron(L^T, Wj)
    Matrix F(K * p, K * nv);
    for (Eigen::Index a = 0; a < K; ++a) {
      for (Eigen::Index c = 0; c < K; ++c) F.block(a * p, c * nv, p, nv) = L(c, a) * Wj;
    }
    Vector x = aff.x0;
    if (aff.Z.cols() > 0) {
      const Matrix FZ = F * aff.Z;
      Eigen::CompleteOrthogonalDecomposition<Matrix> cod(FZ);
      cod.setThreshold(1e-12);
      if (cod.rank() < FZ.cols()) out.rank_deficient = true;
      const Vector xi = cod.solve(-(F * aff.x0));
      x += aff.Z * xi;
    }
    const Vector Fx = F * x;
    out.objective += Fx.squaredNorm();
    out.kkt_primal = std::max(out.kkt_primal, (blk.E * x - blk.b).norm());
    if (aff.Z.cols() > 0) {
      out.kkt_stationarity =
          std::max(out.kkt_stationarity, (aff.Z.transpose() * (F.transpose() * Fx)).norm());
    }
    out.x.push_back(std::move(x));
  }
  return out;
}

ResponseEnsemble merge_columns(const PlantRealization& plant, const PoleSet& poles,
                               const SparsityMask* mask, std::span<const ColumnSolution> parts) {
  const Eigen::Index n = plant.num_states();
  std::vector<Vector> x(static_cast<size_t>(n));
  std::vector<bool> seen(size_t(n), false);
  for (const auto& part : parts) {
    for (size_t i = 0; i < part.columns.size(); ++i) {
      const auto j = size_t(part.columns[i]);
      if (seen[j]) throw InvalidArgument("column solved twice");
      seen[j] = true;
      x[j] = part.x[i];
    }
  }
  for (bool s : seen) {
    if (!s) throw InvalidArgument("column blocks do not cover every column");
  }
  return assemble(plant, poles, mask).reconstruct(x);
}

SynthesisResult synth_h2(const PlantRealization& plant, const CostWeights& weights,
                         const PoleSet& poles, const SparsityMask* mask,
                         const SynthesisOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::Index n = plant.num_states();
  std::vector<ColumnSolution> parts(static_cast<size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n));
  auto solve = [&](Eigen::Index j) {
    try {
      const Eigen::Index cols[] = {j};
      parts[size_t(j)] = synth_h2_column(plant, weights, poles, mask, cols, options);
    } catch (...) {
      errors[size_t(j)] = std::current_exception();
    }
  };
  const int workers = std::max(1, std::min<int>(options.workers, int(n)));
  if (workers == 1) {
    for (Eigen::Index j = 0; j < n; ++j) solve(j);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (Eigen::Index j = w; j < n; j += workers) solve(j);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  SynthesisResult r;
  r.ensemble = merge_columns(plant, poles, mask, parts);
  double obj = 0.0;
  for (const auto& p : parts) {
    obj += p.objective;
    r.kkt_primal = std::max(r.kkt_primal, p.kkt_primal);
    r.kkt_stationarity = std::max(r.kkt_stationarity, p.kkt_stationarity);
    r.rank_deficient = r.rank_deficient || p.rank_deficient;
  }
  r.norm = std::sqrt(obj);
  r.residual = residual(r.ensemble, plant, random_samples(poles, 100));
  if (r.rank_deficient) r.status = "optimal (rank-deficient objective, minimum-norm solution)";
  r.solve_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace ctsls
