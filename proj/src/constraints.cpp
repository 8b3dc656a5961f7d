#include "ctsls/constraints.hpp"

#include <cmath>
#include <random>
#include <string>

namespace ctsls {

namespace {

BoolMatrix bool_product(const BoolMatrix& X, const BoolMatrix& Y) {
  BoolMatrix Z = BoolMatrix::Constant(X.rows(), Y.cols(), false);
  for (Eigen::Index j = 0; j < Y.cols(); ++j) {
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
      if (!Y(k, j)) continue;
      for (Eigen::Index i = 0; i < X.rows(); ++i) Z(i, j) = Z(i, j) || X(i, k);
    }
  }
  return Z;
}

void check_not_pole(const std::vector<Complex>& poles, Complex s) {
  for (const auto& p : poles) {
    if (std::abs(s - p) <= 1e-12 * (1.0 + std::abs(p))) {
      throw DomainError("evaluation point coincides with a pole");
    }
  }
}

void check_plant_dims(const PlantRealization& plant, Eigen::Index n, Eigen::Index m) {
  if (plant.num_states() != n || plant.num_inputs() != m) {
    throw InvalidArgument("ensemble is " + std::to_string(n) + " states / " +
                          std::to_string(m) + " inputs, plant is " +
                          std::to_string(plant.num_states()) + " / " +
                          std::to_string(plant.num_inputs()));
  }
}

double sample_residual(const CMatrix& Px, const CMatrix& Pu, const PlantRealization& plant,
                       Complex s) {
  const CMatrix Ac = plant.A().cast<Complex>();
  const CMatrix Bc = plant.B().cast<Complex>();
  CMatrix r = s * Px - Ac * Px - Bc * Pu;
  r.diagonal().array() -= 1.0;
  return r.norm();
}

}  // namespace

void ResponseEnsemble::validate() const {
  const auto K = size_t(poles.size());
  if (K == 0 || PhiX.size() != K || PhiU.size() != K) {
    throw InvalidArgument("ensemble needs one PhiX and PhiU per pole");
  }
  const Eigen::Index n = PhiX[0].rows(), m = PhiU[0].rows();
  for (size_t l = 0; l < K; ++l) {
    if (PhiX[l].rows() != n || PhiX[l].cols() != n || PhiU[l].rows() != m ||
        PhiU[l].cols() != n) {
      throw InvalidArgument("ensemble coefficient shapes are inconsistent");
    }
  }
}

double ResponseEnsemble::conjugacy_error() const {
  validate();
  double e = 0.0;
  for (Eigen::Index l = 0; l < poles.size(); ++l) {
    const auto k = size_t(poles.partner(l));
    e = std::max(e, (PhiX[k] - PhiX[size_t(l)].conjugate()).cwiseAbs().maxCoeff());
    if (PhiU[k].size() > 0) {
      e = std::max(e, (PhiU[k] - PhiU[size_t(l)].conjugate()).cwiseAbs().maxCoeff());
    }
  }
  return e;
}

SparsityMask SparsityMask::dense(Eigen::Index n, Eigen::Index m) {
  return {BoolMatrix::Constant(n, n, true), BoolMatrix::Constant(m, n, true), 0};
}

SparsityMask build_supports(const PlantRealization& plant, int d) {
  if (d < 1) throw InvalidArgument("hop distance d must be >= 1");
  BoolMatrix G = (plant.A().array() != 0.0).matrix();
  G.diagonal().setConstant(true);
  BoolMatrix Sx = G;
  for (int k = 1; k < d; ++k) {
    BoolMatrix next = bool_product(Sx, G);
    if (next == Sx) break;
    Sx = std::move(next);
  }
  const BoolMatrix Bt = (plant.B().transpose().array() != 0.0).matrix();
  return {Sx, bool_product(Bt, Sx), d};
}

Eigen::Index ConstraintSystem::num_vars() const {
  Eigen::Index v = 0;
  for (const auto& b : blocks) v += b.E.cols();
  return v;
}

Eigen::Index ConstraintSystem::num_rows() const {
  Eigen::Index r = 0;
  for (const auto& b : blocks) r += b.E.rows();
  return r;
}

Matrix ConstraintSystem::matrix() const {
  Matrix E = Matrix::Zero(num_rows(), num_vars());
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    E.block(r, c, b.E.rows(), b.E.cols()) = b.E;
    r += b.E.rows();
    c += b.E.cols();
  }
  return E;
}

Vector ConstraintSystem::rhs() const {
  Vector v(num_rows());
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    v.segment(r, b.b.size()) = b.b;
    r += b.b.size();
  }
  return v;
}

ResponseEnsemble ConstraintSystem::reconstruct(const std::vector<Vector>& x) const {
  if (x.size() != blocks.size()) throw InvalidArgument("one solution vector per block expected");
  const auto K = size_t(poles.size());
  ResponseEnsemble ens{poles, std::vector<CMatrix>(K, CMatrix::Zero(n, n)),
                       std::vector<CMatrix>(K, CMatrix::Zero(m, n))};
  for (size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& blk = blocks[bi];
    if (x[bi].size() != Eigen::Index(blk.vars.size())) {
      throw InvalidArgument("solution vector size does not match its block");
    }
    for (size_t v = 0; v < blk.vars.size(); ++v) {
      const VarIndex& vi = blk.vars[v];
      auto& M = vi.is_u ? ens.PhiU[size_t(vi.pole)] : ens.PhiX[size_t(vi.pole)];
      Complex& e = M(vi.row, vi.col);
      if (vi.imag) {
        e.imag(x[bi](Eigen::Index(v)));
      } else {
        e.real(x[bi](Eigen::Index(v)));
      }
    }
  }
  for (Eigen::Index k = 0; k < poles.num_pairs(); ++k) {
    ens.PhiX[size_t(2 * k + 1)] = ens.PhiX[size_t(2 * k)].conjugate();
    ens.PhiU[size_t(2 * k + 1)] = ens.PhiU[size_t(2 * k)].conjugate();
  }
  return ens;
}

std::vector<Vector> ConstraintSystem::extract(const ResponseEnsemble& ens) const {
  ens.validate();
  if (ens.poles.size() != poles.size() || ens.num_states() != n || ens.num_inputs() != m) {
    throw InvalidArgument("ensemble does not match the constraint system");
  }
  std::vector<Vector> x;
  x.reserve(blocks.size());
  for (const auto& blk : blocks) {
    Vector v(Eigen::Index(blk.vars.size()));
    for (size_t i = 0; i < blk.vars.size(); ++i) {
      const VarIndex& vi = blk.vars[i];
      const auto& M = vi.is_u ? ens.PhiU[size_t(vi.pole)] : ens.PhiX[size_t(vi.pole)];
      v(Eigen::Index(i)) = vi.imag ? M(vi.row, vi.col).imag() : M(vi.row, vi.col).real();
    }
    x.push_back(std::move(v));
  }
  return x;
}

ConstraintSystem assemble(const PlantRealization& plant, const PoleSet& poles,
                          const SparsityMask* mask, std::span<const Eigen::Index> columns) {
  const Eigen::Index n = plant.num_states(), m = plant.num_inputs();
  const Eigen::Index K = poles.size();
  if (K == 0) throw InvalidArgument("pole set is empty");
  if (mask && (mask->Sx.rows() != n || mask->Sx.cols() != n || mask->Su.rows() != m ||
               mask->Su.cols() != n)) {
    throw InvalidArgument("mask dimensions do not match the plant");
  }
  std::vector<Eigen::Index> cols(columns.begin(), columns.end());
  if (cols.empty()) {
    for (Eigen::Index j = 0; j < n; ++j) cols.push_back(j);
  }

  ConstraintSystem sys;
  sys.poles = poles;
  sys.n = n;
  sys.m = m;
  const Matrix& A = plant.A();
  const Matrix& B = plant.B();
  for (const Eigen::Index j : cols) {
    if (j < 0 || j >= n) throw InvalidArgument("column index out of range");
    ColumnBlock blk;
    blk.col = j;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!mask || mask->Sx(i, j)) blk.x_rows.push_back(i);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!mask || mask->Su(i, j)) blk.u_rows.push_back(i);
    }
    const Eigen::Index nx = Eigen::Index(blk.x_rows.size());
    const Eigen::Index nu = Eigen::Index(blk.u_rows.size());
    const Eigen::Index nv = nx + nu;
    // Restrictions of A and B to the unmasked rows of this column.
    Matrix Ax(n, nx), Bu(n, nu);
    for (Eigen::Index r = 0; r < nx; ++r) Ax.col(r) = A.col(blk.x_rows[size_t(r)]);
    for (Eigen::Index r = 0; r < nu; ++r) Bu.col(r) = B.col(blk.u_rows[size_t(r)]);
    Matrix Ix = Matrix::Zero(n, nx);
    for (Eigen::Index r = 0; r < nx; ++r) Ix(blk.x_rows[size_t(r)], r) = 1.0;

    blk.E = Matrix::Zero(n * (K + 1), nv * K);
    blk.b = Vector::Zero(n * (K + 1));
    blk.b(j) = 1.0;
    for (Eigen::Index c = 0; c < K; ++c) {
      const Eigen::Index pole = poles.is_real(c) ? c : (c / 2) * 2;
      const bool imag = !poles.is_real(c) && (c % 2 == 1);
      for (Eigen::Index r = 0; r < nx; ++r) {
        blk.vars.push_back({pole, imag, false, blk.x_rows[size_t(r)], j});
      }
      for (Eigen::Index r = 0; r < nu; ++r) {
        blk.vars.push_back({pole, imag, true, blk.u_rows[size_t(r)], j});
      }
    }
    auto xcols = [&](Eigen::Index c) { return blk.E.middleCols(c * nv, nx); };
    auto ucols = [&](Eigen::Index c) { return blk.E.middleCols(c * nv + nx, nu); };
    auto eqs = [&](Eigen::Index c) { return n + c * n; };

    for (Eigen::Index k = 0; k < poles.num_pairs(); ++k) {
      const Complex p = poles[2 * k];
      const double a = p.real(), w = p.imag();
      const Eigen::Index cr = 2 * k, ci = 2 * k + 1;
      // sum over the pair: 2 Re
      xcols(cr).topRows(n) += 2.0 * Ix;
      // Re: (aI - A) Xr - w Xi - B Ur = 0
      xcols(cr).middleRows(eqs(cr), n) = a * Ix - Ax;
      xcols(ci).middleRows(eqs(cr), n) = -w * Ix;
      ucols(cr).middleRows(eqs(cr), n) = -Bu;
      // Im: w Xr + (aI - A) Xi - B Ui = 0
      xcols(cr).middleRows(eqs(ci), n) = w * Ix;
      xcols(ci).middleRows(eqs(ci), n) = a * Ix - Ax;
      ucols(ci).middleRows(eqs(ci), n) = -Bu;
    }
    for (Eigen::Index c = 2 * poles.num_pairs(); c < K; ++c) {
      const double p = poles[c].real();
      xcols(c).topRows(n) += Ix;
      xcols(c).middleRows(eqs(c), n) = p * Ix - Ax;
      ucols(c).middleRows(eqs(c), n) = -Bu;
    }
    sys.blocks.push_back(std::move(blk));
  }
  return sys;
}

AffineSolutionSet solve_affine(const ColumnBlock& block, double tol) {
  const Matrix& E = block.E;
  const Eigen::Index N = E.cols();
  Eigen::ColPivHouseholderQR<Matrix> qr(E.transpose());
  qr.setThreshold(1e-10);
  const Eigen::Index r = qr.rank();
  const Matrix Q = qr.householderQ();
  AffineSolutionSet out;
  out.rank = r;
  out.Z = Q.rightCols(N - r);
  // E^T P = Q R  =>  P^T E = R^T Q^T; solve the leading r equations.
  const Vector pb = qr.colsPermutation().transpose() * block.b;
  Vector y = Vector::Zero(r);
  if (r > 0) {
    y = qr.matrixR()
            .topLeftCorner(r, r)
            .template triangularView<Eigen::Upper>()
            .transpose()
            .solve(pb.head(r));
  }
  out.x0 = Q.leftCols(r) * y;
  out.residual = (E * out.x0 - block.b).norm();
  if (!(out.residual <= tol)) {
    throw InfeasibleError("SLS constraints are infeasible (column " +
                          std::to_string(block.col) + ", residual " +
                          std::to_string(out.residual) +
                          "); the plant is not stabilizable with this pole set and mask");
  }
  return out;
}

ResponseEnsemble solve_feasible(const ConstraintSystem& system, double tol) {
  std::vector<Vector> x;
  for (const auto& blk : system.blocks) x.push_back(solve_affine(blk, tol).x0);
  return system.reconstruct(x);
}

std::pair<CMatrix, CMatrix> evaluate(const ResponseEnsemble& ens, Complex s) {
  ens.validate();
  check_not_pole(ens.poles.poles(), s);
  CMatrix Px = CMatrix::Zero(ens.num_states(), ens.num_states());
  CMatrix Pu = CMatrix::Zero(ens.num_inputs(), ens.num_states());
  for (Eigen::Index l = 0; l < ens.poles.size(); ++l) {
    const Complex g = 1.0 / (s - ens.poles[l]);
    Px += g * ens.PhiX[size_t(l)];
    Pu += g * ens.PhiU[size_t(l)];
  }
  return {Px, Pu};
}

std::pair<CMatrix, CMatrix> evaluate(const MultiPoleEnsemble& ens, Complex s) {
  if (ens.poles.empty() || ens.PhiX.size() != ens.poles.size() ||
      ens.PhiU.size() != ens.poles.size() || ens.PhiX[0].empty() || ens.PhiU[0].empty()) {
    throw InvalidArgument("multi-pole ensemble is malformed");
  }
  check_not_pole(ens.poles, s);
  const Eigen::Index n = ens.PhiX[0][0].rows(), m = ens.PhiU[0][0].rows();
  CMatrix Px = CMatrix::Zero(n, n), Pu = CMatrix::Zero(m, n);
  for (size_t l = 0; l < ens.poles.size(); ++l) {
    if (ens.PhiX[l].size() != ens.PhiU[l].size() || ens.PhiX[l].empty()) {
      throw InvalidArgument("multiplicity mismatch between PhiX and PhiU");
    }
    const Complex g = 1.0 / (s - ens.poles[l]);
    Complex gj = g;
    for (size_t j = 0; j < ens.PhiX[l].size(); ++j, gj *= g) {
      Px += gj * ens.PhiX[l][j];
      Pu += gj * ens.PhiU[l][j];
    }
  }
  return {Px, Pu};
}

double residual(const ResponseEnsemble& ens, const PlantRealization& plant,
                std::span<const Complex> samples) {
  ens.validate();
  check_plant_dims(plant, ens.num_states(), ens.num_inputs());
  double worst = 0.0;
  for (const auto& s : samples) {
    const auto [Px, Pu] = evaluate(ens, s);
    worst = std::max(worst, sample_residual(Px, Pu, plant, s));
  }
  return worst;
}

double residual(const MultiPoleEnsemble& ens, const PlantRealization& plant,
                std::span<const Complex> samples) {
  double worst = 0.0;
  for (const auto& s : samples) {
    const auto [Px, Pu] = evaluate(ens, s);
    check_plant_dims(plant, Px.rows(), Pu.rows());
    worst = std::max(worst, sample_residual(Px, Pu, plant, s));
  }
  return worst;
}

double coefficient_residual(const MultiPoleEnsemble& ens, const PlantRealization& plant) {
  if (ens.poles.empty()) throw InvalidArgument("multi-pole ensemble is empty");
  const Eigen::Index n = plant.num_states();
  const CMatrix Ac = plant.A().cast<Complex>();
  const CMatrix Bc = plant.B().cast<Complex>();
  CMatrix sum = -CMatrix::Identity(n, n);
  double worst = 0.0;
  for (size_t l = 0; l < ens.poles.size(); ++l) {
    const auto& X = ens.PhiX[l];
    const auto& U = ens.PhiU[l];
    if (X.empty() || X.size() != U.size()) throw InvalidArgument("multiplicity mismatch");
    check_plant_dims(plant, X[0].rows(), U[0].rows());
    sum += X[0];
    for (size_t j = 0; j < X.size(); ++j) {
      CMatrix r = ens.poles[l] * X[j] - Ac * X[j] - Bc * U[j];
      if (j + 1 < X.size()) r += X[j + 1];
      worst = std::max(worst, r.norm());
    }
  }
  return std::max(worst, sum.norm());
}

std::vector<Complex> random_samples(const PoleSet& poles, int count, double radius,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Complex> out;
  out.reserve(size_t(std::max(count, 0)));
  while (int(out.size()) < count) {
    const Complex s = std::polar(radius * std::sqrt(unit(rng)), 2.0 * M_PI * unit(rng));
    bool ok = true;
    for (const auto& p : poles.poles()) ok = ok && std::abs(s - p) > 1e-3;
    if (ok) out.push_back(s);
  }
  return out;
}

double mask_violation(const ResponseEnsemble& ens, const SparsityMask& mask) {
  ens.validate();
  double worst = 0.0;
  for (size_t l = 0; l < ens.PhiX.size(); ++l) {
    for (Eigen::Index j = 0; j < ens.num_states(); ++j) {
      for (Eigen::Index i = 0; i < ens.num_states(); ++i) {
        if (!mask.Sx(i, j)) worst = std::max(worst, std::abs(ens.PhiX[l](i, j)));
      }
      for (Eigen::Index i = 0; i < ens.num_inputs(); ++i) {
        if (!mask.Su(i, j)) worst = std::max(worst, std::abs(ens.PhiU[l](i, j)));
      }
    }
  }
  return worst;
}

}  // namespace ctsls
