#include "ctsls/linalg.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

namespace ctsls {

double spectral_abscissa(const Eigen::Ref<const Matrix>& A) {
  require_square(A, "A");
  Eigen::EigenSolver<Matrix> es(A, false);
  return es.eigenvalues().real().maxCoeff();
}

Matrix psd_sqrt(const Eigen::Ref<const Matrix>& S, double clip) {
  require_square(S, "S");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
  Vector ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -clip * scale) {
      throw InvalidArgument("matrix is not positive semidefinite");
    }
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::Index numerical_rank(const Eigen::Ref<const CMatrix>& M,
                            double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<CMatrix> svd(M);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) >= rel_tol * sv(0)) ++r;
  }
  return r;
}

Matrix expm(const Eigen::Ref<const Matrix>& A) {
  require_square(A, "A");
  Matrix M = A;
  return M.exp();
}

Vector svec(const Eigen::Ref<const Matrix>& S) {
  const Eigen::Index n = S.rows();
  Vector v(svec_size(n));
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      v(k++) = (i == j) ? S(i, i) : M_SQRT2 * 0.5 * (S(i, j) + S(j, i));
    }
  }
  return v;
}

Matrix smat(const Eigen::Ref<const Vector>& v, Eigen::Index n) {
  if (v.size() != svec_size(n)) throw InvalidArgument("smat: size mismatch");
  Matrix S(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      if (i == j) {
        S(i, i) = v(k++);
      } else {
        S(i, j) = S(j, i) = v(k++) * M_SQRT1_2;
      }
    }
  }
  return S;
}

}  // namespace ctsls
