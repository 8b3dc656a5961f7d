#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ctsls {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Raised for malformed sizes or arguments outside an operation's domain.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an evaluation point hits a singularity (a pole, or a
/// non-Hurwitz matrix handed to a stable-system oracle).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The SLS affine constraint has no solution; equivalently (A, B) is not
/// stabilizable.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine (SDP, Newton iteration) failed to converge.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Largest real part over the spectrum of a square real matrix.
double spectral_abscissa(const Eigen::Ref<const Matrix>& A);

inline bool is_hurwitz(const Eigen::Ref<const Matrix>& A) {
  return spectral_abscissa(A) < 0.0;
}

/// Symmetric PSD square root through an eigendecomposition. Eigenvalues in
/// [-clip, 0) are treated as zero; anything more negative throws.
Matrix psd_sqrt(const Eigen::Ref<const Matrix>& S, double clip = 1e-10);

/// Numerical rank from singular values, relative to the largest one.
Eigen::Index numerical_rank(const Eigen::Ref<const CMatrix>& M,
                            double rel_tol = 1e-8);

/// Matrix exponential (scaling and squaring with a Pade approximant).
Matrix expm(const Eigen::Ref<const Matrix>& A);

/// Symmetric vectorization (upper triangle, column by column) used by the SDP layer. svec
/// scales off-diagonals by sqrt(2) so that <svec(A), svec(B)> = tr(AB).
inline Eigen::Index svec_size(Eigen::Index n) { return n * (n + 1) / 2; }
Vector svec(const Eigen::Ref<const Matrix>& S);
Matrix smat(const Eigen::Ref<const Vector>& v, Eigen::Index n);

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& S, double tol) {
  return S.rows() == S.cols() &&
         (S - S.transpose()).cwiseAbs().maxCoeff() <= tol;
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& M,
                    const std::string& what) {
  if (M.rows() != M.cols() || M.rows() == 0) {
    throw InvalidArgument(what + " must be a nonempty square matrix");
  }
}

}  // namespace ctsls
