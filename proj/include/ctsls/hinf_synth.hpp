#pragma once

#include <string>

#include "ctsls/analysis.hpp"
#include "ctsls/constraints.hpp"
#include "ctsls/h2_synth.hpp"
#include "ctsls/sdp.hpp"

namespace ctsls {

/// Acal = blkdiag(p_l I_n), Bcal = [I_n; ...; I_n], Ccal = [Psi(1) ... Psi(K)]
/// with Psi(l) = W [PhiX(l); PhiU(l)].
struct StackedRealization {
  CMatrix A;
  CMatrix B;
  CMatrix C;

  CMatrix evaluate(Complex s) const;
};

StackedRealization stacked_realization(const ResponseEnsemble& ensemble,
                                       const CostWeights& weights);

/// Unitary T = blkdiag(U, ..., U, I) taking the stacked realization to real
/// coordinates. Per conjugate pair (p, conj p) with Im p > 0,
///   U = [(1+j)/2 I, (1-j)/2 I; (1-j)/2 I, (1+j)/2 I],
///   T^H blkdiag(p I, conj(p) I) T = [Re p I, Im p I; -Im p I, Re p I].
struct RealTransform {
  CMatrix T;
  Matrix A;  // Atil
  Matrix B;  // Btil
  Eigen::Index n = 0;
};

RealTransform real_transform(const PoleSet& poles, Eigen::Index n);

/// Ccal T, with its imaginary part checked to be negligible.
Matrix transform_output(const RealTransform& rt, const CMatrix& Ccal);

/// (Atil, Btil, Ctil) of the weighted responses.
StateSpace real_realization(const ResponseEnsemble& ensemble, const CostWeights& weights);

/// 1e-7 (1 + ||A||_2), the strictness margin of the LMIs.
double lmi_epsilon(const Eigen::Ref<const Matrix>& A);

struct KypResult {
  bool feasible = false;
  Matrix X;
  double margin = 0.0;
  std::string diagnostic;
};

/// Is there X >= eps I with
///   [A^T X + X A, X B, C^T; B^T X, -gamma I, 0; C, 0, -gamma I] <= -eps I ?
KypResult kyp_check(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                    const Eigen::Ref<const Matrix>& C, double gamma,
                    const SdpOptions& options = {});

/// Smallest gamma accepted by kyp_check, to relative tolerance `rel_tol`.
double kyp_bisection(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                     const Eigen::Ref<const Matrix>& C, double rel_tol = 1e-6);

/// Minimize gamma over ensembles on `poles` obeying the SLS constraints and
/// the mask, together with X, subject to the LMI above with Ctil affine in
/// the ensemble. `norm` is the H-infinity norm of the result recomputed by
/// hinf_norm_ss; `gamma` is the SDP bound.
SynthesisResult synth_hinf(const PlantRealization& plant, const CostWeights& weights,
                           const PoleSet& poles, const SparsityMask* mask = nullptr,
                           const SynthesisOptions& options = {});

}  // namespace ctsls
