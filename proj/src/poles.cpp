#include "ctsls/poles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ctsls/analysis.hpp"
#include "ctsls/h2_synth.hpp"

namespace ctsls {

namespace {

bool close(Complex a, Complex b, double tol) {
  return std::abs(a - b) <= tol * (1.0 + std::max(std::abs(a), std::abs(b)));
}

}  // namespace

PoleSet PoleSet::from_list(std::span<const Complex> poles, double real_tol) {
  if (poles.empty()) throw InvalidArgument("pole set must be nonempty");
  const size_t K = poles.size();
  std::vector<Complex> p(poles.begin(), poles.end());
  for (auto& q : p) {
    if (!std::isfinite(q.real()) || !std::isfinite(q.imag())) {
      throw InvalidArgument("poles must be finite");
    }
    if (!(q.real() < 0.0)) {
      throw InvalidArgument("pole " + std::to_string(q.real()) + "+" +
                            std::to_string(q.imag()) +
                            "j is not in the open left half plane");
    }
    if (std::abs(q.imag()) <= real_tol * (1.0 + std::abs(q))) q.imag(0.0);
  }
  for (size_t i = 0; i < K; ++i) {
    for (size_t j = i + 1; j < K; ++j) {
      if (close(p[i], p[j], 1e-12)) throw InvalidArgument("poles must be distinct");
    }
  }

  PoleSet out;
  out.poles_.reserve(K);
  out.input_order_.assign(K, -1);
  std::vector<bool> used(K, false);
  // Pairs, in order of first appearance of either member.
  for (size_t i = 0; i < K; ++i) {
    if (used[i] || p[i].imag() == 0.0) continue;
    size_t mate = K;
    for (size_t j = 0; j < K; ++j) {
      if (j != i && !used[j] && close(p[j], std::conj(p[i]), 1e-9)) {
        mate = j;
        break;
      }
    }
    if (mate == K) throw InvalidArgument("pole set is not closed under conjugation");
    const size_t up = p[i].imag() > 0 ? i : mate;
    const size_t down = p[i].imag() > 0 ? mate : i;
    const auto k = Eigen::Index(out.poles_.size());
    out.poles_.push_back(p[up]);
    out.poles_.push_back(std::conj(p[up]));
    out.input_order_[up] = k;
    out.input_order_[down] = k + 1;
    used[i] = used[mate] = true;
    ++out.num_pairs_;
  }
  for (size_t i = 0; i < K; ++i) {
    if (used[i]) continue;
    out.input_order_[i] = Eigen::Index(out.poles_.size());
    out.poles_.push_back(p[i]);
  }
  return out;
}

Eigen::Index PoleSet::partner(Eigen::Index i) const {
  if (i < 0 || i >= size()) throw InvalidArgument("pole index out of range");
  if (is_real(i)) return i;
  return (i % 2 == 0) ? i + 1 : i - 1;
}

std::vector<Eigen::Index> PoleSet::representatives() const {
  std::vector<Eigen::Index> r;
  for (Eigen::Index k = 0; k < num_pairs_; ++k) r.push_back(2 * k);
  for (Eigen::Index i = 2 * num_pairs_; i < size(); ++i) r.push_back(i);
  return r;
}

double PoleSet::min_decay() const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& p : poles_) d = std::min(d, -p.real());
  return d;
}

Complex bilinear(Complex z) {
  if (std::abs(z + 1.0) == 0.0) throw DomainError("bilinear map is singular at z = -1");
  return (z - 1.0) / (z + 1.0);
}

Complex inv_bilinear(Complex s) {
  if (std::abs(1.0 - s) == 0.0) throw DomainError("inverse bilinear map is singular at s = 1");
  return (1.0 + s) / (1.0 - s);
}

std::vector<Complex> spiral_points(int K, int spiral_m) {
  if (K < 2 || K % 2 != 0) {
    throw InvalidArgument("pole count must be even and >= 2, got " + std::to_string(K));
  }
  const int m = spiral_m == 0 ? K : spiral_m;
  if (m < 1) throw InvalidArgument("spiral_m must be positive");
  std::vector<Complex> z;
  z.reserve(size_t(K));
  for (int k = 1; k <= K / 2; ++k) {
    const double theta = 2.0 * std::sqrt(M_PI * k);
    const double r = std::sqrt(2.0 * k / (m + 2.0));
    if (!(r < 1.0)) {
      throw InvalidArgument("spiral radius reaches the unit circle; increase spiral_m");
    }
    const Complex zk = std::polar(r, theta);
    z.push_back(zk);
    z.push_back(std::conj(zk));
  }
  return z;
}

PoleSet spiral_poles(int K, int spiral_m) {
  std::vector<Complex> z = spiral_points(K, spiral_m);
  std::vector<Complex> p;
  p.reserve(z.size());
  for (size_t k = 0; k < z.size(); k += 2) {
    Complex zk = z[k];
    for (int attempt = 0;; ++attempt) {
      const Complex pk = bilinear(zk);
      bool crowded = std::abs(pk.imag()) < 0.5e-8;
      for (const auto& q : p) crowded = crowded || std::abs(q - pk) < 1e-8;
      if (!crowded) break;
      if (attempt > 100) throw InvalidArgument("could not separate spiral poles");
      zk = std::polar(std::abs(zk) - 1e-6, std::arg(zk));
    }
    const Complex pk = bilinear(zk);
    p.push_back(pk);
    p.push_back(std::conj(pk));
  }
  return PoleSet::from_list(p, 0.0);
}

CoveringReport covering_distance(std::span<const Complex> candidates,
                                 std::span<const Complex> targets) {
  if (candidates.empty() || targets.empty()) {
    throw InvalidArgument("covering distance needs nonempty sets");
  }
  CoveringReport rep;
  rep.nearest.reserve(targets.size());
  for (const auto& t : targets) {
    double best = std::numeric_limits<double>::infinity();
    Complex arg;
    for (const auto& c : candidates) {
      const double d = std::abs(t - c);
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    rep.nearest.push_back(arg);
    rep.distance = std::max(rep.distance, best);
  }
  return rep;
}

LipschitzConstants lipschitz_constants(std::span<const Complex> targets) {
  if (targets.empty()) throw InvalidArgument("targets must be nonempty");
  LipschitzConstants c;
  double min_abs = std::numeric_limits<double>::infinity();
  for (const auto& q : targets) {
    if (!(q.real() < 0.0)) throw InvalidArgument("targets must lie in the open left half plane");
    c.c4 = std::max(c.c4, std::abs(1.0 - q));
    min_abs = std::min(min_abs, std::abs(q));
  }
  c.c5 = 1.0 + min_abs;
  c.c1 = 2.0 * c.c5 / (c.c4 * (c.c4 + c.c5));
  c.c2 = c.c4 * (c.c5 + c.c4) / 2.0;
  return c;
}

CMatrix PoleResidueModel::evaluate(Complex s) const {
  if (poles.empty() || poles.size() != residues.size()) {
    throw InvalidArgument("pole/residue lists must be nonempty and of equal length");
  }
  CMatrix G = CMatrix::Zero(residues[0].rows(), residues[0].cols());
  for (size_t q = 0; q < poles.size(); ++q) {
    if (s == poles[q]) throw DomainError("evaluation at a pole");
    G += residues[q] / (s - poles[q]);
  }
  return G;
}

void spa_frequency_grid(const SpaFitOptions& o, Vector& omega, Vector& weight) {
  if (o.num_frequencies < 2 || !(o.omega_min > 0) || !(o.omega_max > o.omega_min)) {
    throw InvalidArgument("bad frequency grid");
  }
  const Eigen::Index N = o.num_frequencies + 1;
  omega.resize(N);
  omega(0) = 0.0;
  const double a = std::log10(o.omega_min), b = std::log10(o.omega_max);
  for (int i = 0; i < o.num_frequencies; ++i) {
    omega(i + 1) = std::pow(10.0, a + (b - a) * i / (o.num_frequencies - 1));
  }
  // central differences, one-sided at the ends
  weight.resize(N);
  weight(0) = omega(1) - omega(0);
  weight(N - 1) = omega(N - 1) - omega(N - 2);
  for (Eigen::Index i = 1; i + 1 < N; ++i) weight(i) = 0.5 * (omega(i + 1) - omega(i - 1));
}

SpaFit spa_fit(const PoleResidueModel& target, const PoleSet& poles,
               const SpaFitOptions& options) {
  if (target.poles.empty() || target.poles.size() != target.residues.size()) {
    throw InvalidArgument("target must list one residue per pole");
  }
  const Eigen::Index rows = target.residues[0].rows();
  const Eigen::Index cols = target.residues[0].cols();
  for (size_t q = 0; q < target.poles.size(); ++q) {
    if (!(target.poles[q].real() < 0)) throw InvalidArgument("target must be stable");
    if (target.residues[q].rows() != rows || target.residues[q].cols() != cols) {
      throw InvalidArgument("target residues must share one shape");
    }
  }

  Vector omega, weight;
  spa_frequency_grid(options, omega, weight);
  const Eigen::Index N = omega.size();
  const Eigen::Index K = poles.size();

  // Real basis: coordinate c of the canonical ordering. For pair k the
  // coefficient is G = x_{2k} + j x_{2k+1} on p and its conjugate on conj(p).
  CMatrix basis(N, K);
  for (Eigen::Index i = 0; i < N; ++i) {
    const Complex s(0.0, omega(i));
    for (Eigen::Index k = 0; k < poles.num_pairs(); ++k) {
      const Complex a = 1.0 / (s - poles[2 * k]);
      const Complex b = 1.0 / (s - poles[2 * k + 1]);
      basis(i, 2 * k) = a + b;
      basis(i, 2 * k + 1) = Complex(0, 1) * (a - b);
    }
    for (Eigen::Index l = 2 * poles.num_pairs(); l < K; ++l) {
      basis(i, l) = 1.0 / (s - poles[l]);
    }
  }
  const Vector sw = weight.cwiseSqrt();
  Matrix Areal(2 * N, K);
  Areal.topRows(N) = sw.asDiagonal() * basis.real();
  Areal.bottomRows(N) = sw.asDiagonal() * basis.imag();
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Areal);
  cod.setThreshold(1e-12);

  SpaFit fit;
  fit.rank_deficient = cod.rank() < K;
  fit.coefficients.assign(size_t(K), CMatrix::Zero(rows, cols));
  std::vector<CMatrix> samples(static_cast<size_t>(N));
  for (Eigen::Index i = 0; i < N; ++i) samples[size_t(i)] = target.evaluate(Complex(0.0, omega(i)));
  Vector y(2 * N);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index i = 0; i < N; ++i) {
        y(i) = sw(i) * samples[size_t(i)](r, c).real();
        y(N + i) = sw(i) * samples[size_t(i)](r, c).imag();
      }
      const Vector x = cod.solve(y);
      for (Eigen::Index k = 0; k < poles.num_pairs(); ++k) {
        const Complex g(x(2 * k), x(2 * k + 1));
        fit.coefficients[size_t(2 * k)](r, c) = g;
        fit.coefficients[size_t(2 * k + 1)](r, c) = std::conj(g);
      }
      for (Eigen::Index l = 2 * poles.num_pairs(); l < K; ++l) {
        fit.coefficients[size_t(l)](r, c) = x(l);
      }
    }
  }

  // Mismatch fit - target as one pole/residue model, merging shared poles.
  PoleResidueModel diff{poles.poles(), fit.coefficients};
  for (size_t q = 0; q < target.poles.size(); ++q) {
    bool merged = false;
    for (size_t l = 0; l < diff.poles.size(); ++l) {
      if (close(diff.poles[l], target.poles[q], 1e-12)) {
        diff.residues[l] -= target.residues[q];
        merged = true;
        break;
      }
    }
    if (!merged) {
      diff.poles.push_back(target.poles[q]);
      diff.residues.push_back(-target.residues[q]);
    }
  }
  fit.h2_error = residue_h2_norm(diff.poles, diff.residues);
  fit.hinf_error = hinf_norm_ss(realize_pole_residue(diff), 1e-8);
  return fit;
}

}  // namespace ctsls
