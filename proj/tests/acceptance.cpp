// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "ctsls/analysis.hpp"
#include "ctsls/h2_synth.hpp"
#include "ctsls/hinf_synth.hpp"
#include "ctsls/simulate.hpp"
#include "test_util.hpp"

using namespace ctsls;
using namespace ctsls::test;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;
double worst_residual = 0.0;  // over every ensemble synthesized below
int synthesized = 0;

void record(const SynthesisResult& r) {
  worst_residual = std::max(worst_residual, r.residual);
  ++synthesized;
}

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] %2d %-26s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void guarded(int id, const char* name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

struct Chain {
  PlantRealization plant = make_chain(11, 0.6, 0.4, 1.0);
  CostWeights weights = CostWeights::scaled_identity(11, 11, 1.0, 10.0);
  SparsityMask mask = build_supports(plant, 2);
  SynthesisResult result;
};

Chain chain;

void chain_benchmark() {
  const auto t0 = Clock::now();
  chain.result = synth_h2(chain.plant, chain.weights, spiral_poles(4), &chain.mask);
  attach_baseline(chain.result, lqr_baseline(chain.plant, chain.weights).h2_cost);
  const double secs = seconds_since(t0);
  record(chain.result);
  const double c = chain.result.normalized_cost;
  report(1, "chain benchmark", c >= 1.05 && c <= 1.30 && secs < 10.0,
         fmt("normalized cost %.6f (band [1.05, 1.30]), %.2f s", c, secs));
}

void chain_containment() {
  const auto t0 = Clock::now();
  const ControllerRealization k = realize_controller(chain.result.ensemble, chain.plant);
  const SimResult sim = simulate_closed_loop(chain.plant, k, Vector::Zero(11),
                                             {Vector::Unit(11, 5)}, 40.0, 0.02);
  std::vector<bool> allowed(11);
  for (int i = 0; i < 11; ++i) allowed[size_t(i)] = std::abs(i - 5) <= 2;
  const double leak = containment_leak(sim, allowed);
  const double final_peak = sim.x.bottomRows(1).cwiseAbs().maxCoeff();
  const double secs = seconds_since(t0);
  report(2, "chain containment",
         leak <= 1e-8 && std::isfinite(sim.settling_time_2pct) && sim.stable && secs < 5.0,
         fmt("leak %.2e (<= 1e-8), settling %.2f s, |x(40)| %.1e, %.2f s", leak,
             sim.settling_time_2pct, final_peak, secs));
}

void grid_h2_trend() {
  const auto t0 = Clock::now();
  const PlantRealization grid = make_grid({});
  const CostWeights w = CostWeights::scaled_identity(18, 9, 1.0, 1.0);
  const double base = lqr_baseline(grid, w).h2_cost;
  std::string costs;
  double prev = 1e300, last = 0;
  bool monotone = true;
  for (int K = 2; K <= 10; K += 2) {
    SynthesisResult r = synth_h2(grid, w, spiral_poles(K));
    record(r);
    attach_baseline(r, base);
    monotone = monotone && r.normalized_cost <= prev + 1e-6;
    prev = last = r.normalized_cost;
    costs += fmt("%s%.4f", costs.empty() ? "" : " ", last);
  }
  const double secs = seconds_since(t0);
  report(3, "grid H2 trend", monotone && last <= 1.10 && secs < 120.0,
         fmt("K=2..10: %s; monotone %s, K=10 %.4f (<= 1.10), %.1f s", costs.c_str(),
             monotone ? "yes" : "no", last, secs));
}

void grid_hinf() {
  const auto t0 = Clock::now();
  const PlantRealization grid = make_grid({});
  const CostWeights w = CostWeights::scaled_identity(18, 9, 1.0, 1.0);
  const double base = hinf_baseline(grid, w);
  SynthesisOptions opt;
  opt.sdp_tol = 1e-8;
  const SparsityMask m2 = build_supports(grid, 2);
  SynthesisResult dist = synth_hinf(grid, w, spiral_poles(6), &m2, opt);
  record(dist);
  attach_baseline(dist, base);
  std::string costs;
  double prev = 1e300;
  bool monotone = true;
  for (int K : {2, 4, 6}) {
    SynthesisResult r = synth_hinf(grid, w, spiral_poles(K), nullptr, opt);
    record(r);
    attach_baseline(r, base);
    monotone = monotone && r.normalized_cost <= prev + 1e-6;
    prev = r.normalized_cost;
    costs += fmt("%s%.4f", costs.empty() ? "" : " ", r.normalized_cost);
  }
  const double secs = seconds_since(t0);
  report(4, "grid H-infinity", dist.normalized_cost <= 1.05 && monotone && secs < 300.0,
         fmt("d=2 K=6 %.4f (<= 1.05); centralized K=2,4,6: %s, monotone %s; %.1f s",
             dist.normalized_cost, costs.c_str(), monotone ? "yes" : "no", secs));
}

void oracle_equivalence() {
  std::mt19937 rng(2024);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 6;
    const int K = 2 + 2 * (trial % 4);
    const PlantRealization p = random_plant(rng, n);
    const ResponseEnsemble e = random_feasible(rng, p, spiral_poles(K));
    const CostWeights w = CostWeights::scaled_identity(n, n, 1.0, 0.5 + trial % 3);
    const double a = h2_norm(e, w);
    const double b = h2_norm_ss(real_realization(e, w));
    worst = std::max(worst, std::abs(a - b) / b);
  }
  report(5, "H2 oracle equivalence", worst <= 1e-8,
         fmt("max relative error %.2e over 20 ensembles (<= 1e-8)", worst));
}

void kyp_consistency() {
  std::mt19937 rng(7);
  double worst_norm = 0, worst_bis = 0;
  int cases = 0;
  for (int n = 1; n <= 4; ++n) {
    for (int K : {2, 4}) {
      if (n == 4 && K == 4) continue;
      const PlantRealization p = random_plant(rng, n);
      const CostWeights w = CostWeights::scaled_identity(n, n, 1.0, 1.0);
      const SynthesisResult r = synth_hinf(p, w, spiral_poles(K));
      record(r);
      const StateSpace re = real_realization(r.ensemble, w);
      const double bis = kyp_bisection(re.A, re.B, re.C, 1e-7);
      worst_norm = std::max(worst_norm, std::abs(r.gamma - r.norm) / r.norm);
      worst_bis = std::max(worst_bis, std::abs(r.gamma - bis) / bis);
      ++cases;
    }
  }
  report(6, "KYP consistency", worst_norm <= 1e-3 && worst_bis <= 1e-4,
         fmt("%d designs: |gamma-norm|/norm %.2e (<= 1e-3), joint vs bisection %.2e (<= 1e-4)",
             cases, worst_norm, worst_bis));
}

void feasibility() {
  bool raised = false;
  try {
    synth_h2(scalar_plant(1.0, 0.0), CostWeights::scaled_identity(1, 1, 1, 1), spiral_poles(4));
  } catch (const InfeasibleError&) {
    raised = true;
  }
  report(7, "feasibility", worst_residual <= 1e-6 && raised && synthesized > 0,
         fmt("worst residual %.2e over %d designs (<= 1e-6); A=1, B=0 infeasible error %s",
             worst_residual, synthesized, raised ? "raised" : "missing"));
}

void real_transform_check() {
  std::mt19937 rng(99);
  double unit = 0, imag = 0, transfer = 0;
  bool spectrum = true;
  for (int K = 2; K <= 10; K += 2) {
    const PoleSet ps = spiral_poles(K);
    const int n = 3;
    const RealTransform rt = real_transform(ps, n);
    const Eigen::Index N = n * K;
    unit = std::max(unit, (rt.T.adjoint() * rt.T - CMatrix::Identity(N, N)).cwiseAbs().maxCoeff());
    const PlantRealization p = random_plant(rng, n);
    const ResponseEnsemble e = random_feasible(rng, p, ps);
    const CostWeights w = CostWeights::scaled_identity(n, n, 1.0, 1.0);
    const StackedRealization st = stacked_realization(e, w);
    const CMatrix At = rt.T.adjoint() * st.A * rt.T;
    const CMatrix Bt = rt.T.adjoint() * st.B;
    const CMatrix Ct = st.C * rt.T;
    imag = std::max({imag, At.imag().cwiseAbs().maxCoeff(), Bt.imag().cwiseAbs().maxCoeff(),
                     Ct.imag().cwiseAbs().maxCoeff()});
    const StateSpace re = real_realization(e, w);
    for (const Complex& s : random_samples(ps, 20, 5.0, 500 + K)) {
      const CMatrix a = st.evaluate(s), b = re.evaluate(s);
      transfer = std::max(transfer, (a - b).cwiseAbs().maxCoeff() / (1 + a.cwiseAbs().maxCoeff()));
    }
    Eigen::EigenSolver<Matrix> es(rt.A);
    for (Eigen::Index l = 0; l < K; ++l) {
      int hits = 0;
      for (Eigen::Index i = 0; i < N; ++i) hits += std::abs(es.eigenvalues()(i) - ps[l]) < 1e-8;
      spectrum = spectrum && hits == n;
    }
  }
  report(8, "real transform", unit <= 1e-12 && imag <= 1e-10 && transfer <= 1e-8 && spectrum,
         fmt("unitarity %.1e, imaginary parts %.1e, transfer %.1e, spectrum %s", unit, imag,
             transfer, spectrum ? "ok" : "wrong"));
}

void simulation_crosscheck() {
  const ControllerRealization k = realize_controller(chain.result.ensemble, chain.plant);
  const Vector x0 = Vector::Unit(11, 5);
  const SimResult sim = simulate_closed_loop(chain.plant, k, Vector::Zero(11), {x0}, 40.0, 0.02);
  const auto [X, U] = impulse_response(chain.result.ensemble, x0, sim.t);
  const double err = (sim.x - X).cwiseAbs().maxCoeff();
  report(9, "simulation cross-check", err <= 1e-6, fmt("sup-norm gap %.2e (<= 1e-6)", err));
}

void covering_trend() {
  std::vector<Complex> grid;
  for (int i = 0; i < 20; ++i)
    for (int k = 0; k < 20; ++k) grid.push_back(std::polar(0.9 * (i + 1) / 20.0, 2 * M_PI * k / 20.0));
  double first = 0, worst = 0;
  std::string vals;
  for (int n : {4, 8, 16, 32, 64}) {
    const std::vector<Complex> z = spiral_points(2 * n - 2);
    const double v = covering_distance(std::span<const Complex>(z), grid).distance * std::sqrt(n);
    if (n == 4) first = v;
    worst = std::max(worst, v / first);
    vals += fmt("%s%.3f", vals.empty() ? "" : " ", v);
  }
  report(10, "spiral covering", worst <= 1.5,
         fmt("D*sqrt(n) for n=4..64: %s; max ratio %.3f (<= 1.5)", vals.c_str(), worst));
}

void spa_trend() {
  const Complex q1(-1.987757759832601, 2.7121986427148115);
  const Complex q2(-1.1181875524121465, 0.9795917138821653);
  CMatrix c1(2, 2), c2(2, 2), c3(2, 2);
  c1 << Complex(-0.2741378553622176, 0.06014360259743848),
      Complex(-0.8905918387572742, 1.3402152455545335),
      Complex(-0.45467078517172255, -0.49220651855132963),
      Complex(-0.9916465549964624, -0.6204748998199404);
  c2 << Complex(0.10541424899789856, -1.344214547285082),
      Complex(-0.9304680447082047, -0.45761576104021817),
      Complex(-0.02925182246327349, -1.901222739800844),
      Complex(0.6953031944582878, -1.289537739784976);
  c3 << -0.23509113107468127, -1.2674464814437032, 0.2712643588217015, 0.15675108662422516;
  const PoleResidueModel target{{q1, std::conj(q1), q2, std::conj(q2), Complex(-0.8813334852361172, 0)},
                                {c1, c1.conjugate(), c2, c2.conjugate(), c3}};
  double prev = 1e300;
  bool ok = true;
  std::string vals;
  for (int K : {4, 8, 16, 32}) {
    const double e = spa_fit(target, spiral_poles(K)).h2_error;
    ok = ok && e <= 1.05 * prev;
    prev = e;
    vals += fmt("%s%.3g", vals.empty() ? "" : " ", e);
  }
  report(11, "SPA trend", ok, fmt("H2 fit error for K=4,8,16,32: %s", vals.c_str()));
}

}  // namespace

int main() {
  guarded(1, "chain benchmark", chain_benchmark);
  guarded(2, "chain containment", chain_containment);
  guarded(3, "grid H2 trend", grid_h2_trend);
  guarded(4, "grid H-infinity", grid_hinf);
  guarded(5, "H2 oracle equivalence", oracle_equivalence);
  guarded(6, "KYP consistency", kyp_consistency);
  guarded(7, "feasibility", feasibility);
  guarded(8, "real transform", real_transform_check);
  guarded(9, "simulation cross-check", simulation_crosscheck);
  guarded(10, "spiral covering", covering_trend);
  guarded(11, "SPA trend", spa_trend);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures;
}
