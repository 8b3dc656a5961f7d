#include "ctsls/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "ctsls/hinf_synth.hpp"
#include "ctsls/simulate.hpp"

namespace ctsls {

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

template <class T>
std::vector<T> list_of(const Json& j, const char* key) {
  if (!j.contains(key)) return {};
  const Json& v = j.at(key);
  if (v.is_array()) return v.get<std::vector<T>>();
  return {v.get<T>()};
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const Json& j,
                                             const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  ExperimentConfig c;
  try {
    if (!j.contains("plant")) throw InvalidArgument("config needs a plant");
    c.plant_spec = j.at("plant");
    c.base_dir = base_dir;
    c.weights_spec = j.value("weights", Json::object());
    if (j.contains("objective")) c.objectives = list_of<std::string>(j, "objective");
    c.K = list_of<int>(j, "K");
    c.d = list_of<int>(j, "d");
    c.centralized = j.value("centralized", false);
    c.spiral_m = j.value("spiral_m", 0);
    if (j.contains("solver")) {
      const Json& s = j.at("solver");
      c.solver.feasibility_tol = s.value("feasibility_tol", c.solver.feasibility_tol);
      c.solver.sdp_tol = s.value("sdp_tol", c.solver.sdp_tol);
      c.solver.sdp_max_iter = s.value("sdp_max_iter", c.solver.sdp_max_iter);
    }
    const std::string hb = j.value("hinf_baseline", std::string("riccati"));
    if (hb == "riccati") {
      c.hinf_baseline = HinfBaselineMethod::Riccati;
    } else if (hb == "sls") {
      c.hinf_baseline = HinfBaselineMethod::Sls;
    } else {
      throw InvalidArgument("hinf_baseline must be riccati or sls");
    }
    if (j.contains("simulate") && !j.at("simulate").is_null()) {
      const Json& s = j.at("simulate");
      c.simulate = true;
      c.impulse_state = s.value("impulse_state", 0);
      c.t_end = s.value("t_end", c.t_end);
      c.dt = s.value("dt", c.dt);
    }
    c.record_timing = j.value("record_timing", false);
    c.seed = j.value("seed", std::uint64_t{0});
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  for (const auto& o : c.objectives) {
    if (o != "h2" && o != "hinf") throw InvalidArgument("objective must be h2 or hinf");
  }
  for (int k : c.K) {
    if (k < 2 || k % 2) throw InvalidArgument("K values must be even and >= 2");
  }
  for (int d : c.d) {
    if (d < 1) throw InvalidArgument("d values must be >= 1");
  }
  if (c.spiral_m < 0) throw InvalidArgument("spiral_m must be >= 0");
  if (c.simulate && (!(c.dt > 0) || !(c.t_end > 0))) {
    throw InvalidArgument("simulation needs dt > 0 and t_end > 0");
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_json(read_json(path), path.parent_path());
}

PlantRealization ExperimentConfig::make_plant() const {
  const Json& p = plant_spec;
  if (p.contains("A")) return plant_from_json(p);
  const std::string type = p.value("type", std::string());
  if (type == "chain") {
    return make_chain(p.value("n", 11), p.value("a_diag", 0.6), p.value("a_off", 0.4),
                      p.value("b_diag", 1.0));
  }
  if (type == "grid") {
    GridParams g;
    g.rows = p.value("rows", g.rows);
    g.cols = p.value("cols", g.cols);
    g.inertia = p.value("inertia", g.inertia);
    g.damping = p.value("damping", g.damping);
    g.coupling = p.value("coupling", g.coupling);
    g.randomize = p.value("randomize", g.randomize);
    g.seed = p.value("seed", seed);
    return make_grid(g);
  }
  if (type == "file") {
    std::filesystem::path path = p.at("path").get<std::string>();
    if (path.is_relative()) path = base_dir / path;
    return plant_from_json(read_json(path));
  }
  throw InvalidArgument("plant type must be chain, grid or file");
}

CostWeights ExperimentConfig::make_weights(const PlantRealization& plant) const {
  const Json& w = weights_spec;
  if (w.contains("Q") || w.contains("R")) return weights_from_json(w);
  return CostWeights::scaled_identity(plant.num_states(), plant.num_inputs(), w.value("q", 1.0),
                                      w.value("r", 1.0));
}

std::string CellKey::tag() const {
  return objective + "_K" + std::to_string(K) + (centralized() ? "_central" : "_d" + std::to_string(d));
}

bool CellKey::operator<(const CellKey& o) const {
  if (objective != o.objective) return objective < o.objective;
  if (K != o.K) return K < o.K;
  // centralized sorts after every finite distance
  const long a = d < 0 ? std::numeric_limits<long>::max() : d;
  const long b = o.d < 0 ? std::numeric_limits<long>::max() : o.d;
  return a < b;
}

std::vector<CellKey> sweep_cells(const ExperimentConfig& cfg) {
  std::vector<CellKey> cells;
  for (const auto& obj : cfg.objectives) {
    for (int k : cfg.K) {
      for (int d : cfg.d) cells.push_back({obj, k, d});
      if (cfg.centralized) cells.push_back({obj, k, -1});
    }
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end(),
                          [](const CellKey& a, const CellKey& b) { return !(a < b) && !(b < a); }),
              cells.end());
  return cells;
}

double objective_baseline(const ExperimentConfig& cfg, const PlantRealization& plant,
                          const CostWeights& weights, const std::string& objective) {
  if (objective == "h2") return lqr_baseline(plant, weights).h2_cost;
  HinfBaselineOptions opt;
  opt.method = cfg.hinf_baseline;
  return hinf_baseline(plant, weights, opt);
}

CellResult run_cell(const ExperimentConfig& cfg, const PlantRealization& plant,
                    const CostWeights& weights, const CellKey& key, double baseline,
                    int workers) {
  CellResult cell;
  cell.key = key;
  try {
    const PoleSet poles = spiral_poles(key.K, cfg.spiral_m);
    std::optional<SparsityMask> mask;
    if (!key.centralized()) mask = build_supports(plant, key.d);
    SynthesisOptions opt = cfg.solver;
    opt.workers = std::max(1, workers);
    const SparsityMask* mp = mask ? &*mask : nullptr;
    cell.result = key.objective == "h2" ? synth_h2(plant, weights, poles, mp, opt)
                                        : synth_hinf(plant, weights, poles, mp, opt);
    attach_baseline(cell.result, baseline);
    if (cell.result.residual > cfg.solver.feasibility_tol) {
      throw InfeasibleError("residual " + fmt(cell.result.residual) + " above tolerance");
    }
    if (cfg.simulate) {
      const Eigen::Index n = plant.num_states();
      if (cfg.impulse_state < 0 || cfg.impulse_state >= n) {
        throw InvalidArgument("impulse_state out of range");
      }
      const ControllerRealization k = realize_controller(cell.result.ensemble, plant);
      Vector x0 = Vector::Zero(n);
      x0(cfg.impulse_state) = 1.0;
      cell.sim = simulate_closed_loop(plant, k, Vector::Zero(n), Disturbance{x0}, cfg.t_end,
                                      cfg.dt);
      std::vector<bool> allowed(size_t(n), true);
      if (mask) {
        for (Eigen::Index i = 0; i < n; ++i) allowed[size_t(i)] = mask->Sx(i, cfg.impulse_state);
      }
      cell.containment_leak = containment_leak(*cell.sim, allowed);
    }
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

void write_results_csv(std::ostream& os, const std::vector<CellResult>& cells,
                       bool record_timing) {
  os << "objective,K,d,norm,baseline,normalized_cost,residual,gamma,solve_ms\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& c : cells) {
    const SynthesisResult& r = c.result;
    os << c.key.objective << ',' << c.key.K << ',' << (c.key.centralized() ? "inf" : std::to_string(c.key.d))
       << ',' << fmt(c.ok ? r.norm : nan) << ',' << fmt(c.ok ? r.baseline : nan) << ','
       << fmt(c.ok ? r.normalized_cost : nan) << ',' << fmt(c.ok ? r.residual : nan) << ','
       << (c.key.objective == "hinf" ? fmt(c.ok ? r.gamma : nan) : std::string()) << ','
       << fmt(record_timing ? r.solve_ms : 0.0) << '\n';
  }
}

std::vector<CellResult> run_experiment(const ExperimentConfig& cfg,
                                       const std::filesystem::path& out_dir, int workers,
                                       std::ostream* log) {
  const PlantRealization plant = cfg.make_plant();
  const CostWeights weights = cfg.make_weights(plant);
  if (weights.Q.rows() != plant.num_states() || weights.R.rows() != plant.num_inputs()) {
    throw InvalidArgument("weights do not match the plant");
  }
  if (!is_stabilizable(plant)) throw InfeasibleError("plant (A, B) is not stabilizable");

  const std::vector<CellKey> keys = sweep_cells(cfg);
  std::filesystem::create_directories(out_dir / "runs");

  std::map<std::string, double> baselines;
  for (const auto& k : keys) {
    if (!baselines.count(k.objective)) {
      baselines[k.objective] = objective_baseline(cfg, plant, weights, k.objective);
    }
  }

  std::vector<CellResult> cells(keys.size());
  workers = std::max(1, workers);
  const int pool = std::min<int>(workers, int(keys.size()));
  const int inner = pool > 0 ? std::max(1, workers / pool) : 1;
  std::atomic<size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (size_t i = next++; i < keys.size(); i = next++) {
      cells[i] = run_cell(cfg, plant, weights, keys[i], baselines[keys[i].objective], inner);
      if (log) {
        std::lock_guard<std::mutex> lock(log_mutex);
        *log << keys[i].tag() << ": "
             << (cells[i].ok ? "normalized cost " + fmt(cells[i].result.normalized_cost)
                             : "failed: " + cells[i].error)
             << '\n';
      }
    }
  };
  std::vector<std::thread> threads;
  for (int t = 1; t < pool; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  // Single collector: everything below runs in sorted cell order.
  {
    std::ofstream csv(out_dir / "results.csv");
    write_results_csv(csv, cells, cfg.record_timing);
  }
  {
    std::ofstream timing(out_dir / "timings.csv");
    timing << "objective,K,d,solve_ms\n";
    for (const auto& c : cells) {
      timing << c.key.objective << ',' << c.key.K << ','
             << (c.key.centralized() ? "inf" : std::to_string(c.key.d)) << ','
             << fmt(c.result.solve_ms) << '\n';
    }
  }
  for (const auto& c : cells) {
    const auto base = out_dir / "runs" / c.key.tag();
    if (!c.ok) {
      write_json(base.string() + ".json", Json{{"error", c.error}});
      continue;
    }
    write_json(base.string() + ".json", result_to_json(c.result));
    if (c.sim) {
      std::ofstream sim(base.string() + "_sim.csv");
      write_csv(sim, *c.sim);
      write_json(base.string() + "_sim.json", sim_summary_to_json(*c.sim, c.containment_leak));
    }
  }
  return cells;
}

int workers_from_env() {
  if (const char* env = std::getenv("CTSLS_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return int(v);
    throw InvalidArgument("CTSLS_WORKERS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

Json VerifyReport::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  return {{"residual", num(residual)},
          {"conjugacy_error", num(conjugacy_error)},
          {"sum_error", num(sum_error)},
          {"mask_violation", num(mask_violation)},
          {"spectral_abscissa", num(spectral_abscissa)},
          {"h2_formula", num(h2_formula)},
          {"h2_oracle", num(h2_oracle)},
          {"hinf_sweep", num(hinf_sweep)},
          {"hinf_oracle", num(hinf_oracle)},
          {"ok", ok()},
          {"failures", failures}};
}

VerifyReport verify(const ResponseEnsemble& ens, const PlantRealization& plant,
                    const CostWeights& weights, const SparsityMask* mask, double tol) {
  ens.validate();
  if (ens.num_states() != plant.num_states() || ens.num_inputs() != plant.num_inputs()) {
    throw InvalidArgument("ensemble is " + std::to_string(ens.num_states()) + "x" +
                          std::to_string(ens.num_inputs()) + " but the plant has n = " +
                          std::to_string(plant.num_states()) +
                          ", m = " + std::to_string(plant.num_inputs()));
  }
  VerifyReport r;
  const Eigen::Index n = ens.num_states();
  r.residual = residual(ens, plant, random_samples(ens.poles, 100));
  if (r.residual > tol) r.failures.push_back("residual " + fmt(r.residual));
  r.conjugacy_error = ens.conjugacy_error();
  if (r.conjugacy_error > tol) r.failures.push_back("conjugacy " + fmt(r.conjugacy_error));
  CMatrix sum = CMatrix::Zero(n, n);
  for (const auto& P : ens.PhiX) sum += P;
  r.sum_error = (sum - CMatrix::Identity(n, n)).norm();
  if (r.sum_error > tol) r.failures.push_back("sum of PhiX residues " + fmt(r.sum_error));
  r.mask_violation = std::numeric_limits<double>::quiet_NaN();
  if (mask) {
    r.mask_violation = mask_violation(ens, *mask);
    if (r.mask_violation > 0.0) r.failures.push_back("mask violation " + fmt(r.mask_violation));
  }
  r.spectral_abscissa = std::numeric_limits<double>::quiet_NaN();
  if (r.failures.empty()) {
    const ControllerRealization k = realize_controller(ens, tol);
    r.spectral_abscissa = spectral_abscissa(closed_loop_matrix(plant, k));
    if (!(r.spectral_abscissa < 0)) {
      r.failures.push_back("closed loop not internally stable, abscissa " +
                           fmt(r.spectral_abscissa));
    }
  }
  r.h2_formula = h2_norm(ens, weights);
  const StateSpace ss = real_realization(ens, weights);
  r.h2_oracle = h2_norm_ss(ss);
  if (std::abs(r.h2_formula - r.h2_oracle) > 1e-8 * std::max(1.0, r.h2_oracle)) {
    r.failures.push_back("H2 formula and oracle disagree");
  }
  Vector omega(2001);
  omega(0) = 0.0;
  omega.tail(2000) = Vector::LinSpaced(2000, -3.0, 3.0).unaryExpr([](double e) {
    return std::pow(10.0, e);
  });
  r.hinf_sweep = sigma_max_sweep(ss, omega).maxCoeff();
  r.hinf_oracle = hinf_norm_ss(ss);
  if (r.hinf_oracle < r.hinf_sweep * (1 - 1e-8)) {
    r.failures.push_back("H-infinity oracle below a sampled gain");
  }
  return r;
}

}  // namespace ctsls
