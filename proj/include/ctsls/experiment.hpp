#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ctsls/analysis.hpp"
#include "ctsls/h2_synth.hpp"
#include "ctsls/io.hpp"

namespace ctsls {

/// Config file schema (JSON):
///
///   plant       {"type": "chain", "n", "a_diag", "a_off", "b_diag"}
///             | {"type": "grid", "rows", "cols", "inertia", "damping", "coupling",
///                "randomize", "seed"}
///             | {"type": "file", "path"}  (relative to the config file)
///             | {"A", "B", ...}            (inline plant)
///   weights     {"q", "r"} (scaled identities) or {"Q", "R"}; default q = r = 1
///   objective   "h2" | "hinf" | ["h2", "hinf"]
///   K           list of even pole counts >= 2
///   d           list of communication distances >= 1
///   centralized also run the unstructured design (default false)
///   spiral_m    spiral parameter, 0 means K
///   solver      {"feasibility_tol", "sdp_tol", "sdp_max_iter"}
///   hinf_baseline  "riccati" | "sls"
///   simulate    {"impulse_state" (0-based), "t_end", "dt"}; omitted = no simulation
///   record_timing  write wall-clock solve_ms into results.csv (default false,
///                  which writes 0 so the file is byte-reproducible)
///   seed        recorded with the run
struct ExperimentConfig {
  Json plant_spec;
  std::filesystem::path base_dir;
  Json weights_spec;
  std::vector<std::string> objectives{"h2"};
  std::vector<int> K;
  std::vector<int> d;
  bool centralized = false;
  int spiral_m = 0;
  SynthesisOptions solver;
  HinfBaselineMethod hinf_baseline = HinfBaselineMethod::Riccati;
  bool simulate = false;
  int impulse_state = 0;
  double t_end = 30.0;
  double dt = 0.01;
  bool record_timing = false;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on schema violations.
  static ExperimentConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);

  PlantRealization make_plant() const;
  CostWeights make_weights(const PlantRealization& plant) const;
};

/// d < 0 marks the centralized design.
struct CellKey {
  std::string objective;
  int K = 0;
  int d = -1;

  bool centralized() const { return d < 0; }
  std::string tag() const;
  bool operator<(const CellKey& o) const;
};

struct CellResult {
  CellKey key;
  bool ok = false;
  std::string error;
  SynthesisResult result;
  std::optional<SimResult> sim;
  double containment_leak = 0.0;
};

/// Synthesize (and optionally simulate) one cell.
CellResult run_cell(const ExperimentConfig& cfg, const PlantRealization& plant,
                    const CostWeights& weights, const CellKey& key, double baseline,
                    int workers = 1);

/// Centralized optimum for the objective ("h2" or "hinf").
double objective_baseline(const ExperimentConfig& cfg, const PlantRealization& plant,
                          const CostWeights& weights, const std::string& objective);

/// All cells of the sweep, sorted by (objective, K, d) with centralized last.
std::vector<CellKey> sweep_cells(const ExperimentConfig& cfg);

/// Runs every cell with up to `workers` threads and writes into `out_dir`:
/// results.csv, timings.csv, runs/<tag>.json and, when simulating,
/// runs/<tag>_sim.csv plus runs/<tag>_sim.json. Throws InfeasibleError when
/// the plant is not stabilizable; per-cell failures are recorded and skipped.
std::vector<CellResult> run_experiment(const ExperimentConfig& cfg,
                                       const std::filesystem::path& out_dir, int workers,
                                       std::ostream* log = nullptr);

void write_results_csv(std::ostream& os, const std::vector<CellResult>& cells,
                       bool record_timing);

struct VerifyReport {
  double residual = 0.0;
  double conjugacy_error = 0.0;
  double sum_error = 0.0;            // ||sum_l PhiX(l) - I||
  double mask_violation = 0.0;       // NaN when no mask was given
  double spectral_abscissa = 0.0;    // plant + controller, NaN if unrealizable
  double h2_formula = 0.0;           // residue Gram
  double h2_oracle = 0.0;            // Lyapunov on the real realization
  double hinf_sweep = 0.0;           // max sigma over a frequency grid
  double hinf_oracle = 0.0;          // Hamiltonian bisection
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
  Json to_json() const;
};

/// Checks an ensemble against a plant: residual <= tol, conjugacy, mask
/// compliance, internal stability, and agreement of the norm oracles.
VerifyReport verify(const ResponseEnsemble& ensemble, const PlantRealization& plant,
                    const CostWeights& weights, const SparsityMask* mask = nullptr,
                    double tol = 1e-6);

/// CTSLS_WORKERS, else the hardware concurrency (at least 1).
int workers_from_env();

}  // namespace ctsls
