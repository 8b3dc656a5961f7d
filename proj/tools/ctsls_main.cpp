#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "ctsls/experiment.hpp"

namespace fs = std::filesystem;
using namespace ctsls;

namespace {

struct Overrides {
  std::optional<int> poles;
  std::optional<int> spiral_m;
  std::optional<std::string> objective;
  std::optional<int> workers;
};

fs::path preset_path(const std::string& preset) {
  const std::string file = preset + ".json";
  for (const fs::path& dir : {fs::path("configs"), fs::path(CTSLS_CONFIG_DIR)}) {
    if (fs::exists(dir / file)) return dir / file;
  }
  throw InvalidArgument("no config found for preset " + preset);
}

ExperimentConfig load_config(const std::string& path, const Overrides& o) {
  Json j = read_json(path);
  if (o.poles) j["K"] = *o.poles;
  if (o.spiral_m) j["spiral_m"] = *o.spiral_m;
  if (o.objective) j["objective"] = *o.objective;
  return ExperimentConfig::from_json(j, fs::path(path).parent_path());
}

int report(const std::vector<CellResult>& cells) {
  int failed = 0;
  for (const auto& c : cells) {
    if (!c.ok) {
      ++failed;
      std::cerr << c.key.tag() << " failed: " << c.error << '\n';
    }
  }
  if (failed) std::cerr << failed << " of " << cells.size() << " cells failed\n";
  return 0;
}

int run(ExperimentConfig cfg, const std::string& out, const Overrides& o, bool single) {
  if (single && sweep_cells(cfg).size() != 1) {
    throw InvalidArgument("synth and simulate need exactly one (objective, K, d) cell");
  }
  const int workers = o.workers ? *o.workers : workers_from_env();
  const auto cells = run_experiment(cfg, out, workers, &std::cerr);
  if (single && cells.size() == 1 && cells[0].ok) {
    write_json(fs::path(out) / "result.json", result_to_json(cells[0].result));
    if (cells[0].sim) {
      std::ofstream sim(fs::path(out) / "sim.csv");
      write_csv(sim, *cells[0].sim);
      write_json(fs::path(out) / "sim_summary.json",
                 sim_summary_to_json(*cells[0].sim, cells[0].containment_leak));
    }
  }
  if (single && !cells.empty() && !cells[0].ok) {
    std::cerr << cells[0].error << '\n';
    return 1;
  }
  return report(cells);
}

int run_verify(const std::string& config, std::string ensemble, std::string plant,
               std::string mask, std::string weights, const std::string& out) {
  Json cfg = config.empty() ? Json::object() : read_json(config);
  const fs::path base = config.empty() ? fs::path() : fs::path(config).parent_path();
  auto resolve = [&](const std::string& flag, const char* key) -> std::optional<Json> {
    if (!flag.empty()) {
      // a bare integer mask means "supports at this distance"
      if (std::string(key) == "mask" && flag.find_first_not_of("0123456789") == std::string::npos) {
        return Json(std::stoi(flag));
      }
      return read_json(flag);
    }
    if (!cfg.contains(key)) return std::nullopt;
    const Json& v = cfg.at(key);
    if (v.is_string()) {
      fs::path p = v.get<std::string>();
      return read_json(p.is_relative() ? base / p : p);
    }
    return v;
  };
  const auto je = resolve(ensemble, "ensemble");
  const auto jp = resolve(plant, "plant");
  if (!je || !jp) throw InvalidArgument("verify needs an ensemble and a plant");
  const ResponseEnsemble ens = ensemble_from_json(*je);
  PlantRealization p = jp->contains("A") ? plant_from_json(*jp)
                                         : ExperimentConfig::from_json({{"plant", *jp}}, base).make_plant();
  const auto jw = resolve(weights, "weights");
  const CostWeights w =
      jw ? ExperimentConfig::from_json({{"plant", *jp}, {"weights", *jw}}, base).make_weights(p)
         : CostWeights::scaled_identity(p.num_states(), p.num_inputs(), 1.0, 1.0);
  std::optional<SparsityMask> m;
  if (const auto jm = resolve(mask, "mask")) {
    m = jm->is_number_integer() ? build_supports(p, jm->get<int>()) : mask_from_json(*jm);
  }
  const VerifyReport rep = verify(ens, p, w, m ? &*m : nullptr);
  const Json j = rep.to_json();
  std::cout << j.dump(2) << '\n';
  if (!out.empty()) {
    fs::create_directories(out);
    write_json(fs::path(out) / "verify.json", j);
  }
  return rep.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time system level synthesis toolkit"};
  app.require_subcommand(1);

  std::string config, out = "out";
  Overrides o;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config, "experiment config (JSON)");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--poles", o.poles, "pole count K (overrides the config)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--spiral-m", o.spiral_m, "spiral parameter m (0 means K)");
    sub->add_option("--objective", o.objective, "h2 or hinf")
        ->check(CLI::IsMember({"h2", "hinf"}));
    sub->add_option("--workers", o.workers, "worker threads (default CTSLS_WORKERS)")
        ->check(CLI::PositiveNumber);
  };

  auto* synth = app.add_subcommand("synth", "synthesize one design");
  add_common(synth, true);
  auto* simulate = app.add_subcommand("simulate", "synthesize and simulate the impulse case");
  add_common(simulate, true);
  auto* sweep = app.add_subcommand("sweep", "sweep over K and d");
  add_common(sweep, true);

  std::vector<std::pair<std::string, CLI::App*>> presets;
  for (const char* name : {"chain", "grid-h2", "grid-hinf"}) {
    auto* sub = app.add_subcommand(std::string("reproduce-") + name,
                                   std::string("run the ") + name + " preset");
    add_common(sub, false);
    presets.emplace_back(std::string("reproduce-") + name, sub);
  }

  std::string ens_file, plant_file, mask_file, weights_file;
  auto* verify_cmd = app.add_subcommand("verify", "check an ensemble against a plant");
  verify_cmd->add_option("--config", config, "JSON naming ensemble, plant, mask, weights");
  verify_cmd->add_option("--ensemble", ens_file, "ensemble or synthesis result JSON");
  verify_cmd->add_option("--plant", plant_file, "plant JSON");
  verify_cmd->add_option("--mask", mask_file, "mask JSON, or a communication distance d");
  verify_cmd->add_option("--weights", weights_file, "weights JSON");
  verify_cmd->add_option("--out", out, "write verify.json here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify_cmd) {
      return run_verify(config, ens_file, plant_file, mask_file, weights_file,
                        verify_cmd->count("--out") ? out : std::string());
    }
    if (*synth) return run(load_config(config, o), out, o, true);
    if (*simulate) {
      ExperimentConfig cfg = load_config(config, o);
      cfg.simulate = true;
      return run(cfg, out, o, true);
    }
    if (*sweep) return run(load_config(config, o), out, o, false);
    for (const auto& [name, sub] : presets) {
      if (*sub) {
        const std::string path = config.empty() ? preset_path(name).string() : config;
        return run(load_config(path, o), out, o, false);
      }
    }
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
