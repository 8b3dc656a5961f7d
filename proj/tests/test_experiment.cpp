#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ctsls/experiment.hpp"
#include "ctsls/io.hpp"
#include "test_util.hpp"

using namespace ctsls;
using namespace ctsls::test;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ctsls_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(CTSLS_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Json chain_config() {
  return {{"plant", {{"type", "chain"}, {"n", 11}}},
          {"weights", {{"q", 1.0}, {"r", 10.0}}},
          {"objective", "h2"},
          {"K", {4}},
          {"d", {2}}};
}

}  // namespace

TEST(Io, MatrixRoundTrip) {
  Matrix M(2, 3);
  M << 1, 2, 3, 4, 5, 6.5;
  EXPECT_EQ(matrix_from_json(matrix_to_json(M)), M);
  EXPECT_EQ(matrix_from_json(Json::parse("[1, 2, 3, 4, 5, 6.5]"), 2), M);
  EXPECT_EQ(matrix_from_json(Json::parse("[1, 0, 0, 1]")), Matrix::Identity(2, 2));
  EXPECT_THROW(matrix_from_json(Json::parse("[[1, 2], [3]]")), InvalidArgument);
  EXPECT_THROW(matrix_from_json(Json::parse("[1, 2, 3]")), InvalidArgument);
  CMatrix C(1, 2);
  C << Complex(1, -2), Complex(0.5, 0);
  EXPECT_EQ(cmatrix_from_json(cmatrix_to_json(C)), C);
}

TEST(Io, EnsembleRoundTripPreservesCanonicalOrder) {
  std::mt19937 rng(1);
  const PlantRealization p = random_plant(rng, 2);
  const ResponseEnsemble e = random_feasible(rng, p, spiral_poles(6));
  Json j = ensemble_to_json(e);
  const ResponseEnsemble back = ensemble_from_json(Json::parse(j.dump()));
  ASSERT_EQ(back.poles.size(), e.poles.size());
  for (size_t l = 0; l < e.PhiX.size(); ++l) {
    EXPECT_EQ(back.poles[Eigen::Index(l)], e.poles[Eigen::Index(l)]);
    EXPECT_EQ(back.PhiX[l], e.PhiX[l]);
    EXPECT_EQ(back.PhiU[l], e.PhiU[l]);
  }
  // listing the poles in another order moves the coefficients with them
  std::swap(j["poles"][0], j["poles"][2]);
  std::swap(j["PhiX"][0], j["PhiX"][2]);
  std::swap(j["PhiU"][0], j["PhiU"][2]);
  const ResponseEnsemble shuffled = ensemble_from_json(j);
  EXPECT_LT(residual(shuffled, p, random_samples(shuffled.poles, 20)), 1e-10);
  for (Eigen::Index l = 0; l < shuffled.poles.size(); ++l) {
    for (Eigen::Index k = 0; k < e.poles.size(); ++k) {
      if (e.poles[k] == shuffled.poles[l]) EXPECT_EQ(shuffled.PhiX[size_t(l)], e.PhiX[size_t(k)]);
    }
  }
}

TEST(Io, PlantMaskWeights) {
  const PlantRealization g = make_grid({});
  const PlantRealization back = plant_from_json(plant_to_json(g));
  EXPECT_EQ(back.A(), g.A());
  EXPECT_EQ(back.state_subsystems(), g.state_subsystems());
  const SparsityMask m = build_supports(g, 2);
  const SparsityMask mb = mask_from_json(mask_to_json(m));
  EXPECT_EQ(mb.Sx, m.Sx);
  EXPECT_EQ(mb.Su, m.Su);
  const CostWeights w = CostWeights::scaled_identity(2, 1, 3.0, 4.0);
  EXPECT_EQ(weights_from_json(weights_to_json(w)).R, w.R);
  EXPECT_THROW(plant_from_json(Json::parse(R"({"B": [[1]]})")), InvalidArgument);
}

TEST(Io, ResultJsonWritesNullForNonFinite) {
  SynthesisResult r;
  r.ensemble = solve_feasible(assemble(scalar_plant(0, 1), real_poles({-1.0})));
  const Json j = result_to_json(r);
  EXPECT_TRUE(j.at("normalized_cost").is_null());
  EXPECT_FALSE(j.contains("gamma"));
  r.has_gamma = true;
  r.gamma = 1.5;
  EXPECT_EQ(result_to_json(r).at("gamma").get<double>(), 1.5);
}

TEST(Config, Validation) {
  Json j = chain_config();
  EXPECT_NO_THROW(ExperimentConfig::from_json(j));
  for (auto [key, bad] : std::vector<std::pair<std::string, Json>>{
           {"K", Json::array({3})}, {"d", Json::array({0})}, {"objective", "h3"},
           {"hinf_baseline", "lmi"}, {"K", "four"}}) {
    Json b = j;
    b[key] = bad;
    EXPECT_THROW(ExperimentConfig::from_json(b), InvalidArgument) << key;
  }
  Json np = j;
  np.erase("plant");
  EXPECT_THROW(ExperimentConfig::from_json(np), InvalidArgument);
}

TEST(Config, SweepOrdering) {
  Json j = chain_config();
  j["objective"] = {"hinf", "h2"};
  j["K"] = {4, 2};
  j["d"] = {3, 1};
  j["centralized"] = true;
  const auto cells = sweep_cells(ExperimentConfig::from_json(j));
  ASSERT_EQ(cells.size(), 12u);
  EXPECT_EQ(cells[0].tag(), "h2_K2_d1");
  EXPECT_EQ(cells[2].tag(), "h2_K2_central");
  EXPECT_EQ(cells[11].tag(), "hinf_K4_central");
}

TEST(Experiment, EmptySweepWritesHeaderOnly) {
  Json j = chain_config();
  j["K"] = Json::array();
  const fs::path out = scratch("empty");
  const auto cells = run_experiment(ExperimentConfig::from_json(j), out, 1);
  EXPECT_TRUE(cells.empty());
  EXPECT_EQ(slurp(out / "results.csv"),
            "objective,K,d,norm,baseline,normalized_cost,residual,gamma,solve_ms\n");
}

TEST(Experiment, ChainRowAndReproducibility) {
  Json j = chain_config();
  j["d"] = {1, 2};
  j["centralized"] = true;
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  const fs::path a = scratch("rep_a"), b = scratch("rep_b");
  const auto cells = run_experiment(cfg, a, 2);
  run_experiment(cfg, b, 1);
  EXPECT_EQ(slurp(a / "results.csv"), slurp(b / "results.csv"));
  ASSERT_EQ(cells.size(), 3u);
  for (const auto& c : cells) {
    ASSERT_TRUE(c.ok) << c.error;
    EXPECT_GE(c.result.normalized_cost, 1 - 1e-6);
    EXPECT_TRUE(fs::exists(a / "runs" / (c.key.tag() + ".json")));
  }
  EXPECT_NEAR(cells[1].result.normalized_cost, 1.054212274, 1e-8);
  EXPECT_LE(cells[2].result.norm, cells[1].result.norm);
  const std::string csv = slurp(a / "results.csv");
  EXPECT_NE(csv.find("\nh2,4,2,12.92337882,12.25880133,1.054212274,"), std::string::npos) << csv;
  EXPECT_NE(csv.find("\nh2,4,inf,"), std::string::npos);
}

TEST(Experiment, UnstabilizablePlantFails) {
  Json j = chain_config();
  j["plant"] = {{"A", {{1.0}}}, {"B", {{0.0}}}};
  EXPECT_THROW(run_experiment(ExperimentConfig::from_json(j), scratch("unstab"), 1), InfeasibleError);
}

TEST(Experiment, SolverFailureIsRecordedPerCell) {
  Json j = chain_config();
  j["objective"] = "hinf";
  j["plant"] = {{"type", "chain"}, {"n", 3}};
  j["K"] = {2};
  j["d"] = {1};
  j["solver"] = {{"sdp_max_iter", 1}};
  const fs::path out = scratch("solverfail");
  const auto cells = run_experiment(ExperimentConfig::from_json(j), out, 1);
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_FALSE(cells[0].ok);
  const std::string csv = slurp(out / "results.csv");
  EXPECT_NE(csv.find("hinf,2,1,nan,nan,nan,nan,nan,0"), std::string::npos) << csv;
}

TEST(Verify, SynthesizedChainPasses) {
  const PlantRealization p = make_chain(11, 0.6, 0.4, 1.0);
  const CostWeights w = CostWeights::scaled_identity(11, 11, 1, 10);
  const SparsityMask m = build_supports(p, 2);
  const SynthesisResult r = synth_h2(p, w, spiral_poles(4), &m);
  const VerifyReport rep = verify(r.ensemble, p, w, &m);
  EXPECT_TRUE(rep.ok()) << rep.to_json().dump();
  EXPECT_LT(rep.spectral_abscissa, 0);
  EXPECT_NEAR(rep.h2_formula, r.norm, 1e-10 * r.norm);
  EXPECT_GE(rep.hinf_oracle, rep.hinf_sweep * (1 - 1e-8));

  ResponseEnsemble bad = r.ensemble;
  bad.PhiU[1](3, 3) += 0.05;
  bad.PhiU[0](3, 3) += 0.05;  // keep the pair conjugate
  const VerifyReport br = verify(bad, p, w, &m);
  EXPECT_FALSE(br.ok());
  EXPECT_GT(br.residual, 1e-6);

  EXPECT_THROW(verify(r.ensemble, make_chain(5, 0.6, 0.4, 1.0), w), InvalidArgument);
}

TEST(Cli, EndToEnd) {
  const fs::path dir = scratch("cli");
  Json cfg = chain_config();
  cfg["simulate"] = {{"impulse_state", 5}, {"t_end", 20.0}, {"dt", 0.05}};
  write_json(dir / "chain.json", cfg);
  EXPECT_EQ(cli("synth --config " + (dir / "chain.json").string() + " --out " + (dir / "synth").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "synth" / "result.json"));
  EXPECT_TRUE(fs::exists(dir / "synth" / "sim_summary.json"));
  const Json sum = read_json(dir / "synth" / "sim_summary.json");
  EXPECT_LE(sum.at("containment_max_leak").get<double>(), 1e-8);

  write_json(dir / "verify.json", {{"ensemble", "synth/result.json"},
                                   {"plant", {{"type", "chain"}, {"n", 11}}},
                                   {"weights", {{"q", 1.0}, {"r", 10.0}}},
                                   {"mask", 2}});
  EXPECT_EQ(cli("verify --config " + (dir / "verify.json").string()), 0);

  Json res = read_json(dir / "synth" / "result.json");
  res["PhiU"][0][2][2][0] = res["PhiU"][0][2][2][0].get<double>() + 0.1;
  write_json(dir / "synth" / "result.json", res);
  EXPECT_NE(cli("verify --config " + (dir / "verify.json").string()), 0);

  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_NE(cli("sweep --config " + (dir / "broken.json").string()), 0);
  EXPECT_NE(cli("verify --ensemble " + (dir / "broken.json").string() + " --plant " +
                (dir / "broken.json").string()),
            0);

  Json empty = chain_config();
  empty["d"] = Json::array();
  write_json(dir / "empty.json", empty);
  EXPECT_EQ(cli("sweep --config " + (dir / "empty.json").string() + " --out " + (dir / "e").string()), 0);
  EXPECT_EQ(slurp(dir / "e" / "results.csv"),
            "objective,K,d,norm,baseline,normalized_cost,residual,gamma,solve_ms\n");

  Json unstab = chain_config();
  unstab["plant"] = {{"A", {{1.0}}}, {"B", {{0.0}}}};
  write_json(dir / "unstab.json", unstab);
  EXPECT_NE(cli("sweep --config " + (dir / "unstab.json").string() + " --out " + (dir / "u").string()), 0);
}
