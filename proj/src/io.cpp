#include "ctsls/io.hpp"

#include <cmath>
#include <fstream>

namespace ctsls {

namespace {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw InvalidArgument(std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

Complex complex_from_json(const Json& e) {
  if (e.is_number()) return {e.get<double>(), 0.0};
  if (!e.is_array() || e.size() != 2) throw InvalidArgument("complex entries are [re, im]");
  return {e[0].get<double>(), e[1].get<double>()};
}

}  // namespace

Json matrix_to_json(const Eigen::Ref<const Matrix>& M) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index k = 0; k < M.cols(); ++k) r.push_back(M(i, k));
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, Eigen::Index rows) {
  if (!j.is_array()) throw InvalidArgument("matrix must be an array");
  if (j.empty()) return Matrix(std::max<Eigen::Index>(rows, 0), 0);
  if (j[0].is_array()) {
    const auto r = Eigen::Index(j.size()), c = Eigen::Index(j[0].size());
    Matrix M(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      if (Eigen::Index(j[size_t(i)].size()) != c) throw InvalidArgument("ragged matrix");
      for (Eigen::Index k = 0; k < c; ++k) M(i, k) = j[size_t(i)][size_t(k)].get<double>();
    }
    return M;
  }
  const auto len = Eigen::Index(j.size());
  if (rows < 0) {
    rows = Eigen::Index(std::llround(std::sqrt(double(len))));
    if (rows * rows != len) throw InvalidArgument("flat matrix is not square");
  }
  if (rows == 0 || len % rows != 0) throw InvalidArgument("flat matrix length mismatch");
  const Eigen::Index c = len / rows;
  Matrix M(rows, c);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < c; ++k) M(i, k) = j[size_t(i * c + k)].get<double>();
  }
  return M;
}

Json cmatrix_to_json(const CMatrix& M) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index k = 0; k < M.cols(); ++k) r.push_back({M(i, k).real(), M(i, k).imag()});
    rows.push_back(std::move(r));
  }
  return rows;
}

CMatrix cmatrix_from_json(const Json& j) {
  if (!j.is_array()) throw InvalidArgument("matrix must be an array");
  if (j.empty()) return CMatrix(0, 0);
  const auto r = Eigen::Index(j.size()), c = Eigen::Index(j[0].size());
  CMatrix M(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (!j[size_t(i)].is_array() || Eigen::Index(j[size_t(i)].size()) != c) {
      throw InvalidArgument("ragged complex matrix");
    }
    for (Eigen::Index k = 0; k < c; ++k) M(i, k) = complex_from_json(j[size_t(i)][size_t(k)]);
  }
  return M;
}

Json bool_matrix_to_json(const BoolMatrix& M) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index k = 0; k < M.cols(); ++k) r.push_back(M(i, k) ? 1 : 0);
    rows.push_back(std::move(r));
  }
  return rows;
}

BoolMatrix bool_matrix_from_json(const Json& j) {
  const Matrix M = matrix_from_json(j);
  BoolMatrix out(M.rows(), M.cols());
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index k = 0; k < M.cols(); ++k) {
      if (M(i, k) != 0.0 && M(i, k) != 1.0) throw InvalidArgument("mask entries must be 0 or 1");
      out(i, k) = M(i, k) != 0.0;
    }
  }
  return out;
}

Json plant_to_json(const PlantRealization& plant) {
  return {{"A", matrix_to_json(plant.A())},
          {"B", matrix_to_json(plant.B())},
          {"state_subsystems", plant.state_subsystems()},
          {"input_subsystems", plant.input_subsystems()}};
}

PlantRealization plant_from_json(const Json& j) {
  Matrix A = matrix_from_json(field(j, "A"));
  Matrix B = matrix_from_json(field(j, "B"), A.rows());
  if (j.contains("state_subsystems") || j.contains("input_subsystems")) {
    return PlantRealization(std::move(A), std::move(B),
                            field(j, "state_subsystems").get<std::vector<int>>(),
                            field(j, "input_subsystems").get<std::vector<int>>());
  }
  return PlantRealization(std::move(A), std::move(B));
}

Json weights_to_json(const CostWeights& w) {
  return {{"Q", matrix_to_json(w.Q)}, {"R", matrix_to_json(w.R)}};
}

CostWeights weights_from_json(const Json& j) {
  return CostWeights(matrix_from_json(field(j, "Q")), matrix_from_json(field(j, "R")));
}

Json poles_to_json(const PoleSet& poles) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < poles.size(); ++i) out.push_back({poles[i].real(), poles[i].imag()});
  return out;
}

PoleSet poles_from_json(const Json& j) {
  if (!j.is_array()) throw InvalidArgument("poles must be a list of [re, im]");
  std::vector<Complex> p;
  for (const auto& e : j) p.push_back(complex_from_json(e));
  return PoleSet::from_list(p);
}

Json ensemble_to_json(const ResponseEnsemble& ens) {
  Json px = Json::array(), pu = Json::array();
  for (const auto& M : ens.PhiX) px.push_back(cmatrix_to_json(M));
  for (const auto& M : ens.PhiU) pu.push_back(cmatrix_to_json(M));
  return {{"poles", poles_to_json(ens.poles)}, {"PhiX", px}, {"PhiU", pu}};
}

ResponseEnsemble ensemble_from_json(const Json& j) {
  std::vector<Complex> raw;
  for (const auto& e : field(j, "poles")) raw.push_back(complex_from_json(e));
  const PoleSet poles = PoleSet::from_list(raw);
  const auto& jx = field(j, "PhiX");
  const auto& ju = field(j, "PhiU");
  if (!jx.is_array() || !ju.is_array() || jx.size() != raw.size() || ju.size() != raw.size()) {
    throw InvalidArgument("need one PhiX and one PhiU matrix per pole");
  }
  // Stored order may differ from the canonical one; match each pole.
  ResponseEnsemble ens{poles, std::vector<CMatrix>(raw.size()), std::vector<CMatrix>(raw.size())};
  std::vector<bool> used(raw.size(), false);
  for (size_t q = 0; q < raw.size(); ++q) {
    Eigen::Index best = -1;
    double dist = 0.0;
    for (Eigen::Index l = 0; l < poles.size(); ++l) {
      const double d = std::abs(poles[l] - raw[q]);
      if (!used[size_t(l)] && (best < 0 || d < dist)) {
        best = l;
        dist = d;
      }
    }
    used[size_t(best)] = true;
    ens.PhiX[size_t(best)] = cmatrix_from_json(jx[q]);
    ens.PhiU[size_t(best)] = cmatrix_from_json(ju[q]);
  }
  ens.validate();
  return ens;
}

Json mask_to_json(const SparsityMask& mask) {
  return {{"Sx", bool_matrix_to_json(mask.Sx)}, {"Su", bool_matrix_to_json(mask.Su)},
          {"d", mask.d}};
}

SparsityMask mask_from_json(const Json& j) {
  SparsityMask m;
  m.Sx = bool_matrix_from_json(field(j, "Sx"));
  m.Su = bool_matrix_from_json(field(j, "Su"));
  m.d = j.value("d", 0);
  return m;
}

Json result_to_json(const SynthesisResult& r) {
  Json j = ensemble_to_json(r.ensemble);
  j["norm"] = number(r.norm);
  j["normalized_cost"] = number(r.normalized_cost);
  j["baseline"] = number(r.baseline);
  j["residual"] = number(r.residual);
  j["solve_ms"] = number(r.solve_ms);
  j["status"] = r.status;
  if (r.has_gamma) {
    j["gamma"] = number(r.gamma);
    j["lmi_margin"] = number(r.lmi_margin);
    j["X_min_eig"] = number(r.X_min_eig);
  }
  return j;
}

Json sim_summary_to_json(const SimResult& r, double leak) {
  return {{"containment_max_leak", number(leak)},
          {"settling_time_2pct", number(r.settling_time_2pct)},
          {"stable", r.stable},
          {"spectral_abscissa", number(r.spectral_abscissa)},
          {"subsystem_peak", r.subsystem_peak}};
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace ctsls
