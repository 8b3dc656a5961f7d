#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "ctsls/constraints.hpp"
#include "ctsls/h2_synth.hpp"
#include "ctsls/plant.hpp"
#include "ctsls/poles.hpp"
#include "ctsls/simulate.hpp"

namespace ctsls {

using Json = nlohmann::json;

/// Matrices are written as arrays of rows. Readers also take a flat
/// row-major array when the shape is implied (square, or `rows` given).
Json matrix_to_json(const Eigen::Ref<const Matrix>& M);
Matrix matrix_from_json(const Json& j, Eigen::Index rows = -1);

/// Complex entries as [re, im].
Json cmatrix_to_json(const CMatrix& M);
CMatrix cmatrix_from_json(const Json& j);

Json bool_matrix_to_json(const BoolMatrix& M);
BoolMatrix bool_matrix_from_json(const Json& j);

Json plant_to_json(const PlantRealization& plant);
PlantRealization plant_from_json(const Json& j);

Json weights_to_json(const CostWeights& w);
CostWeights weights_from_json(const Json& j);

Json poles_to_json(const PoleSet& poles);
PoleSet poles_from_json(const Json& j);

Json ensemble_to_json(const ResponseEnsemble& ensemble);
ResponseEnsemble ensemble_from_json(const Json& j);

Json mask_to_json(const SparsityMask& mask);
SparsityMask mask_from_json(const Json& j);

/// {poles, PhiX, PhiU, norm, normalized_cost, residual, solve_ms} plus
/// {gamma, lmi_margin, X_min_eig} for H-infinity results. Non-finite numbers
/// are written as null.
Json result_to_json(const SynthesisResult& result);

/// {containment_max_leak, settling_time_2pct, stable, spectral_abscissa}
Json sim_summary_to_json(const SimResult& result, double containment_max_leak);

/// Throws InvalidArgument with the path on failure.
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace ctsls
