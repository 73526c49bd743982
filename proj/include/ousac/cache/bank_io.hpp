#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "ousac/cache/cached_pipeline.hpp"

namespace ousac {

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

/// {"rows", "cols", "data"} with data the base64 of row-major little-endian doubles.
nlohmann::json packed_matrix_to_json(const Mat& m);
Mat packed_matrix_from_json(const nlohmann::json& j);

/// Stores each layer's A and fit stats; the SVD is recomputed on load.
nlohmann::json bank_to_json(const CalibrationBank& bank);
CalibrationBank bank_from_json(const nlohmann::json& j);

nlohmann::json rank_config_to_json(const RankConfig& cfg);
RankConfig rank_config_from_json(const nlohmann::json& j);

}  // namespace ousac
