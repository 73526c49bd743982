#pragma once

#include <json.hpp>

#include "ousac/common.hpp"
#include "ousac/models/block_net.hpp"
#include "ousac/models/gaussian_mixture.hpp"

namespace ousac {

// Dense matrices serialize row-major as nested arrays; doubles round-trip exactly.
nlohmann::json matrix_to_json(const Mat& m);
Mat matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vec& v);
Vec vector_from_json(const nlohmann::json& j);

nlohmann::json mixture_to_json(const GaussianMixture& gm);
GaussianMixture mixture_from_json(const nlohmann::json& j);

nlohmann::json blocknet_spec_to_json(const BlockNetSpec& spec);
BlockNetSpec blocknet_spec_from_json(const nlohmann::json& j);

/// {"spec": {...}, "weights": {...}}; enough to rebuild the net exactly.
nlohmann::json blocknet_to_json(const BlockNet& net);
BlockNet blocknet_from_json(const nlohmann::json& j);

}  // namespace ousac
