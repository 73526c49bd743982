#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ousac/cache/calibration.hpp"
#include "ousac/cache/rank_search.hpp"
#include "ousac/evo/evo_sched.hpp"
#include "ousac/models/block_net.hpp"
#include "ousac/models/gaussian_mixture.hpp"

namespace ousac {

/// Every accepted key with its default value; also serves as the schema.
nlohmann::json default_config_document();

/// Recursively overlays `user` on the defaults. Unknown keys and type
/// mismatches throw ConfigError naming the dotted key.
nlohmann::json merge_config(const nlohmann::json& defaults, const nlohmann::json& user);

/// Applies "a.b.c=value"; value is parsed as JSON, falling back to a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

struct ExperimentConfig {
    nlohmann::json doc;

    std::string name() const { return doc.at("name").get<std::string>(); }
    std::uint64_t seed() const { return doc.at("seed").get<std::uint64_t>(); }
    const nlohmann::json& section(const char* key) const { return doc.at(key); }
};

ExperimentConfig parse_config(const nlohmann::json& user, const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::string>& overrides = {});

NoiseSchedule make_noise_schedule(const ExperimentConfig& cfg);
GaussianMixture make_mixture(const ExperimentConfig& cfg);
Condition model_condition(const ExperimentConfig& cfg);
bool uses_blocknet(const ExperimentConfig& cfg);
BlockNetSpec make_blocknet_spec(const ExperimentConfig& cfg);

/// Mixture predictor, or a BlockNet over the mixture when model.kind = "blocknet".
std::unique_ptr<NoisePredictor> make_predictor(const ExperimentConfig& cfg);
/// Throws ConfigError unless model.kind = "blocknet".
std::unique_ptr<BlockNetPredictor> make_blocknet_predictor(const ExperimentConfig& cfg);

TimestepGrid make_grid(const ExperimentConfig& cfg);
TimestepGrid make_ref_grid(const ExperimentConfig& cfg);
EvoConfig make_evo_config(const ExperimentConfig& cfg);
CachePolicy make_cache_policy(const ExperimentConfig& cfg);
RankSearchOptions make_rank_options(const ExperimentConfig& cfg, int blocks);

}  // namespace ousac
