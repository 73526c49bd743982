#include "ousac/cli/config.hpp"

#include <fstream>

#include "ousac/models/model_io.hpp"

namespace ousac {

using nlohmann::json;

json default_config_document() {
    return json::parse(R"({
  "name": "default",
  "seed": 0,
  "out_dir": "out",
  "model": {
    "kind": "mixture",
    "condition": 1,
    "mixture": {"components": [
      {"weight": 0.5, "mean": [-0.4], "variance": 0.64, "label": 0},
      {"weight": 0.5, "mean": [0.4], "variance": 0.64, "label": 1}
    ]},
    "blocknet": {"data_dim": 1, "width": 8, "blocks": 8, "n_classes": 2, "time_features": 8,
                 "spectral_bound": 0.5, "readout_scale": 0.1, "seed": 7},
    "blocknet_base": true
  },
  "noise": {"kind": "linear-beta", "t_max": 1000, "param0": 1e-4, "param1": 0.02},
  "grid": {"steps": 50, "ref_steps": 1000},
  "guidance": {"w_const": 1.5, "tau": 0.15, "w_max": 10.0},
  "sample": {"n_samples": 10000, "eta": 0.0, "hist_lo": -4.0, "hist_hi": 4.0, "hist_bins": 80},
  "evo": {"population": 32, "generations": 300, "sigma0": 2.0, "eta": 1.0, "lambda": null,
          "n_probes": 64, "init_w": 0.1, "max_active": 8, "final_pick": "best-of-both"},
  "cache": {"refresh_period": 2, "guidance_rule": true, "ridge": 1e-6, "calibration_runs": 32},
  "rank_search": {"K": 4, "r_min": 2, "r_max": 8, "budget": 24, "max_sweeps": 3,
                  "eval_probes": 32, "w1_weight": 0.0,
                  "uniform_warm_start": true},
  "fig2": {"random_schedules": 10, "random_active": 8}
})");
}

namespace {

std::string join(const std::string& prefix, const std::string& key) { return prefix.empty() ? key : prefix + "." + key; }

bool compatible(const json& def, const json& val) {
    if (def.is_null() || val.is_null()) return true;
    if (def.is_number()) return val.is_number();
    if (def.is_boolean()) return val.is_boolean();
    if (def.is_string()) return val.is_string();
    if (def.is_array()) return val.is_array();
    if (def.is_object()) return val.is_object();
    return false;
}

void merge_into(json& base, const json& user, const std::string& prefix) {
    if (!user.is_object()) throw ConfigError("config section '" + (prefix.empty() ? "<root>" : prefix) + "' must be an object");
    for (const auto& [key, val] : user.items()) {
        const std::string path = join(prefix, key);
        if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
        json& slot = base[key];
        if (!compatible(slot, val)) throw ConfigError("config key '" + path + "' has the wrong type");
        // "mixture" carries free-form components and is replaced whole.
        if (slot.is_object() && path != "model.mixture")
            merge_into(slot, val, path);
        else
            slot = val;
    }
}

template <class T>
T get(const json& j, const char* key, const char* section) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + section + "." + key + "' is missing or has the wrong type");
    }
}

}  // namespace

json merge_config(const json& defaults, const json& user) {
    json out = defaults;
    merge_into(out, user, "");
    return out;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json patch = value;
    std::string rest = key;
    std::vector<std::string> parts;
    for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1))
        parts.push_back(rest.substr(0, pos));
    parts.push_back(rest);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
    merge_into(doc, patch, "");
}

ExperimentConfig parse_config(const json& user, const std::vector<std::string>& overrides) {
    ExperimentConfig cfg{merge_config(default_config_document(), user)};
    for (const auto& o : overrides) apply_override(cfg.doc, o);
    // Eager construction surfaces invalid values as config errors.
    make_noise_schedule(cfg);
    make_mixture(cfg);
    make_evo_config(cfg).validate();
    make_cache_policy(cfg);
    if (uses_blocknet(cfg)) make_blocknet_spec(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::string>& overrides) {
    json user = json::object();
    if (path) {
        std::ifstream in(*path);
        if (!in) throw ConfigError("cannot open config file " + path->string());
        user = json::parse(in, nullptr, false, true);
        if (user.is_discarded()) throw ConfigError("config file " + path->string() + " is not valid JSON");
    }
    return parse_config(user, overrides);
}

NoiseSchedule make_noise_schedule(const ExperimentConfig& cfg) {
    const json& n = cfg.section("noise");
    return build_noise_schedule(parse_schedule_kind(get<std::string>(n, "kind", "noise")),
                                get<int>(n, "t_max", "noise"),
                                {get<double>(n, "param0", "noise"), get<double>(n, "param1", "noise")});
}

GaussianMixture make_mixture(const ExperimentConfig& cfg) {
    try {
        return mixture_from_json(cfg.section("model").at("mixture"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key 'model.mixture' is malformed: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config key 'model.mixture' is invalid: ") + e.what());
    }
}

Condition model_condition(const ExperimentConfig& cfg) {
    const json& c = cfg.section("model").at("condition");
    if (c.is_null()) return std::nullopt;
    if (!c.is_number_integer()) throw ConfigError("config key 'model.condition' must be an integer or null");
    return c.get<int>();
}

bool uses_blocknet(const ExperimentConfig& cfg) {
    const auto kind = get<std::string>(cfg.section("model"), "kind", "model");
    if (kind == "blocknet") return true;
    if (kind == "mixture") return false;
    throw ConfigError("config key 'model.kind' must be 'mixture' or 'blocknet'");
}

BlockNetSpec make_blocknet_spec(const ExperimentConfig& cfg) {
    try {
        return blocknet_spec_from_json(cfg.section("model").at("blocknet"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key 'model.blocknet' is malformed: ") + e.what());
    }
}

std::unique_ptr<BlockNetPredictor> make_blocknet_predictor(const ExperimentConfig& cfg) {
    if (!uses_blocknet(cfg)) throw ConfigError("this command requires model.kind = 'blocknet'");
    std::optional<MixturePredictor> base;
    if (get<bool>(cfg.section("model"), "blocknet_base", "model"))
        base.emplace(make_mixture(cfg), make_noise_schedule(cfg));
    return std::make_unique<BlockNetPredictor>(BlockNet(make_blocknet_spec(cfg)), std::move(base));
}

std::unique_ptr<NoisePredictor> make_predictor(const ExperimentConfig& cfg) {
    if (uses_blocknet(cfg)) return make_blocknet_predictor(cfg);
    return std::make_unique<MixturePredictor>(make_mixture(cfg), make_noise_schedule(cfg));
}

TimestepGrid make_grid(const ExperimentConfig& cfg) {
    return TimestepGrid::uniform(get<int>(cfg.section("noise"), "t_max", "noise"),
                                 get<int>(cfg.section("grid"), "steps", "grid"));
}

TimestepGrid make_ref_grid(const ExperimentConfig& cfg) {
    return TimestepGrid::uniform(get<int>(cfg.section("noise"), "t_max", "noise"),
                                 get<int>(cfg.section("grid"), "ref_steps", "grid"));
}

EvoConfig make_evo_config(const ExperimentConfig& cfg) {
    const json& e = cfg.section("evo");
    const json& g = cfg.section("guidance");
    EvoConfig c;
    c.population = get<int>(e, "population", "evo");
    c.generations = get<int>(e, "generations", "evo");
    c.sigma0 = get<double>(e, "sigma0", "evo");
    c.eta = get<double>(e, "eta", "evo");
    if (!e.at("lambda").is_null()) c.lambda = get<double>(e, "lambda", "evo");
    c.n_probes = get<int>(e, "n_probes", "evo");
    if (!e.at("init_w").is_null()) c.init_w = get<double>(e, "init_w", "evo");
    c.max_active = get<int>(e, "max_active", "evo");
    const auto pick = get<std::string>(e, "final_pick", "evo");
    if (pick == "best-of-both")
        c.final_pick = FinalPick::best_of_both;
    else if (pick == "center")
        c.final_pick = FinalPick::center;
    else
        throw ConfigError("config key 'evo.final_pick' must be 'best-of-both' or 'center'");
    c.tau = get<double>(g, "tau", "guidance");
    c.w_max = get<double>(g, "w_max", "guidance");
    c.w_const = get<double>(g, "w_const", "guidance");
    c.steps = get<int>(cfg.section("grid"), "steps", "grid");
    c.ref_steps = get<int>(cfg.section("grid"), "ref_steps", "grid");
    c.seed = cfg.seed();
    return c;
}

CachePolicy make_cache_policy(const ExperimentConfig& cfg) {
    const json& c = cfg.section("cache");
    CachePolicy p;
    p.refresh_period = get<int>(c, "refresh_period", "cache");
    p.guidance_rule = get<bool>(c, "guidance_rule", "cache");
    if (p.refresh_period < 1) throw ConfigError("config key 'cache.refresh_period' must be >= 1");
    if (!(get<double>(c, "ridge", "cache") >= 0.0)) throw ConfigError("config key 'cache.ridge' must be >= 0");
    return p;
}

RankSearchOptions make_rank_options(const ExperimentConfig& cfg, int blocks) {
    const json& r = cfg.section("rank_search");
    RankSearchOptions o;
    o.blocks = blocks;
    o.K = get<int>(r, "K", "rank_search");
    o.r_min = get<int>(r, "r_min", "rank_search");
    o.r_max = get<int>(r, "r_max", "rank_search");
    o.budget = get<int>(r, "budget", "rank_search");
    o.max_sweeps = get<int>(r, "max_sweeps", "rank_search");
    o.uniform_warm_start = get<bool>(r, "uniform_warm_start", "rank_search");
    return o;
}

}  // namespace ousac
