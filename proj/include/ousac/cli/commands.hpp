#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ousac/cli/config.hpp"

namespace ousac {

struct CommandOptions {
    std::optional<std::filesystem::path> out_dir;
    std::optional<int> steps;
    std::optional<std::filesystem::path> schedule;
    std::optional<std::filesystem::path> bank;
    std::optional<std::filesystem::path> ranks;
};

struct CommandResult {
    nlohmann::json report;
    std::filesystem::path dir;
};

std::filesystem::path experiment_dir(const ExperimentConfig& cfg, const CommandOptions& opts);

CommandResult cmd_sample(const ExperimentConfig& cfg, const CommandOptions& opts);
CommandResult cmd_optimize_schedule(const ExperimentConfig& cfg, const CommandOptions& opts);
CommandResult cmd_fit_calibration(const ExperimentConfig& cfg, const CommandOptions& opts);
CommandResult cmd_optimize_ranks(const ExperimentConfig& cfg, const CommandOptions& opts);
CommandResult cmd_repro_fig2(const ExperimentConfig& cfg, const CommandOptions& opts);
CommandResult cmd_bench(const ExperimentConfig& cfg, const CommandOptions& opts);

struct PanelResult {
    std::string label;
    double w1 = 0.0;
    std::int64_t forward_passes = 0;
    int steps = 0;
    int cfg_steps = 0;
    std::vector<double> samples;
};

struct Fig2Result {
    PanelResult constant_cfg;
    PanelResult cond_only;
    std::vector<PanelResult> random_sparse;
    double random_median_w1 = 0.0;
    PanelResult optimized;
    GuidanceSchedule optimized_schedule;
    std::vector<GenerationRecord> search_log;
};

/// The four Fig.-2 pipelines on the configured 1D mixture.
Fig2Result run_fig2(const ExperimentConfig& cfg);

/// Dispatches by subcommand name; throws ConfigError for unknown names.
CommandResult run_command(const std::string& name, const ExperimentConfig& cfg, const CommandOptions& opts);

}  // namespace ousac
