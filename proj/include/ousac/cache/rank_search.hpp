#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ousac/cache/cached_pipeline.hpp"
#include "ousac/models/gaussian_mixture.hpp"

namespace ousac {

/// Fixed evaluation problem for scoring rank configurations.
struct RankProblem {
    const BlockNetPredictor* model = nullptr;
    const CalibrationBank* bank = nullptr;
    GuidanceSchedule schedule;
    TimestepGrid grid;
    NoiseSchedule sched;
    CachePolicy policy;
    std::vector<Probe> eval_set;
    std::vector<Vec> full_outputs;     // uncached reference outputs per probe
    std::optional<GridDensity> target;  // adds w1_weight * W1(first components, target)
    double w1_weight = 0.0;
};

RankProblem make_rank_problem(const BlockNetPredictor& model, const CalibrationBank& bank,
                              const GuidanceSchedule& schedule, const TimestepGrid& grid, const NoiseSchedule& sched,
                              const CachePolicy& policy, std::vector<Probe> eval_set);

/// Mean squared error of the cached outputs against full compute (plus the
/// optional W1 term).
double quality_objective(const RankConfig& cfg, const RankProblem& problem);

struct RankSearchOptions {
    int blocks = 8;
    int K = 4;
    int r_min = 1;
    int r_max = 8;
    int budget = 16;
    int max_sweeps = 3;
    std::optional<std::vector<int>> initial;
    // Score every feasible uniform config first and descend from the best one.
    bool uniform_warm_start = false;
};

struct RankMove {
    int sweep = 0;
    int region = 0;
    int from = 0;
    int to = 0;
    double objective = 0.0;  // after the move
};

struct RankSearchResult {
    RankConfig config;
    double objective = 0.0;
    double initial_objective = 0.0;
    std::vector<RankMove> moves;
    int evaluations = 0;
    int sweeps = 0;
    int unimodality_flags = 0;
};

using RankObjective = std::function<double(const RankConfig&)>;

/// Start point: `initial` when given, else floor(B/K) clamped to [r_min, r_max].
/// optimize_ranks may replace it with the best uniform config (uniform_warm_start).
RankConfig initial_rank_config(const RankSearchOptions& opts);

/// Coordinate descent over regions with a bracketed binary search per region;
/// stops after a sweep without improvement or after max_sweeps.
RankSearchResult optimize_ranks(const RankObjective& objective, const RankSearchOptions& opts);
RankSearchResult optimize_ranks(const RankProblem& problem, const RankSearchOptions& opts);

/// Block MACs of `steps` constant-CFG steps without caching: 2 * steps * N full blocks.
double baseline_macs(int steps, int blocks, double block_macs);

double compute_fraction(const PassLedger& ledger, double baseline);

}  // namespace ousac
