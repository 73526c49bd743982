#include "ousac/cache/rank_search.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "ousac/metrics/distances.hpp"

namespace ousac {

RankProblem make_rank_problem(const BlockNetPredictor& model, const CalibrationBank& bank,
                              const GuidanceSchedule& schedule, const TimestepGrid& grid, const NoiseSchedule& sched,
                              const CachePolicy& policy, std::vector<Probe> eval_set) {
    if (bank.size() != model.net().blocks()) throw ConfigError("calibration bank depth does not match the model");
    RankProblem p{&model, &bank, schedule, grid, sched, policy, std::move(eval_set), {}, std::nullopt, 0.0};
    SamplerOptions opts;
    opts.record_states = false;
    p.full_outputs = sample_final_batch(p.eval_set, grid, schedule, model, sched, opts).finals;
    return p;
}

double quality_objective(const RankConfig& cfg, const RankProblem& problem) {
    if (!problem.model || !problem.bank) throw std::logic_error("rank problem is not initialised");
    SamplerOptions opts;
    opts.record_states = false;
    const auto factory = cached_model_factory(*problem.model, *problem.bank, cfg, problem.policy);
    const BatchResult res = sample_final_batch(problem.eval_set, problem.grid, problem.schedule, factory,
                                               problem.sched, opts);
    double mse = 0.0;
    for (std::size_t i = 0; i < res.finals.size(); ++i)
        mse += (res.finals[i] - problem.full_outputs[i]).squaredNorm();
    mse /= static_cast<double>(res.finals.size());
    if (problem.target && problem.w1_weight != 0.0)
        mse += problem.w1_weight * wasserstein_1d_to_density(first_components(res.finals), *problem.target);
    return mse;
}

RankConfig initial_rank_config(const RankSearchOptions& opts) {
    if (opts.r_min < 1 || opts.r_max < opts.r_min) throw ConfigError("rank bounds must satisfy 1 <= r_min <= r_max");
    if (opts.K * opts.r_min > opts.budget)
        throw ConfigError("budget " + std::to_string(opts.budget) + " cannot fit " + std::to_string(opts.K) +
                          " regions at r_min " + std::to_string(opts.r_min));
    const int r0 = std::clamp(opts.budget / opts.K, opts.r_min, opts.r_max);
    RankConfig cfg = RankConfig::uniform(opts.blocks, opts.K, r0, opts.r_min, opts.r_max, opts.budget);
    if (opts.initial) cfg.ranks = *opts.initial;
    cfg.validate();
    return cfg;
}

RankSearchResult optimize_ranks(const RankObjective& objective, const RankSearchOptions& opts) {
    if (opts.max_sweeps < 1) throw ConfigError("rank_search.max_sweeps must be >= 1");
    RankConfig cfg = initial_rank_config(opts);

    std::map<std::vector<int>, double> memo;
    RankSearchResult result;
    const auto eval = [&](const std::vector<int>& ranks) {
        if (auto it = memo.find(ranks); it != memo.end()) return it->second;
        RankConfig probe = cfg;
        probe.ranks = ranks;
        const double f = objective(probe);
        ++result.evaluations;
        memo.emplace(ranks, f);
        return f;
    };

    double current = eval(cfg.ranks);
    if (opts.uniform_warm_start && !opts.initial) {
        const int top = std::min(opts.r_max, opts.budget / opts.K);
        for (int r = top; r >= opts.r_min; --r) {
            const std::vector<int> u(static_cast<std::size_t>(opts.K), r);
            if (const double f = eval(u); f < current) {
                current = f;
                cfg.ranks = u;
            }
        }
    }
    result.initial_objective = current;

    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        result.sweeps = sweep + 1;
        bool improved = false;
        for (int k = 0; k < opts.K; ++k) {
            const auto uk = static_cast<std::size_t>(k);
            const int others = cfg.total() - cfg.ranks[uk];
            int lo = opts.r_min;
            int hi = std::min(opts.r_max, opts.budget - others);
            if (hi < lo) continue;

            std::vector<int> trial = cfg.ranks;
            const auto f_at = [&](int r) {
                trial[uk] = r;
                return eval(trial);
            };
            int best_r = cfg.ranks[uk];
            double best_f = current;
            const auto consider = [&](int r, double f) {
                if (f < best_f || (f == best_f && r < best_r && best_r != cfg.ranks[uk])) {
                    best_f = f;
                    best_r = r;
                }
            };
            int edge_hits = 0;
            while (hi - lo > 1) {
                const int mid = lo + (hi - lo) / 2;
                const double fl = f_at(lo), fm = f_at(mid), fh = f_at(hi);
                consider(lo, fl);
                consider(mid, fm);
                consider(hi, fh);
                if (fl < fm && fl <= fh) {
                    hi = mid;
                    ++edge_hits;
                } else if (fh < fm && fh < fl) {
                    lo = mid;
                    ++edge_hits;
                } else if (fl <= fh) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            consider(lo, f_at(lo));
            consider(hi, f_at(hi));
            if (edge_hits >= 2) ++result.unimodality_flags;

            if (best_r != cfg.ranks[uk] && best_f < current) {
                result.moves.push_back({sweep, k, cfg.ranks[uk], best_r, best_f});
                cfg.ranks[uk] = best_r;
                current = best_f;
                improved = true;
            }
        }
        if (!improved) break;
    }
    cfg.validate();
    result.config = cfg;
    result.objective = current;
    return result;
}

RankSearchResult optimize_ranks(const RankProblem& problem, const RankSearchOptions& opts) {
    return optimize_ranks([&problem](const RankConfig& cfg) { return quality_objective(cfg, problem); }, opts);
}

double baseline_macs(int steps, int blocks, double block_macs) { return 2.0 * steps * blocks * block_macs; }

double compute_fraction(const PassLedger& ledger, double baseline) {
    if (!(baseline > 0.0)) throw std::invalid_argument("baseline MACs must be positive");
    return ledger.mac_estimate / baseline;
}

}  // namespace ousac
