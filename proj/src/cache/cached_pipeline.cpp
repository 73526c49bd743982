#include "ousac/cache/cached_pipeline.hpp"

#include <numeric>
#include <string>

namespace ousac {

std::vector<int> region_partition(int blocks, int regions) {
    if (regions < 1 || regions > blocks) throw ConfigError("regions K must satisfy 1 <= K <= blocks");
    const int per = blocks / regions;
    std::vector<int> map(static_cast<std::size_t>(blocks));
    for (int l = 0; l < blocks; ++l) map[static_cast<std::size_t>(l)] = std::min(l / per, regions - 1);
    return map;
}

RankConfig RankConfig::uniform(int blocks, int K, int r, int r_min, int r_max, int budget) {
    RankConfig cfg;
    cfg.K = K;
    cfg.ranks.assign(static_cast<std::size_t>(K), r);
    cfg.budget = budget;
    cfg.r_min = r_min;
    cfg.r_max = r_max;
    cfg.region_map = region_partition(blocks, K);
    return cfg;
}

int RankConfig::total() const { return std::accumulate(ranks.begin(), ranks.end(), 0); }

bool RankConfig::feasible() const {
    if (static_cast<int>(ranks.size()) != K) return false;
    for (int r : ranks)
        if (r < r_min || r > r_max) return false;
    return total() <= budget;
}

void RankConfig::validate() const {
    if (r_min < 1 || r_max < r_min) throw ConfigError("rank bounds must satisfy 1 <= r_min <= r_max");
    if (static_cast<int>(ranks.size()) != K) throw ConfigError("rank config needs one rank per region");
    for (int r : ranks)
        if (r < r_min || r > r_max)
            throw ConfigError("rank " + std::to_string(r) + " outside [" + std::to_string(r_min) + ", " +
                              std::to_string(r_max) + "]");
    if (total() > budget)
        throw ConfigError("rank total " + std::to_string(total()) + " exceeds budget " + std::to_string(budget));
    for (int g : region_map)
        if (g < 0 || g >= K) throw ConfigError("region map entry out of range");
}

std::shared_ptr<const LayerFactors> make_layer_factors(const CalibrationBank& bank, const RankConfig& cfg) {
    if (static_cast<int>(cfg.region_map.size()) != bank.size())
        throw ConfigError("rank config covers " + std::to_string(cfg.region_map.size()) + " blocks but bank has " +
                          std::to_string(bank.size()));
    auto out = std::make_shared<LayerFactors>();
    for (int l = 0; l < bank.size(); ++l) out->push_back(truncate_rank(bank, l, cfg.rank_for_block(l)));
    return out;
}

Vec cached_forward(const BlockNetPredictor& model, const LayerFactors& factors, CacheState& state, const Vec& x,
                   int step, int t, Condition c, Branch branch, const CachePolicy& policy, PassLedger& ledger) {
    const BlockNet& net = model.net();
    const int L = net.blocks();
    const int d = net.width();
    BranchCache& bc = state.branch[static_cast<std::size_t>(branch)];

    const bool refresh = policy.is_refresh_step(step);
    const bool usable = bc.valid && (!policy.guidance_rule || bc.last_exec_step == step - 1);
    if (!refresh && !usable) ++ledger.cache_fallbacks;

    Vec h = net.embed(x, t, c);
    if (refresh || !usable) {
        bc.h_in.resize(static_cast<std::size_t>(L));
        bc.h_out.resize(static_cast<std::size_t>(L));
        for (int l = 0; l < L; ++l) {
            const auto ul = static_cast<std::size_t>(l);
            bc.h_in[ul] = h;
            h = net.block(l, h);
            bc.h_out[ul] = h;
            ledger.record_full_block(l, net.full_block_macs());
        }
        bc.valid = true;
        bc.filled_step = step;
    } else {
        ledger.cache_reads.push_back({step, branch, bc.last_exec_step});
        for (int l = 0; l < L; ++l) {
            const auto ul = static_cast<std::size_t>(l);
            const TruncatedFactors& f = factors[ul];
            h = bc.h_out[ul] + f.apply(h - bc.h_in[ul]);
            ledger.record_cached_block(l, f.rank, calibrated_block_macs(f.rank, d, d));
        }
    }
    bc.last_exec_step = step;
    return model.finish(h, x, t, c);
}

CachedStepModel::CachedStepModel(const BlockNetPredictor& model, std::shared_ptr<const LayerFactors> factors,
                                 CachePolicy policy)
    : model_(model), factors_(std::move(factors)), policy_(policy) {
    if (!factors_ || static_cast<int>(factors_->size()) != model.net().blocks())
        throw ConfigError("calibration factors do not match the model depth");
    if (policy_.refresh_period < 1) throw ConfigError("cache.refresh_period must be >= 1");
}

Vec CachedStepModel::guided_eps(const Vec& x, int step, int t, Condition c, double w_t, double tau,
                                PassLedger& ledger) {
    Vec eps_c = cached_forward(model_, *factors_, state_, x, step, t, c, Branch::conditional, policy_, ledger);
    ledger.record_pass(Branch::conditional);
    if (!(w_t >= tau)) return eps_c;
    Vec eps_u =
        cached_forward(model_, *factors_, state_, x, step, t, std::nullopt, Branch::unconditional, policy_, ledger);
    ledger.record_pass(Branch::unconditional);
    return apply_cfg(eps_u, eps_c, w_t);
}

StepModelFactory cached_model_factory(const BlockNetPredictor& model, const CalibrationBank& bank,
                                      const RankConfig& cfg, const CachePolicy& policy) {
    auto factors = make_layer_factors(bank, cfg);
    return [&model, factors, policy] { return std::make_unique<CachedStepModel>(model, factors, policy); };
}

}  // namespace ousac
