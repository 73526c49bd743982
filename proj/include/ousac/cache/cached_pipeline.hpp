#pragma once

#include <array>
#include <memory>
#include <vector>

#include "ousac/cache/calibration.hpp"
#include "ousac/diffusion/sampler.hpp"
#include "ousac/models/block_net.hpp"

namespace ousac {

/// Contiguous split of `blocks` layers into K regions of floor(N/K) layers,
/// the remainder going to the last region.
std::vector<int> region_partition(int blocks, int regions);

struct RankConfig {
    int K = 1;
    std::vector<int> ranks;  // one per region
    int budget = 0;
    int r_min = 1;
    int r_max = 1;
    std::vector<int> region_map;  // block -> region

    static RankConfig uniform(int blocks, int K, int r, int r_min, int r_max, int budget);

    int total() const;
    int rank_for_block(int layer) const { return ranks[static_cast<std::size_t>(region_map[static_cast<std::size_t>(layer)])]; }
    bool feasible() const;
    void validate() const;  // throws ConfigError
};

struct BranchCache {
    std::vector<Vec> h_in;
    std::vector<Vec> h_out;
    bool valid = false;
    int filled_step = -1;
    int last_exec_step = -1;
};

struct CacheState {
    std::array<BranchCache, 2> branch;
};

using LayerFactors = std::vector<TruncatedFactors>;

/// Truncated factors for every block under `cfg`.
std::shared_ptr<const LayerFactors> make_layer_factors(const CalibrationBank& bank, const RankConfig& cfg);

/// One branch evaluation through the cache. Refresh steps, and reuse steps whose
/// cache is unusable, run in full and refill the cache; usable reuse steps apply
/// cached outputs plus the calibrated correction of the input increment.
Vec cached_forward(const BlockNetPredictor& model, const LayerFactors& factors, CacheState& state, const Vec& x,
                   int step, int t, Condition c, Branch branch, const CachePolicy& policy, PassLedger& ledger);

/// Per-trajectory step model; not thread-safe (one per trajectory).
class CachedStepModel final : public StepModel {
public:
    CachedStepModel(const BlockNetPredictor& model, std::shared_ptr<const LayerFactors> factors, CachePolicy policy);

    int dim() const override { return model_.dim(); }
    Vec guided_eps(const Vec& x, int step, int t, Condition c, double w_t, double tau, PassLedger& ledger) override;

    const CacheState& state() const { return state_; }

private:
    const BlockNetPredictor& model_;
    std::shared_ptr<const LayerFactors> factors_;
    CachePolicy policy_;
    CacheState state_;
};

StepModelFactory cached_model_factory(const BlockNetPredictor& model, const CalibrationBank& bank,
                                      const RankConfig& cfg, const CachePolicy& policy);

}  // namespace ousac
