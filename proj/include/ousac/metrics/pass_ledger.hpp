#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "ousac/common.hpp"

namespace ousac {

/// One read of a cached feature set: at `step` the `branch` cache was consumed,
/// and that branch last executed (fully or via calibration) at `last_exec_step`.
struct CacheRead {
    int step = 0;
    Branch branch = Branch::conditional;
    int last_exec_step = -1;

    bool operator==(const CacheRead&) const = default;
};

/// Exact count of forward passes and block evaluations plus a MAC estimate.
///
/// A "pass" is one branch evaluation of the noise predictor, whether its blocks
/// ran in full or were served from the cache. MACs count block matrix products
/// (full blocks) and calibration applications (cached blocks) only.
struct PassLedger {
    std::int64_t cond_passes = 0;
    std::int64_t uncond_passes = 0;
    std::int64_t cache_fallbacks = 0;
    std::vector<std::int64_t> full_blocks;        // per layer
    std::vector<std::int64_t> cached_blocks;      // per layer, served from cache
    std::vector<std::int64_t> calibrated_blocks;  // per layer, cached with rank > 0
    double mac_estimate = 0.0;
    std::vector<CacheRead> cache_reads;

    void record_pass(Branch b);
    void record_full_block(int layer, double macs);
    void record_cached_block(int layer, int rank, double macs);
    void merge(const PassLedger& other);

    std::int64_t total_passes() const { return cond_passes + uncond_passes; }
    std::int64_t total_full_blocks() const;
    std::int64_t total_cached_blocks() const;
    std::int64_t total_calibrated_blocks() const;
    /// cond_passes >= uncond_passes and MACs are non-negative.
    bool consistent() const;

    bool operator==(const PassLedger&) const = default;
};

/// {cond_passes, uncond_passes, cached_blocks, calibrated_blocks, mac_estimate}
/// plus fallbacks and per-layer breakdowns.
nlohmann::json to_json(const PassLedger& ledger);

/// Full layer cost d_in*d_hidden + d_hidden*d_out.
inline double full_block_macs(int d_in, int d_hidden, int d_out) {
    return static_cast<double>(d_in) * d_hidden + static_cast<double>(d_hidden) * d_out;
}

/// Rank-r calibration cost r*(d_in + d_out).
inline double calibrated_block_macs(int rank, int d_in, int d_out) {
    return static_cast<double>(rank) * (d_in + d_out);
}

}  // namespace ousac
