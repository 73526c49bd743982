#include "ousac/metrics/pass_ledger.hpp"

#include <numeric>

namespace ousac {

namespace {

void bump(std::vector<std::int64_t>& v, int layer, std::int64_t by = 1) {
    const auto idx = static_cast<std::size_t>(layer);
    if (v.size() <= idx) v.resize(idx + 1, 0);
    v[idx] += by;
}

void add_into(std::vector<std::int64_t>& dst, const std::vector<std::int64_t>& src) {
    if (dst.size() < src.size()) dst.resize(src.size(), 0);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

std::int64_t sum(const std::vector<std::int64_t>& v) { return std::accumulate(v.begin(), v.end(), std::int64_t{0}); }

}  // namespace

void PassLedger::record_pass(Branch b) {
    if (b == Branch::conditional)
        ++cond_passes;
    else
        ++uncond_passes;
}

void PassLedger::record_full_block(int layer, double macs) {
    bump(full_blocks, layer);
    mac_estimate += macs;
}

void PassLedger::record_cached_block(int layer, int rank, double macs) {
    bump(cached_blocks, layer);
    if (rank > 0) bump(calibrated_blocks, layer);
    mac_estimate += macs;
}

void PassLedger::merge(const PassLedger& other) {
    cond_passes += other.cond_passes;
    uncond_passes += other.uncond_passes;
    cache_fallbacks += other.cache_fallbacks;
    add_into(full_blocks, other.full_blocks);
    add_into(cached_blocks, other.cached_blocks);
    add_into(calibrated_blocks, other.calibrated_blocks);
    mac_estimate += other.mac_estimate;
    cache_reads.insert(cache_reads.end(), other.cache_reads.begin(), other.cache_reads.end());
}

std::int64_t PassLedger::total_full_blocks() const { return sum(full_blocks); }
std::int64_t PassLedger::total_cached_blocks() const { return sum(cached_blocks); }
std::int64_t PassLedger::total_calibrated_blocks() const { return sum(calibrated_blocks); }

bool PassLedger::consistent() const {
    return cond_passes >= uncond_passes && uncond_passes >= 0 && mac_estimate >= 0.0 && cache_fallbacks >= 0;
}

nlohmann::json to_json(const PassLedger& ledger) {
    return {
        {"cond_passes", ledger.cond_passes},
        {"uncond_passes", ledger.uncond_passes},
        {"total_passes", ledger.total_passes()},
        {"cached_blocks", ledger.total_cached_blocks()},
        {"calibrated_blocks", ledger.total_calibrated_blocks()},
        {"full_blocks", ledger.total_full_blocks()},
        {"cache_fallbacks", ledger.cache_fallbacks},
        {"mac_estimate", ledger.mac_estimate},
        {"per_layer", {{"full", ledger.full_blocks}, {"cached", ledger.cached_blocks}, {"calibrated", ledger.calibrated_blocks}}},
    };
}

}  // namespace ousac
