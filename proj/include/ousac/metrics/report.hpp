#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ousac/cache/cached_pipeline.hpp"
#include "ousac/diffusion/guidance.hpp"
#include "ousac/metrics/distances.hpp"
#include "ousac/metrics/pass_ledger.hpp"

namespace ousac {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kMetricNote =
    "wasserstein1 and energy_distance are desk-scale distribution distances, not FID";

struct DistReport {
    std::optional<double> wasserstein1;
    std::optional<double> energy_distance;
    std::optional<double> mse_to_reference;
    std::int64_t sample_count = 0;
};

nlohmann::json to_json(const DistReport& d);

struct ReportInputs {
    std::string experiment;
    nlohmann::json config_echo;  // null when absent
    std::vector<PassLedger> ledgers;
    std::optional<DistReport> dist;
    std::optional<GuidanceSchedule> schedule;
    std::optional<RankConfig> rank_cfg;
    std::map<std::string, std::string> artifacts;  // name -> relative path
    nlohmann::json panels;                         // experiment-specific sections
};

/// Versioned report document; absent inputs appear as explicit nulls.
nlohmann::json assemble_report(const ReportInputs& in);

/// CSV with header bin_left,bin_right,density.
void write_histogram_csv(std::ostream& os, const std::vector<HistogramBin>& bins);

}  // namespace ousac
