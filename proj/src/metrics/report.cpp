#include "ousac/metrics/report.hpp"

#include <iomanip>
#include <ostream>

#include "ousac/cache/bank_io.hpp"

namespace ousac {

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const DistReport& d) {
    return {{"wasserstein1", opt(d.wasserstein1)},
            {"energy_distance", opt(d.energy_distance)},
            {"mse_to_reference", opt(d.mse_to_reference)},
            {"sample_count", d.sample_count}};
}

nlohmann::json assemble_report(const ReportInputs& in) {
    PassLedger total;
    for (const auto& l : in.ledgers) total.merge(l);

    nlohmann::json doc;
    doc["schema_version"] = kReportSchemaVersion;
    doc["experiment"] = in.experiment;
    doc["metric_note"] = kMetricNote;
    doc["config"] = in.config_echo;
    doc["runs"] = in.ledgers.size();
    doc["ledger"] = to_json(total);
    doc["metrics"] = in.dist ? to_json(*in.dist) : nlohmann::json(nullptr);
    if (in.schedule) {
        const PassCount pc = count_passes(*in.schedule);
        doc["schedule"] = {{"steps", in.schedule->size()},
                           {"cfg_steps", pc.cfg_steps},
                           {"total_forward_passes", pc.total_forward_passes},
                           {"tau", in.schedule->tau()},
                           {"w", std::vector<double>(in.schedule->values().begin(), in.schedule->values().end())}};
    } else {
        doc["schedule"] = nullptr;
    }
    doc["rank_config"] = in.rank_cfg ? rank_config_to_json(*in.rank_cfg) : nlohmann::json(nullptr);
    doc["artifacts"] = in.artifacts;
    doc["panels"] = in.panels;
    return doc;
}

void write_histogram_csv(std::ostream& os, const std::vector<HistogramBin>& bins) {
    os << "bin_left,bin_right,density\n" << std::setprecision(17);
    for (const auto& b : bins) os << b.left << ',' << b.right << ',' << b.density << '\n';
}

}  // namespace ousac
