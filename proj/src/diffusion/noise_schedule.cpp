#include "ousac/diffusion/noise_schedule.hpp"

#include <cmath>
#include <numbers>

#include "ousac/common.hpp"

namespace ousac {

ScheduleKind parse_schedule_kind(const std::string& s) {
    if (s == "linear-beta") return ScheduleKind::linear_beta;
    if (s == "cosine") return ScheduleKind::cosine;
    throw ConfigError("unknown noise schedule kind '" + s + "'");
}

std::string to_string(ScheduleKind k) {
    return k == ScheduleKind::linear_beta ? "linear-beta" : "cosine";
}

NoiseSchedule::NoiseSchedule(ScheduleKind kind, std::vector<double> alpha_bar)
    : kind_(kind), alpha_bar_(std::move(alpha_bar)) {
    if (alpha_bar_.empty()) throw ConfigError("noise schedule is empty");
    for (std::size_t i = 0; i < alpha_bar_.size(); ++i) {
        const double a = alpha_bar_[i];
        if (!(a > 0.0 && a <= 1.0))
            throw ConfigError("alpha_bar_" + std::to_string(i + 1) + " outside (0, 1]");
        if (i > 0 && !(a < alpha_bar_[i - 1]))
            throw ConfigError("alpha_bar not strictly decreasing at t=" + std::to_string(i + 1));
    }
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t == 0) return 1.0;
    if (t < 0 || t > t_max()) throw std::out_of_range("timestep " + std::to_string(t) + " outside schedule");
    return alpha_bar_[static_cast<std::size_t>(t - 1)];
}

NoiseSchedule build_noise_schedule(ScheduleKind kind, int t_max, std::pair<double, double> params) {
    if (t_max < 2) throw ConfigError("T_max must be >= 2");
    const auto [p0, p1] = params;
    if (!(p0 > 0.0 && p0 < 1.0 && p1 > 0.0 && p1 < 1.0))
        throw ConfigError("noise schedule endpoints must lie in (0, 1)");

    std::vector<double> ab(static_cast<std::size_t>(t_max));
    double prod = 1.0;
    if (kind == ScheduleKind::linear_beta) {
        for (int t = 1; t <= t_max; ++t) {
            const double beta = p0 + (p1 - p0) * static_cast<double>(t - 1) / static_cast<double>(t_max - 1);
            prod *= 1.0 - beta;
            ab[static_cast<std::size_t>(t - 1)] = prod;
        }
    } else {
        const double s = p0;
        const double clip = p1;
        auto f = [&](int t) {
            const double u = (static_cast<double>(t) / t_max + s) / (1.0 + s) * std::numbers::pi / 2.0;
            return std::cos(u) * std::cos(u);
        };
        for (int t = 1; t <= t_max; ++t) {
            const double beta = std::min(1.0 - f(t) / f(t - 1), clip);
            prod *= 1.0 - beta;
            ab[static_cast<std::size_t>(t - 1)] = prod;
        }
    }
    return NoiseSchedule(kind, std::move(ab));
}

}  // namespace ousac
