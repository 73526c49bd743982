#pragma once

#include <span>
#include <string>
#include <vector>

namespace ousac {

enum class ScheduleKind { linear_beta, cosine };

ScheduleKind parse_schedule_kind(const std::string& s);
std::string to_string(ScheduleKind k);

/// Cumulative signal retention alpha_bar_t for t = 1..T_max, with alpha_bar_0 := 1.
class NoiseSchedule {
public:
    NoiseSchedule(ScheduleKind kind, std::vector<double> alpha_bar);

    /// t in [0, T_max]; t == 0 returns 1.
    double alpha_bar(int t) const;
    int t_max() const { return static_cast<int>(alpha_bar_.size()); }
    ScheduleKind kind() const { return kind_; }
    std::span<const double> values() const { return alpha_bar_; }

private:
    ScheduleKind kind_;
    std::vector<double> alpha_bar_;
};

/// linear-beta: params are (beta_1, beta_Tmax), betas linearly spaced.
/// cosine: params are (offset s, per-step beta clip); alpha_bar follows the
/// squared-cosine curve, with betas clipped so alpha_bar_Tmax stays positive.
/// Throws ConfigError when the result is not strictly decreasing or leaves (0, 1].
NoiseSchedule build_noise_schedule(ScheduleKind kind, int t_max, std::pair<double, double> params);

}  // namespace ousac
