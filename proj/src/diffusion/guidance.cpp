#include "ousac/diffusion/guidance.hpp"

#include <cmath>

namespace ousac {

TimestepGrid::TimestepGrid(std::vector<int> steps) : steps_(std::move(steps)) {
    if (steps_.empty()) throw ConfigError("timestep grid is empty");
    for (std::size_t i = 0; i < steps_.size(); ++i) {
        if (steps_[i] < 1) throw ConfigError("timestep grid entries must be >= 1");
        if (i > 0 && steps_[i] >= steps_[i - 1]) throw ConfigError("timestep grid must be strictly decreasing");
    }
}

TimestepGrid TimestepGrid::uniform(int t_max, int steps) {
    if (steps < 1 || steps > t_max) throw ConfigError("grid step count must lie in [1, T_max]");
    std::vector<int> v(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i)
        v[static_cast<std::size_t>(i)] =
            static_cast<int>(std::lround(static_cast<double>(t_max) * (steps - i) / steps));
    return TimestepGrid(std::move(v));
}

GuidanceSchedule::GuidanceSchedule(Vec w, double tau, double w_max) : w_(std::move(w)), tau_(tau), w_max_(w_max) {
    if (!(w_max_ > 0.0)) throw ConfigError("w_max must be positive");
    if (!(tau_ >= 0.0)) throw ConfigError("tau must be non-negative");
    for (Eigen::Index i = 0; i < w_.size(); ++i)
        if (!(w_(i) >= 0.0 && w_(i) <= w_max_))
            throw ConfigError("guidance scale w[" + std::to_string(i) + "] outside [0, w_max]");
}

GuidanceSchedule GuidanceSchedule::constant(int steps, double w_const, double tau, double w_max) {
    return GuidanceSchedule(Vec::Constant(steps, w_const), tau, w_max);
}

int GuidanceSchedule::active_count() const {
    int n = 0;
    for (int i = 0; i < size(); ++i) n += active(i) ? 1 : 0;
    return n;
}

GuidanceSchedule GuidanceSchedule::thresholded() const {
    Vec w = w_;
    for (int i = 0; i < size(); ++i)
        if (!active(i)) w(i) = 0.0;
    return GuidanceSchedule(std::move(w), tau_, w_max_);
}

Vec apply_cfg(const Vec& eps_u, const Vec& eps_c, double w) {
    return eps_u + w * (eps_c - eps_u);
}

Vec guided_prediction(const Vec& x, int t, Condition c, double w_t, double tau, const NoisePredictor& model,
                      PassLedger& ledger) {
    const auto record = [&](Branch b) {
        ledger.record_pass(b);
        for (int l = 0; l < model.block_count(); ++l) ledger.record_full_block(l, model.block_macs());
    };
    Vec eps_c = model.predict(x, t, c);
    record(Branch::conditional);
    if (!(w_t >= tau)) return eps_c;
    Vec eps_u = model.predict(x, t, std::nullopt);
    record(Branch::unconditional);
    return apply_cfg(eps_u, eps_c, w_t);
}

}  // namespace ousac
