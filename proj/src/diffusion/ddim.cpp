#include "ousac/diffusion/ddim.hpp"

#include <cmath>

namespace ousac {

Vec ddim_step(const Vec& x_t, const Vec& eps, int t, int t_prev, const NoiseSchedule& sched, double sigma_t,
              const std::optional<Vec>& noise) {
    if (!(t > t_prev && t_prev >= 0)) throw std::invalid_argument("ddim_step requires t > t_prev >= 0");
    if (sigma_t < 0.0) throw std::invalid_argument("sigma_t must be non-negative");
    const double ab = sched.alpha_bar(t);
    const double ab_prev = sched.alpha_bar(t_prev);
    const double dir2 = 1.0 - ab_prev - sigma_t * sigma_t;
    // Allow round-off at the terminal step where 1 - ab_prev is exactly zero.
    if (dir2 < -1e-15) throw std::invalid_argument("invalid sigma: 1 - alpha_bar_prev - sigma^2 < 0");

    const Vec x0_hat = (x_t - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
    Vec out = std::sqrt(ab_prev) * x0_hat + std::sqrt(std::max(dir2, 0.0)) * eps;
    if (sigma_t > 0.0) {
        if (!noise) throw std::invalid_argument("sigma_t > 0 requires a noise vector");
        out += sigma_t * *noise;
    }
    return out;
}

double ddim_noise_coefficient(int t, int t_prev, const NoiseSchedule& sched) {
    const double ab = sched.alpha_bar(t);
    const double ab_prev = sched.alpha_bar(t_prev);
    return std::sqrt(1.0 - ab_prev) - std::sqrt(ab_prev * (1.0 - ab) / ab);
}

double ddim_sigma(int t, int t_prev, const NoiseSchedule& sched, double eta) {
    if (eta == 0.0) return 0.0;
    const double ab = sched.alpha_bar(t);
    const double ab_prev = sched.alpha_bar(t_prev);
    return eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
}

Vec deviation_scale(const Vec& eps_c, const Vec& eps_u, double w_t, double w_prev, int t, int t_prev,
                    const NoiseSchedule& sched, bool exact) {
    const double coeff = exact ? ddim_noise_coefficient(t, t_prev, sched)
                               : std::sqrt(sched.alpha_bar(t_prev) / sched.alpha_bar(t));
    return coeff * (w_prev - w_t) * (eps_c - eps_u);
}

Vec deviation_switch(const Vec& eps_c, const Vec& eps_u, double w_t, int t, int t_prev, const NoiseSchedule& sched) {
    return ddim_noise_coefficient(t, t_prev, sched) * (1.0 - w_t) * (eps_c - eps_u);
}

}  // namespace ousac
