#pragma once

#include <optional>

#include "ousac/common.hpp"
#include "ousac/diffusion/noise_schedule.hpp"

namespace ousac {

/// x_{t_prev} = sqrt(ab_prev) * x0_hat + sqrt(1 - ab_prev - sigma^2) * eps + sigma * noise,
/// x0_hat = (x_t - sqrt(1 - ab_t) * eps) / sqrt(ab_t). t_prev == 0 uses ab_0 = 1.
/// Throws std::invalid_argument when 1 - ab_prev - sigma^2 < 0 or noise is missing with sigma > 0.
Vec ddim_step(const Vec& x_t, const Vec& eps, int t, int t_prev, const NoiseSchedule& sched, double sigma_t = 0.0,
              const std::optional<Vec>& noise = std::nullopt);

/// DDIM noise coefficient beta_{t_prev,t} = sqrt(1 - ab_prev) - sqrt(ab_prev * (1 - ab_t) / ab_t),
/// so that a deterministic step is x_prev = sqrt(ab_prev / ab_t) * x_t + beta * eps.
double ddim_noise_coefficient(int t, int t_prev, const NoiseSchedule& sched);

/// Stochastic DDIM sigma_t for a given eta (eta = 0 is deterministic).
double ddim_sigma(int t, int t_prev, const NoiseSchedule& sched, double eta);

/// Change in x_{t_prev} when the CFG scale at step t moves from w_t to w_prev.
/// exact=true uses beta_{t_prev,t}; exact=false uses the approximate coefficient sqrt(ab_prev / ab_t).
Vec deviation_scale(const Vec& eps_c, const Vec& eps_u, double w_t, double w_prev, int t, int t_prev,
                    const NoiseSchedule& sched, bool exact = true);

/// Change in x_{t_prev} when step t switches from CFG at w_t to conditional-only:
/// beta_{t_prev,t} * (1 - w_t) * (eps_c - eps_u).
Vec deviation_switch(const Vec& eps_c, const Vec& eps_u, double w_t, int t, int t_prev, const NoiseSchedule& sched);

}  // namespace ousac
