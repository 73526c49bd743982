#pragma once

#include <span>
#include <vector>

#include "ousac/common.hpp"
#include "ousac/diffusion/guidance.hpp"
#include "ousac/models/gaussian_mixture.hpp"

namespace ousac {

/// Exact W1 between two empirical distributions. Equal counts use the sorted
/// coupling; unequal counts integrate |F_a - F_b| between merged sample points.
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

/// W1 between an empirical sample and a tabulated density, integrating
/// |F_emp - F| exactly with F piecewise linear between grid nodes.
/// Mass outside the grid is treated as F = 0 on the left and 1 on the right.
double wasserstein_1d_to_density(std::span<const double> samples, const GridDensity& target);

/// V-statistic energy distance 2E|X-Y| - E|X-X'| - E|Y-Y'|; OpenMP-parallel over rows.
double energy_distance(std::span<const Vec> a, std::span<const Vec> b);
/// Serial reference for energy_distance.
double energy_distance_serial(std::span<const Vec> a, std::span<const Vec> b);

struct PassCount {
    int total_forward_passes = 0;
    int cfg_steps = 0;
};

/// cfg_steps = |{t : w_t >= tau}|, total = T + cfg_steps.
PassCount count_passes(const GuidanceSchedule& gsched);

/// First component of each sample.
std::vector<double> first_components(std::span<const Vec> samples);

struct HistogramBin {
    double left = 0.0;
    double right = 0.0;
    double density = 0.0;
};

/// Equal-width density histogram over [lo, hi]; samples outside are dropped from
/// the bins but still count toward the normalization.
std::vector<HistogramBin> histogram(std::span<const double> samples, double lo, double hi, int bins);

}  // namespace ousac
