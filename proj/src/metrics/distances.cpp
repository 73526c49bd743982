#include "ousac/metrics/distances.hpp"

#include <algorithm>
#include <cmath>

namespace ousac {

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein_1d needs non-empty samples");
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa.size() == sb.size()) {
        double s = 0.0;
        for (std::size_t i = 0; i < sa.size(); ++i) s += std::abs(sa[i] - sb[i]);
        return s / static_cast<double>(sa.size());
    }
    // Walk merged support; between consecutive points both CDFs are constant.
    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double prev = std::min(sa.front(), sb.front());
    double total = 0.0;
    while (i < sa.size() || j < sb.size()) {
        double next;
        if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j]))
            next = sa[i];
        else
            next = sb[j];
        total += std::abs(i / na - j / nb) * (next - prev);
        while (i < sa.size() && sa[i] == next) ++i;
        while (j < sb.size() && sb[j] == next) ++j;
        prev = next;
    }
    return total;
}

namespace {

// Integral over [0, h] of |c0 + (c1 - c0) s / h| ds.
double abs_linear_integral(double c0, double c1, double h) {
    if ((c0 >= 0.0 && c1 >= 0.0) || (c0 <= 0.0 && c1 <= 0.0)) return 0.5 * h * std::abs(c0 + c1);
    const double root = h * c0 / (c0 - c1);
    return 0.5 * root * std::abs(c0) + 0.5 * (h - root) * std::abs(c1);
}

}  // namespace

double wasserstein_1d_to_density(std::span<const double> samples, const GridDensity& target) {
    if (samples.empty()) throw std::invalid_argument("wasserstein_1d_to_density needs samples");
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());
    const std::vector<double> F = target.cdf();
    const auto& x = target.x;

    double total = 0.0;
    std::size_t k = 0;
    // Samples left of the grid: F = 0 there.
    while (k < s.size() && s[k] < x.front()) {
        const double right = (k + 1 < s.size()) ? std::min(s[k + 1], x.front()) : x.front();
        total += (k + 1) / n * (right - s[k]);
        ++k;
    }
    for (std::size_t g = 0; g + 1 < x.size(); ++g) {
        double left = x[g];
        const double slope = (F[g + 1] - F[g]) / (x[g + 1] - x[g]);
        auto F_at = [&](double pos) { return F[g] + slope * (pos - x[g]); };
        while (true) {
            const double right = (k < s.size() && s[k] < x[g + 1]) ? s[k] : x[g + 1];
            const double emp = k / n;
            total += abs_linear_integral(emp - F_at(left), emp - F_at(right), right - left);
            left = right;
            if (right == x[g + 1]) break;
            ++k;
        }
    }
    // Samples right of the grid: F = 1 there.
    double left = x.back();
    while (k < s.size()) {
        total += (1.0 - k / n) * (s[k] - left);
        left = s[k];
        ++k;
    }
    return total;
}

namespace {

double mean_pairwise(std::span<const Vec> a, std::span<const Vec> b, bool parallel) {
    const auto na = static_cast<std::ptrdiff_t>(a.size());
    double sum = 0.0;
    if (parallel) {
#pragma omp parallel for reduction(+ : sum) schedule(static)
        for (std::ptrdiff_t i = 0; i < na; ++i) {
            double row = 0.0;
            for (const auto& y : b) row += (a[static_cast<std::size_t>(i)] - y).norm();
            sum += row;
        }
    } else {
        for (std::ptrdiff_t i = 0; i < na; ++i) {
            double row = 0.0;
            for (const auto& y : b) row += (a[static_cast<std::size_t>(i)] - y).norm();
            sum += row;
        }
    }
    return sum / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

double energy(std::span<const Vec> a, std::span<const Vec> b, bool parallel) {
    if (a.empty() || b.empty()) throw std::invalid_argument("energy_distance needs non-empty samples");
    if (a.front().size() != b.front().size()) throw std::invalid_argument("energy_distance dimension mismatch");
    const double d = 2.0 * mean_pairwise(a, b, parallel) - mean_pairwise(a, a, parallel) - mean_pairwise(b, b, parallel);
    return std::max(d, 0.0);
}

}  // namespace

double energy_distance(std::span<const Vec> a, std::span<const Vec> b) { return energy(a, b, true); }

double energy_distance_serial(std::span<const Vec> a, std::span<const Vec> b) { return energy(a, b, false); }

PassCount count_passes(const GuidanceSchedule& gsched) {
    PassCount pc;
    pc.cfg_steps = gsched.active_count();
    pc.total_forward_passes = gsched.size() + pc.cfg_steps;
    return pc;
}

std::vector<double> first_components(std::span<const Vec> samples) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s(0));
    return out;
}

std::vector<HistogramBin> histogram(std::span<const double> samples, double lo, double hi, int bins) {
    if (bins < 1 || !(hi > lo)) throw std::invalid_argument("invalid histogram range");
    const double width = (hi - lo) / bins;
    std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
    for (int b = 0; b < bins; ++b) {
        out[static_cast<std::size_t>(b)].left = lo + b * width;
        out[static_cast<std::size_t>(b)].right = lo + (b + 1) * width;
    }
    if (samples.empty()) return out;
    for (double s : samples) {
        if (s < lo || s >= hi) continue;
        const auto b = std::min(static_cast<std::size_t>((s - lo) / width), out.size() - 1);
        out[b].density += 1.0;
    }
    for (auto& bin : out) bin.density /= static_cast<double>(samples.size()) * width;
    return out;
}

}  // namespace ousac
