#include "ousac/models/gaussian_mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace ousac {

GaussianMixture::GaussianMixture(std::vector<MixtureComponent> components) : components_(std::move(components)) {
    if (components_.empty()) throw ConfigError("mixture has no components");
    const auto d = components_.front().mean.size();
    if (d == 0) throw ConfigError("mixture component mean is empty");
    double total = 0.0;
    for (const auto& c : components_) {
        if (c.mean.size() != d) throw ConfigError("mixture components differ in dimension");
        if (!(c.weight > 0.0)) throw ConfigError("mixture weights must be positive");
        if (!(c.variance >= 0.0)) throw ConfigError("mixture variances must be non-negative");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture weights must sum to 1");
}

std::vector<int> GaussianMixture::labels() const {
    std::set<int> s;
    for (const auto& c : components_) s.insert(c.label);
    return {s.begin(), s.end()};
}

GaussianMixture GaussianMixture::conditional(int c) const {
    std::vector<MixtureComponent> sub;
    double total = 0.0;
    for (const auto& comp : components_)
        if (comp.label == c) {
            sub.push_back(comp);
            total += comp.weight;
        }
    if (sub.empty()) throw ConfigError("no mixture component carries class " + std::to_string(c));
    for (auto& comp : sub) comp.weight /= total;
    // Re-sum so the 1e-12 invariant holds after division round-off.
    double s = 0.0;
    for (const auto& comp : sub) s += comp.weight;
    sub.back().weight += 1.0 - s;
    return GaussianMixture(std::move(sub));
}

const GaussianMixture& GaussianMixture::select(Condition c, const std::map<int, GaussianMixture>& by_class) const {
    if (!c) return *this;
    const auto it = by_class.find(*c);
    if (it == by_class.end()) throw ConfigError("unknown class " + std::to_string(*c));
    return it->second;
}

namespace {

// Per-component log weight + log normal, and the component score.
void component_terms(const MixtureComponent& comp, const Vec& x, double ab, double& log_term, Vec* score) {
    const double v = ab * comp.variance + (1.0 - ab);
    const Vec diff = x - std::sqrt(ab) * comp.mean;
    const double d = static_cast<double>(x.size());
    log_term = std::log(comp.weight) - 0.5 * d * std::log(2.0 * std::numbers::pi * v) - diff.squaredNorm() / (2.0 * v);
    if (score) *score = -diff / v;
}

}  // namespace

double GaussianMixture::log_marginal_density(const Vec& x, double alpha_bar) const {
    std::vector<double> terms(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
        if (alpha_bar >= 1.0 && components_[k].variance == 0.0)
            throw std::domain_error("point-mass component has no density at alpha_bar = 1");
        component_terms(components_[k], x, alpha_bar, terms[k], nullptr);
    }
    const double m = *std::max_element(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s);
}

Vec GaussianMixture::marginal_score(const Vec& x, double alpha_bar) const {
    std::vector<double> terms(components_.size());
    std::vector<Vec> scores(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k)
        component_terms(components_[k], x, alpha_bar, terms[k], &scores[k]);
    const double m = *std::max_element(terms.begin(), terms.end());
    double total = 0.0;
    Vec acc = Vec::Zero(x.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const double r = std::exp(terms[k] - m);
        total += r;
        acc += r * scores[k];
    }
    return acc / total;
}

std::vector<Vec> GaussianMixture::sample(int n, std::mt19937_64& rng) const {
    std::vector<double> weights;
    for (const auto& c : components_) weights.push_back(c.weight);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& c = components_[pick(rng)];
        Vec x(c.mean.size());
        for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = c.mean(k) + std::sqrt(c.variance) * normal(rng);
        out.push_back(std::move(x));
    }
    return out;
}

Vec exact_eps(const GaussianMixture& gm, const Vec& x_t, int t, const NoiseSchedule& sched) {
    const double ab = sched.alpha_bar(t);
    return -std::sqrt(1.0 - ab) * gm.marginal_score(x_t, ab);
}

MixturePredictor::MixturePredictor(GaussianMixture gm, NoiseSchedule sched) : gm_(std::move(gm)), sched_(std::move(sched)) {
    for (int c : gm_.labels()) by_class_.emplace(c, gm_.conditional(c));
}

const GaussianMixture& MixturePredictor::mixture(Condition c) const { return gm_.select(c, by_class_); }

Vec MixturePredictor::predict(const Vec& x, int t, Condition c) const { return exact_eps(mixture(c), x, t, sched_); }

std::vector<double> GridDensity::cdf() const {
    std::vector<double> F(x.size(), 0.0);
    const double h = spacing();
    for (std::size_t i = 1; i < x.size(); ++i) F[i] = F[i - 1] + 0.5 * h * (density[i - 1] + density[i]);
    return F;
}

namespace {

GridDensity normalize_log_grid(std::vector<double> xs, const std::vector<double>& logf) {
    const double m = *std::max_element(logf.begin(), logf.end());
    if (!std::isfinite(m)) throw std::domain_error("density has no finite mass on the grid");
    const double h = xs[1] - xs[0];
    std::vector<double> f(xs.size());
    double mass = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        f[i] = std::exp(logf[i] - m);
        if (i > 0) mass += 0.5 * h * (f[i - 1] + f[i]);
    }
    if (!(mass > 0.0) || !std::isfinite(mass)) throw std::domain_error("density is not normalizable on the grid");
    GridDensity g;
    g.x = std::move(xs);
    g.normalizer = mass * std::exp(m);
    if (!(g.normalizer > 0.0) || !std::isfinite(g.normalizer))
        throw std::domain_error("density normalizer is zero or non-finite");
    g.density.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) g.density[i] = f[i] / mass;
    return g;
}

std::vector<double> grid_nodes(const DensityGridSpec& spec) {
    if (spec.points < 2 || !(spec.hi > spec.lo)) throw ConfigError("invalid density grid");
    std::vector<double> xs(static_cast<std::size_t>(spec.points));
    for (int i = 0; i < spec.points; ++i)
        xs[static_cast<std::size_t>(i)] = spec.lo + (spec.hi - spec.lo) * i / (spec.points - 1);
    return xs;
}

}  // namespace

GridDensity mixture_density_grid(const GaussianMixture& gm, const DensityGridSpec& spec) {
    if (gm.dim() != 1) throw ConfigError("grid densities are 1D only");
    auto xs = grid_nodes(spec);
    std::vector<double> logf(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) logf[i] = gm.log_density(Vec::Constant(1, xs[i]));
    return normalize_log_grid(std::move(xs), logf);
}

GridDensity mixture_guided_target(const GaussianMixture& gm_c, const GaussianMixture& gm_u, double w,
                                  const DensityGridSpec& spec) {
    if (!(w >= 0.0)) throw ConfigError("guidance weight must be non-negative");
    if (gm_c.dim() != 1 || gm_u.dim() != 1) throw ConfigError("guided target densities are 1D only");
    auto xs = grid_nodes(spec);
    std::vector<double> logf(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Vec x = Vec::Constant(1, xs[i]);
        const double lu = gm_u.log_density(x);
        const double lc = gm_c.log_density(x);
        logf[i] = (1.0 - w) * lu + w * lc;
    }
    return normalize_log_grid(std::move(xs), logf);
}

}  // namespace ousac
