#pragma once

#include <map>
#include <random>
#include <vector>

#include "ousac/common.hpp"
#include "ousac/diffusion/guidance.hpp"
#include "ousac/diffusion/noise_schedule.hpp"

namespace ousac {

struct MixtureComponent {
    double weight = 1.0;
    Vec mean;
    double variance = 1.0;  // isotropic; 0 is a point mass
    int label = 0;          // class this component belongs to
};

/// Isotropic Gaussian mixture. A condition selects the components carrying its
/// label; the null condition is the full mixture.
class GaussianMixture {
public:
    explicit GaussianMixture(std::vector<MixtureComponent> components);

    int dim() const { return static_cast<int>(components_.front().mean.size()); }
    const std::vector<MixtureComponent>& components() const { return components_; }
    std::vector<int> labels() const;

    /// Sub-mixture of class c with renormalized weights.
    GaussianMixture conditional(int c) const;
    const GaussianMixture& select(Condition c, const std::map<int, GaussianMixture>& by_class) const;

    /// Log density of the forward marginal at signal level alpha_bar:
    /// sum_k pi_k N(x; sqrt(ab) m_k, (ab s_k^2 + 1 - ab) I). alpha_bar = 1 is the data density.
    double log_marginal_density(const Vec& x, double alpha_bar) const;
    /// Gradient of log_marginal_density in x, responsibilities evaluated in log space.
    Vec marginal_score(const Vec& x, double alpha_bar) const;
    double log_density(const Vec& x) const { return log_marginal_density(x, 1.0); }

    std::vector<Vec> sample(int n, std::mt19937_64& rng) const;

private:
    std::vector<MixtureComponent> components_;
};

/// eps*(x_t, t) = -sqrt(1 - ab_t) * grad log p_t(x_t).
Vec exact_eps(const GaussianMixture& gm, const Vec& x_t, int t, const NoiseSchedule& sched);

/// Analytic conditional/unconditional noise predictor for a mixture.
class MixturePredictor final : public NoisePredictor {
public:
    MixturePredictor(GaussianMixture gm, NoiseSchedule sched);

    int dim() const override { return gm_.dim(); }
    Vec predict(const Vec& x, int t, Condition c) const override;

    const GaussianMixture& mixture() const { return gm_; }
    const GaussianMixture& mixture(Condition c) const;
    const NoiseSchedule& schedule() const { return sched_; }

private:
    GaussianMixture gm_;
    std::map<int, GaussianMixture> by_class_;
    NoiseSchedule sched_;
};

struct DensityGridSpec {
    double lo = -8.0;
    double hi = 8.0;
    int points = 16001;
};

/// Normalized 1D density tabulated on a uniform grid.
struct GridDensity {
    std::vector<double> x;
    std::vector<double> density;
    double normalizer = 1.0;  // integral of the unnormalized density
    double spacing() const { return x[1] - x[0]; }
    /// Trapezoid CDF at each grid node.
    std::vector<double> cdf() const;
};

GridDensity mixture_density_grid(const GaussianMixture& gm, const DensityGridSpec& spec = {});

/// Density proportional to p_u(x) * (p_c(x) / p_u(x))^w on a grid (1D only).
/// Throws std::domain_error when the tilt has numerically zero or non-finite mass.
GridDensity mixture_guided_target(const GaussianMixture& gm_c, const GaussianMixture& gm_u, double w,
                                  const DensityGridSpec& spec = {});

}  // namespace ousac
