#pragma once

#include <vector>

#include "ousac/common.hpp"
#include "ousac/metrics/pass_ledger.hpp"

namespace ousac {

/// Strictly decreasing sampling timesteps drawn from 1..T_max.
class TimestepGrid {
public:
    explicit TimestepGrid(std::vector<int> steps);

    /// Uniform stride over 1..T_max: t_i = round(T_max * (T - i) / T), i = 0..T-1.
    static TimestepGrid uniform(int t_max, int steps);

    int size() const { return static_cast<int>(steps_.size()); }
    int operator[](int i) const { return steps_[static_cast<std::size_t>(i)]; }
    /// Timestep following position i; 0 after the last entry.
    int next(int i) const { return i + 1 < size() ? steps_[static_cast<std::size_t>(i + 1)] : 0; }
    const std::vector<int>& steps() const { return steps_; }

private:
    std::vector<int> steps_;
};

/// Per-step guidance scales w_t in [0, w_max]; step i is CFG-active iff w_i >= tau.
class GuidanceSchedule {
public:
    GuidanceSchedule(Vec w, double tau, double w_max);

    static GuidanceSchedule constant(int steps, double w_const, double tau, double w_max);

    int size() const { return static_cast<int>(w_.size()); }
    double operator[](int i) const { return w_(i); }
    bool active(int i) const { return w_(i) >= tau_; }
    int active_count() const;
    const Vec& values() const { return w_; }
    double tau() const { return tau_; }
    double w_max() const { return w_max_; }

    /// Copy with every inactive entry set to zero.
    GuidanceSchedule thresholded() const;

private:
    Vec w_;
    double tau_;
    double w_max_;
};

/// Noise predictor with conditional and unconditional outputs.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual int dim() const = 0;
    virtual Vec predict(const Vec& x, int t, Condition c) const = 0;
    /// Number of cost-bearing blocks in one pass (0 for analytic models).
    virtual int block_count() const { return 0; }
    /// MACs of one full block under the ledger cost model.
    virtual double block_macs() const { return 0.0; }
};

/// eps_u + w * (eps_c - eps_u).
Vec apply_cfg(const Vec& eps_u, const Vec& eps_c, double w);

/// Thresholded guidance: full CFG when w_t >= tau, conditional-only otherwise.
/// Records the executed passes in `ledger`.
Vec guided_prediction(const Vec& x, int t, Condition c, double w_t, double tau, const NoisePredictor& model,
                      PassLedger& ledger);

}  // namespace ousac
