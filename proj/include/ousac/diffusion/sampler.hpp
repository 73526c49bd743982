#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "ousac/common.hpp"
#include "ousac/diffusion/guidance.hpp"
#include "ousac/diffusion/noise_schedule.hpp"
#include "ousac/metrics/pass_ledger.hpp"

namespace ousac {

/// Initial noise x_T paired with the condition it is sampled under.
struct Probe {
    Vec x_T;
    Condition c;
};

/// n probes with x_T ~ N(0, I). `classes` empty gives the null condition, one
/// entry fixes the class, several entries are drawn uniformly.
std::vector<Probe> draw_probes(int n, int dim, const std::vector<int>& classes, std::uint64_t seed);

/// Guided noise evaluation for one trajectory. Implementations may carry
/// per-trajectory state (feature caches) and must not be shared across runs.
class StepModel {
public:
    virtual ~StepModel() = default;
    virtual int dim() const = 0;
    virtual Vec guided_eps(const Vec& x, int step, int t, Condition c, double w_t, double tau, PassLedger& ledger) = 0;
};

/// Stateless adapter: every step is a plain thresholded CFG evaluation.
class PlainStepModel final : public StepModel {
public:
    explicit PlainStepModel(const NoisePredictor& model) : model_(model) {}
    int dim() const override { return model_.dim(); }
    Vec guided_eps(const Vec& x, int, int t, Condition c, double w_t, double tau, PassLedger& ledger) override {
        return guided_prediction(x, t, c, w_t, tau, model_, ledger);
    }

private:
    const NoisePredictor& model_;
};

using StepModelFactory = std::function<std::unique_ptr<StepModel>()>;

struct SamplerOptions {
    double eta = 0.0;  // DDIM stochasticity; 0 is deterministic
    std::uint64_t seed = 0;
    bool record_states = true;
    bool record_step_ledgers = false;
};

struct Trajectory {
    std::vector<int> timesteps;  // grid entries followed by 0
    std::vector<Vec> states;     // x_T .. x_0 (only x_0 when states are not recorded)
    PassLedger ledger;
    std::vector<PassLedger> step_ledgers;

    const Vec& final_state() const { return states.back(); }
};

/// T-step guided DDIM generation. Throws NumericalDivergence on NaN/Inf.
Trajectory sample(const Probe& probe, const TimestepGrid& grid, const GuidanceSchedule& gsched, StepModel& model,
                  const NoiseSchedule& sched, const SamplerOptions& opts = {});
Trajectory sample(const Probe& probe, const TimestepGrid& grid, const GuidanceSchedule& gsched,
                  const NoisePredictor& model, const NoiseSchedule& sched, const SamplerOptions& opts = {});

/// Final states of many independent trajectories plus their ledgers merged in probe order.
struct BatchResult {
    std::vector<Vec> finals;
    PassLedger ledger;
};

/// OpenMP-parallel over probes. Probe i uses seed opts.seed + i for its noise stream,
/// so results match sample_final_batch_serial bit for bit.
BatchResult sample_final_batch(std::span<const Probe> probes, const TimestepGrid& grid,
                               const GuidanceSchedule& gsched, const StepModelFactory& make_model,
                               const NoiseSchedule& sched, const SamplerOptions& opts = {});
BatchResult sample_final_batch(std::span<const Probe> probes, const TimestepGrid& grid,
                               const GuidanceSchedule& gsched, const NoisePredictor& model,
                               const NoiseSchedule& sched, const SamplerOptions& opts = {});

/// Serial reference for the batch kernels.
BatchResult sample_final_batch_serial(std::span<const Probe> probes, const TimestepGrid& grid,
                                      const GuidanceSchedule& gsched, const StepModelFactory& make_model,
                                      const NoiseSchedule& sched, const SamplerOptions& opts = {});
BatchResult sample_final_batch_serial(std::span<const Probe> probes, const TimestepGrid& grid,
                                      const GuidanceSchedule& gsched, const NoisePredictor& model,
                                      const NoiseSchedule& sched, const SamplerOptions& opts = {});

/// CSV with columns step_index,timestep,component_0..component_{D-1}.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace ousac
