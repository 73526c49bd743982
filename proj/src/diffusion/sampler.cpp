#include "ousac/diffusion/sampler.hpp"

#include <exception>
#include <iomanip>
#include <ostream>
#include <random>

#include "ousac/diffusion/ddim.hpp"

namespace ousac {

std::vector<Probe> draw_probes(int n, int dim, const std::vector<int>& classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Probe> probes;
    probes.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Probe p;
        p.x_T.resize(dim);
        for (int k = 0; k < dim; ++k) p.x_T(k) = normal(rng);
        if (classes.size() == 1) {
            p.c = classes.front();
        } else if (!classes.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, classes.size() - 1);
            p.c = classes[pick(rng)];
        }
        probes.push_back(std::move(p));
    }
    return probes;
}

Trajectory sample(const Probe& probe, const TimestepGrid& grid, const GuidanceSchedule& gsched, StepModel& model,
                  const NoiseSchedule& sched, const SamplerOptions& opts) {
    if (gsched.size() != grid.size())
        throw ConfigError("guidance schedule length " + std::to_string(gsched.size()) +
                          " does not match grid length " + std::to_string(grid.size()));
    if (probe.x_T.size() != model.dim()) throw ConfigError("x_T dimension does not match the model");

    Trajectory traj;
    traj.timesteps.reserve(static_cast<std::size_t>(grid.size()) + 1);
    for (int t : grid.steps()) traj.timesteps.push_back(t);
    traj.timesteps.push_back(0);
    if (opts.record_states) traj.states.reserve(traj.timesteps.size());

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    Vec x = probe.x_T;
    if (opts.record_states) traj.states.push_back(x);
    for (int i = 0; i < grid.size(); ++i) {
        const int t = grid[i];
        const int t_prev = grid.next(i);
        PassLedger step_ledger;
        PassLedger& ledger = opts.record_step_ledgers ? step_ledger : traj.ledger;
        const Vec eps = model.guided_eps(x, i, t, probe.c, gsched[i], gsched.tau(), ledger);
        const double sigma = ddim_sigma(t, t_prev, sched, opts.eta);
        if (sigma > 0.0) {
            Vec noise(x.size());
            for (Eigen::Index k = 0; k < noise.size(); ++k) noise(k) = normal(rng);
            x = ddim_step(x, eps, t, t_prev, sched, sigma, noise);
        } else {
            x = ddim_step(x, eps, t, t_prev, sched);
        }
        if (!x.allFinite()) throw NumericalDivergence("non-finite sampler state", t);
        if (opts.record_step_ledgers) {
            traj.ledger.merge(step_ledger);
            traj.step_ledgers.push_back(std::move(step_ledger));
        }
        if (opts.record_states) traj.states.push_back(x);
    }
    if (!opts.record_states) traj.states.push_back(x);
    return traj;
}

Trajectory sample(const Probe& probe, const TimestepGrid& grid, const GuidanceSchedule& gsched,
                  const NoisePredictor& model, const NoiseSchedule& sched, const SamplerOptions& opts) {
    PlainStepModel step_model(model);
    return sample(probe, grid, gsched, step_model, sched, opts);
}

namespace {

SamplerOptions final_only(const SamplerOptions& opts, std::size_t i) {
    SamplerOptions o = opts;
    o.record_states = false;
    o.record_step_ledgers = false;
    o.seed = opts.seed + i;
    return o;
}

BatchResult merge_batch(std::vector<Vec> finals, const std::vector<PassLedger>& ledgers) {
    BatchResult out;
    out.finals = std::move(finals);
    for (const auto& l : ledgers) out.ledger.merge(l);
    return out;
}

}  // namespace

BatchResult sample_final_batch(std::span<const Probe> probes, const TimestepGrid& grid,
                               const GuidanceSchedule& gsched, const StepModelFactory& make_model,
                               const NoiseSchedule& sched, const SamplerOptions& opts) {
    const auto n = static_cast<std::ptrdiff_t>(probes.size());
    std::vector<Vec> finals(probes.size());
    std::vector<PassLedger> ledgers(probes.size());
    std::vector<std::exception_ptr> errors(probes.size());

#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        try {
            auto model = make_model();
            Trajectory traj = sample(probes[u], grid, gsched, *model, sched, final_only(opts, u));
            finals[u] = std::move(traj.states.back());
            ledgers[u] = std::move(traj.ledger);
        } catch (...) {
            errors[u] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return merge_batch(std::move(finals), ledgers);
}

BatchResult sample_final_batch(std::span<const Probe> probes, const TimestepGrid& grid,
                               const GuidanceSchedule& gsched, const NoisePredictor& model,
                               const NoiseSchedule& sched, const SamplerOptions& opts) {
    return sample_final_batch(
        probes, grid, gsched, [&model] { return std::make_unique<PlainStepModel>(model); }, sched, opts);
}

BatchResult sample_final_batch_serial(std::span<const Probe> probes, const TimestepGrid& grid,
                                      const GuidanceSchedule& gsched, const StepModelFactory& make_model,
                                      const NoiseSchedule& sched, const SamplerOptions& opts) {
    std::vector<Vec> finals;
    std::vector<PassLedger> ledgers;
    finals.reserve(probes.size());
    ledgers.reserve(probes.size());
    for (std::size_t i = 0; i < probes.size(); ++i) {
        auto model = make_model();
        Trajectory traj = sample(probes[i], grid, gsched, *model, sched, final_only(opts, i));
        finals.push_back(std::move(traj.states.back()));
        ledgers.push_back(std::move(traj.ledger));
    }
    return merge_batch(std::move(finals), ledgers);
}

BatchResult sample_final_batch_serial(std::span<const Probe> probes, const TimestepGrid& grid,
                                      const GuidanceSchedule& gsched, const NoisePredictor& model,
                                      const NoiseSchedule& sched, const SamplerOptions& opts) {
    return sample_final_batch_serial(
        probes, grid, gsched, [&model] { return std::make_unique<PlainStepModel>(model); }, sched, opts);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    const Eigen::Index dim = traj.states.empty() ? 0 : traj.states.front().size();
    os << "step_index,timestep";
    for (Eigen::Index k = 0; k < dim; ++k) os << ",component_" << k;
    os << '\n';
    // With states elided only x_0 is present; it pairs with the final timestep.
    const std::size_t offset = traj.timesteps.size() - traj.states.size();
    os << std::setprecision(17);
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        os << (i + offset) << ',' << traj.timesteps[i + offset];
        for (Eigen::Index k = 0; k < dim; ++k) os << ',' << traj.states[i](k);
        os << '\n';
    }
}

}  // namespace ousac
