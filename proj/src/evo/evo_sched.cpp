#include "ousac/evo/evo_sched.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ousac/models/model_io.hpp"

namespace ousac {

void EvoConfig::validate() const {
    if (population < 2) throw ConfigError("evo.population must be >= 2");
    if (generations < 1) throw ConfigError("evo.generations must be >= 1");
    if (!(sigma0 > 0.0)) throw ConfigError("evo.sigma0 must be positive");
    if (!(eta > 0.0)) throw ConfigError("evo.eta must be positive");
    if (lambda && !(*lambda >= 0.0)) throw ConfigError("evo.lambda must be non-negative");
    if (!(w_max > 0.0)) throw ConfigError("guidance.w_max must be positive");
    if (!(tau >= 0.0)) throw ConfigError("guidance.tau must be non-negative");
    if (steps < 1) throw ConfigError("grid.steps must be >= 1");
    if (ref_steps < steps) throw ConfigError("grid.ref_steps must be >= grid.steps");
    if (n_probes < 1) throw ConfigError("evo.n_probes must be >= 1");
    if (max_active < 0) throw ConfigError("evo.max_active must be >= 0");
}

Vec decode_center(const Vec& mu, double w_max) {
    return (w_max / (1.0 + (-mu.array()).exp())).matrix();
}

Vec encode_schedule(const Vec& w, double w_max) {
    const Eigen::ArrayXd z = (w.array() / w_max).max(kLogitEps).min(1.0 - kLogitEps);
    return (z / (1.0 - z)).log().matrix();
}

EvoState init_state(const EvoConfig& cfg) {
    EvoState s;
    s.mu = encode_schedule(Vec::Constant(cfg.steps, cfg.init_w.value_or(cfg.w_const)), cfg.w_max);
    return s;
}

double noise_scale(const EvoConfig& cfg, int generation) {
    return cfg.sigma0 * (1.0 - static_cast<double>(generation) / cfg.generations);
}

Vec cap_active(Vec w, double tau, int max_active) {
    if (max_active <= 0) return w;
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w(i) >= tau) active.push_back(i);
    if (static_cast<int>(active.size()) <= max_active) return w;
    std::stable_sort(active.begin(), active.end(), [&](Eigen::Index a, Eigen::Index b) { return w(a) > w(b); });
    for (std::size_t k = static_cast<std::size_t>(max_active); k < active.size(); ++k) w(active[k]) = 0.0;
    return w;
}

std::vector<Candidate> spawn_population(const EvoState& state, const EvoConfig& cfg, std::mt19937_64& rng) {
    if (state.generation >= cfg.generations) throw std::logic_error("spawn_population called after the last generation");
    const double sigma = noise_scale(cfg, state.generation);
    const Vec base = decode_center(state.mu, cfg.w_max);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Candidate> pop(static_cast<std::size_t>(cfg.population));
    for (auto& c : pop) {
        c.delta.resize(base.size());
        for (Eigen::Index t = 0; t < base.size(); ++t) c.delta(t) = sigma * normal(rng);
        c.w = (base + c.delta).cwiseMax(0.0).cwiseMin(cfg.w_max);
        c.w = cap_active(std::move(c.w), cfg.tau, cfg.max_active);
    }
    return pop;
}

double quality_loss(const GuidanceSchedule& w, std::span<const Probe> probes, const NoisePredictor& model,
                    const NoiseSchedule& sched, const TimestepGrid& grid, std::span<const Vec> ref_outputs) {
    if (probes.size() != ref_outputs.size())
        throw std::invalid_argument("quality_loss: " + std::to_string(probes.size()) + " probes but " +
                                    std::to_string(ref_outputs.size()) + " reference outputs");
    if (probes.empty()) throw std::invalid_argument("quality_loss needs at least one probe");
    SamplerOptions opts;
    opts.record_states = false;
    double total = 0.0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const Trajectory traj = sample(probes[i], grid, w, model, sched, opts);
        total += (traj.final_state() - ref_outputs[i]).squaredNorm();
    }
    return total / static_cast<double>(probes.size());
}

double sparsity(const Vec& w, double tau) {
    const auto active = (w.array() >= tau).count();
    return static_cast<double>(w.size() - active) / static_cast<double>(w.size());
}

double fitness(Candidate& candidate, double lambda) {
    candidate.fitness = std::isfinite(candidate.quality_loss) ? -candidate.quality_loss + lambda * candidate.sparsity
                                                              : -std::numeric_limits<double>::infinity();
    return candidate.fitness;
}

std::vector<double> rank_weights(std::span<const double> fitnesses) {
    const std::size_t P = fitnesses.size();
    if (P < 2) throw std::invalid_argument("rank_weights needs at least two candidates");
    std::vector<std::size_t> order(P);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fitnesses[a] < fitnesses[b]; });
    std::vector<double> a(P);
    for (std::size_t rank = 0; rank < P; ++rank)
        a[order[rank]] = static_cast<double>(rank) / static_cast<double>(P - 1) - 0.5;
    return a;
}

EvoState update_center(const EvoState& state, std::span<const Candidate> candidates, std::span<const double> weights,
                       double eta, double w_max) {
    if (candidates.size() != weights.size()) throw std::invalid_argument("update_center: weight count mismatch");
    EvoState next = state;
    Vec step = Vec::Zero(state.mu.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) step += weights[i] * (encode_schedule(candidates[i].w, w_max) - state.mu);
    next.mu = state.mu + (eta / static_cast<double>(candidates.size())) * step;
    next.generation = state.generation + 1;
    for (const auto& c : candidates)
        if (c.fitness > next.best_fitness) {
            next.best_fitness = c.fitness;
            next.best_w = c.w;
            next.best_quality_loss = c.quality_loss;
        }
    return next;
}

std::vector<Vec> reference_outputs(std::span<const Probe> probes, const NoisePredictor& model,
                                   const NoiseSchedule& sched, const TimestepGrid& ref_grid, double w_const,
                                   double tau, double w_max) {
    const auto ref = GuidanceSchedule::constant(ref_grid.size(), w_const, tau, std::max(w_max, w_const));
    return sample_final_batch(probes, ref_grid, ref, model, sched).finals;
}

namespace {

void evaluate_one(Candidate& c, double tau, double w_max, std::span<const Probe> probes, const NoisePredictor& model,
                  const NoiseSchedule& sched, const TimestepGrid& grid, std::span<const Vec> refs) {
    c.sparsity = sparsity(c.w, tau);
    try {
        c.quality_loss = quality_loss(GuidanceSchedule(c.w, tau, w_max), probes, model, sched, grid, refs);
    } catch (const NumericalDivergence&) {
        c.quality_loss = std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(c.quality_loss)) c.quality_loss = std::numeric_limits<double>::infinity();
}

}  // namespace

void evaluate_population(std::vector<Candidate>& candidates, double tau, double w_max, std::span<const Probe> probes,
                         const NoisePredictor& model, const NoiseSchedule& sched, const TimestepGrid& grid,
                         std::span<const Vec> ref_outputs) {
    const auto n = static_cast<std::ptrdiff_t>(candidates.size());
    std::vector<std::exception_ptr> errors(candidates.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            evaluate_one(candidates[static_cast<std::size_t>(i)], tau, w_max, probes, model, sched, grid, ref_outputs);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void evaluate_population_serial(std::vector<Candidate>& candidates, double tau, double w_max,
                                std::span<const Probe> probes, const NoisePredictor& model, const NoiseSchedule& sched,
                                const TimestepGrid& grid, std::span<const Vec> ref_outputs) {
    for (auto& c : candidates) evaluate_one(c, tau, w_max, probes, model, sched, grid, ref_outputs);
}

nlohmann::json to_json(const GenerationRecord& r) {
    return {{"g", r.g},
            {"best_fitness", r.best_fitness},
            {"mean_fitness", r.mean_fitness},
            {"mse_best", r.mse_best},
            {"sigma_noise", r.sigma_noise},
            {"active_steps_best", r.active_steps_best}};
}

namespace {

double median(std::vector<double> v) {
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

ScheduleSearchResult optimize_schedule(const EvoConfig& cfg, const NoisePredictor& model, const NoiseSchedule& sched,
                                       const TimestepGrid& grid, std::span<const Probe> probes,
                                       std::span<const Vec> ref_outputs) {
    cfg.validate();
    if (grid.size() != cfg.steps) throw ConfigError("grid length does not match evo steps");
    std::mt19937_64 rng(cfg.seed);
    EvoState state = init_state(cfg);
    std::optional<double> lambda = cfg.lambda;
    std::vector<GenerationRecord> log;

    for (int g = 0; g < cfg.generations; ++g) {
        auto pop = spawn_population(state, cfg, rng);
        evaluate_population(pop, cfg.tau, cfg.w_max, probes, model, sched, grid, ref_outputs);
        if (!lambda) {
            std::vector<double> losses;
            for (const auto& c : pop) losses.push_back(c.quality_loss);
            lambda = median(std::move(losses));
        }
        std::vector<double> f;
        double sum = 0.0;
        int finite = 0;
        for (auto& c : pop) {
            f.push_back(fitness(c, *lambda));
            if (std::isfinite(c.fitness)) {
                sum += c.fitness;
                ++finite;
            }
        }
        const auto weights = rank_weights(f);
        state = update_center(state, pop, weights, cfg.eta, cfg.w_max);

        GenerationRecord rec;
        rec.g = g;
        rec.best_fitness = state.best_fitness;
        rec.mean_fitness = finite > 0 ? sum / finite : -std::numeric_limits<double>::infinity();
        rec.mse_best = state.best_quality_loss;
        rec.sigma_noise = noise_scale(cfg, g);
        rec.active_steps_best = state.best_w.size() > 0 ? static_cast<int>((state.best_w.array() >= cfg.tau).count()) : 0;
        log.push_back(rec);
    }

    // Decoded center, capped and thresholded like a candidate.
    Candidate center;
    center.w = cap_active(decode_center(state.mu, cfg.w_max), cfg.tau, cfg.max_active);
    std::vector<Candidate> finals{center};
    evaluate_population_serial(finals, cfg.tau, cfg.w_max, probes, model, sched, grid, ref_outputs);
    fitness(finals[0], *lambda);

    const bool use_best = cfg.final_pick == FinalPick::best_of_both && state.best_w.size() > 0 &&
                          state.best_fitness > finals[0].fitness;
    ScheduleSearchResult out{GuidanceSchedule(use_best ? state.best_w : finals[0].w, cfg.tau, cfg.w_max).thresholded(),
                             use_best ? state.best_fitness : finals[0].fitness,
                             use_best ? state.best_quality_loss : finals[0].quality_loss,
                             *lambda,
                             state,
                             std::move(log)};
    return out;
}

nlohmann::json schedule_to_json(const GuidanceSchedule& s, const TimestepGrid& grid) {
    return {{"w", vector_to_json(s.values())}, {"tau", s.tau()}, {"w_max", s.w_max()}, {"grid", grid.steps()}};
}

GuidanceSchedule schedule_from_json(const nlohmann::json& j) {
    return GuidanceSchedule(vector_from_json(j.at("w")), j.at("tau").get<double>(), j.at("w_max").get<double>());
}

}  // namespace ousac
