#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "ousac/common.hpp"
#include "ousac/diffusion/guidance.hpp"
#include "ousac/diffusion/noise_schedule.hpp"
#include "ousac/diffusion/sampler.hpp"

namespace ousac {

enum class FinalPick { center, best_of_both };

struct EvoConfig {
    int population = 16;
    int generations = 10;
    double sigma0 = 1.0;
    double eta = 1.0;
    std::optional<double> lambda;  // unset: median quality loss of generation 0
    double tau = 0.15;
    double w_max = 3.0;
    int steps = 50;       // T
    int ref_steps = 1000;  // T_ref
    double w_const = 1.5;
    int n_probes = 16;
    std::optional<double> init_w;  // initial decoded center; unset: w_const
    int max_active = 0;            // > 0 caps active steps per candidate
    FinalPick final_pick = FinalPick::best_of_both;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Candidate {
    Vec w;      // clamped to [0, w_max]
    Vec delta;  // perturbation drawn for this candidate
    double fitness = 0.0;
    double quality_loss = 0.0;
    double sparsity = 0.0;
};

struct EvoState {
    Vec mu;  // population center in logit space
    int generation = 0;
    Vec best_w;
    double best_fitness = -std::numeric_limits<double>::infinity();
    double best_quality_loss = std::numeric_limits<double>::infinity();
};

/// Logit-space clamp used before inverting the sigmoid.
inline constexpr double kLogitEps = 1e-6;

/// w_max * sigmoid(mu).
Vec decode_center(const Vec& mu, double w_max);
/// Inverse of decode_center with w / w_max clamped into [kLogitEps, 1 - kLogitEps].
Vec encode_schedule(const Vec& w, double w_max);

EvoState init_state(const EvoConfig& cfg);

/// sigma0 * (1 - g / G).
double noise_scale(const EvoConfig& cfg, int generation);

/// P candidates w_i = clamp(decode(mu) + delta_i, 0, w_max), delta_i ~ N(0, sigma_noise^2 I);
/// with max_active set, only the largest max_active active entries are kept.
std::vector<Candidate> spawn_population(const EvoState& state, const EvoConfig& cfg, std::mt19937_64& rng);

/// Keeps at most max_active entries >= tau (largest first, ties by lower index); zeroes the rest.
Vec cap_active(Vec w, double tau, int max_active);

/// Mean squared distance between G_T(x_T, c; w) and the reference outputs.
/// Throws NumericalDivergence when any probe diverges.
double quality_loss(const GuidanceSchedule& w, std::span<const Probe> probes, const NoisePredictor& model,
                    const NoiseSchedule& sched, const TimestepGrid& grid, std::span<const Vec> ref_outputs);

/// (T - ||w||_0) / T with ||w||_0 counting entries >= tau.
double sparsity(const Vec& w, double tau);

/// f = -L_quality + lambda * S; stores the result on the candidate.
double fitness(Candidate& candidate, double lambda);

/// a_i = d_i / (P - 1) - 0.5, d_i the rank (0 = lowest fitness); ties give the lower index the lower rank.
std::vector<double> rank_weights(std::span<const double> fitnesses);

/// mu += (eta / P) * sum_i a_i * (logit(w_i / w_max) - mu); bumps the generation and best-so-far.
EvoState update_center(const EvoState& state, std::span<const Candidate> candidates, std::span<const double> weights,
                       double eta, double w_max);

/// Constant-w_const sampling over the T_ref grid, one output per probe.
std::vector<Vec> reference_outputs(std::span<const Probe> probes, const NoisePredictor& model,
                                   const NoiseSchedule& sched, const TimestepGrid& ref_grid, double w_const,
                                   double tau, double w_max);

/// Quality loss and sparsity for every candidate; divergent candidates get
/// infinite loss. OpenMP-parallel over candidates.
void evaluate_population(std::vector<Candidate>& candidates, double tau, double w_max, std::span<const Probe> probes,
                         const NoisePredictor& model, const NoiseSchedule& sched, const TimestepGrid& grid,
                         std::span<const Vec> ref_outputs);
/// Serial reference for evaluate_population.
void evaluate_population_serial(std::vector<Candidate>& candidates, double tau, double w_max,
                                std::span<const Probe> probes,
                                const NoisePredictor& model, const NoiseSchedule& sched, const TimestepGrid& grid,
                                std::span<const Vec> ref_outputs);

struct GenerationRecord {
    int g = 0;
    double best_fitness = 0.0;  // best so far
    double mean_fitness = 0.0;  // this generation, finite values only
    double mse_best = 0.0;      // quality loss of the best-so-far schedule
    double sigma_noise = 0.0;
    int active_steps_best = 0;
};

nlohmann::json to_json(const GenerationRecord& r);

struct ScheduleSearchResult {
    GuidanceSchedule schedule;
    double fitness = 0.0;
    double quality_loss = 0.0;
    double lambda = 0.0;
    EvoState state;
    std::vector<GenerationRecord> log;
};

/// Full Stage-1 search. The returned schedule has its sub-threshold entries zeroed.
ScheduleSearchResult optimize_schedule(const EvoConfig& cfg, const NoisePredictor& model, const NoiseSchedule& sched,
                                       const TimestepGrid& grid, std::span<const Probe> probes,
                                       std::span<const Vec> ref_outputs);

/// {w: [...], tau, w_max, grid: [...]}
nlohmann::json schedule_to_json(const GuidanceSchedule& s, const TimestepGrid& grid);
GuidanceSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace ousac
