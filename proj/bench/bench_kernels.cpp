// Serial reference vs OpenMP kernels on the 1D mixture testbed.
#include <benchmark/benchmark.h>

#include <random>

#include "ousac/diffusion/sampler.hpp"
#include "ousac/evo/evo_sched.hpp"
#include "ousac/metrics/distances.hpp"
#include "ousac/models/gaussian_mixture.hpp"

using namespace ousac;

namespace {

struct Fixture {
    NoiseSchedule sched = build_noise_schedule(ScheduleKind::linear_beta, 1000, {1e-4, 0.02});
    MixturePredictor model{
        GaussianMixture({{0.5, Vec::Constant(1, -0.4), 0.64, 0}, {0.5, Vec::Constant(1, 0.4), 0.64, 1}}), sched};
    TimestepGrid grid = TimestepGrid::uniform(1000, 50);
    GuidanceSchedule gsched = GuidanceSchedule::constant(50, 1.5, 0.15, 3.0);
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

void BM_sample_batch_serial(benchmark::State& state) {
    const auto& f = fixture();
    const auto probes = draw_probes(static_cast<int>(state.range(0)), 1, {1}, 1);
    for (auto _ : state)
        benchmark::DoNotOptimize(sample_final_batch_serial(probes, f.grid, f.gsched, f.model, f.sched, {}));
}

void BM_sample_batch_omp(benchmark::State& state) {
    const auto& f = fixture();
    const auto probes = draw_probes(static_cast<int>(state.range(0)), 1, {1}, 1);
    for (auto _ : state) benchmark::DoNotOptimize(sample_final_batch(probes, f.grid, f.gsched, f.model, f.sched, {}));
}

std::vector<Candidate> population(int n) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    std::vector<Candidate> c(static_cast<std::size_t>(n));
    for (auto& cand : c) {
        cand.w.resize(50);
        for (Eigen::Index i = 0; i < 50; ++i) cand.w(i) = u(rng);
    }
    return c;
}

template <bool Parallel>
void BM_evaluate_population(benchmark::State& state) {
    const auto& f = fixture();
    const auto probes = draw_probes(16, 1, {0, 1}, 2);
    const auto ref = sample_final_batch(probes, f.grid, f.gsched, f.model, f.sched, {}).finals;
    const auto pop = population(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto c = pop;
        if constexpr (Parallel)
            evaluate_population(c, 0.15, 3.0, probes, f.model, f.sched, f.grid, ref);
        else
            evaluate_population_serial(c, 0.15, 3.0, probes, f.model, f.sched, f.grid, ref);
        benchmark::DoNotOptimize(c);
    }
}

std::vector<Vec> normal_samples(int n, double shift, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(shift, 1.0);
    std::vector<Vec> out(static_cast<std::size_t>(n));
    for (auto& v : out) v = Vec::Constant(1, nd(rng));
    return out;
}

template <bool Parallel>
void BM_energy_distance(benchmark::State& state) {
    const auto a = normal_samples(static_cast<int>(state.range(0)), 0.0, 4);
    const auto b = normal_samples(static_cast<int>(state.range(0)), 0.3, 5);
    for (auto _ : state) {
        if constexpr (Parallel)
            benchmark::DoNotOptimize(energy_distance(a, b));
        else
            benchmark::DoNotOptimize(energy_distance_serial(a, b));
    }
}

}  // namespace

BENCHMARK(BM_sample_batch_serial)->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_sample_batch_omp)->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_evaluate_population<false>)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_evaluate_population<true>)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_energy_distance<false>)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_energy_distance<true>)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
