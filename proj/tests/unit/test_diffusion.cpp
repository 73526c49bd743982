#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ousac/diffusion/ddim.hpp"
#include "ousac/diffusion/guidance.hpp"
#include "ousac/diffusion/noise_schedule.hpp"
#include "ousac/diffusion/sampler.hpp"
#include "ousac/models/gaussian_mixture.hpp"

using namespace ousac;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

// Counts calls; returns a fixed affine function of x so outputs are checkable.
class LinearPredictor final : public NoisePredictor {
public:
    int dim() const override { return 1; }
    Vec predict(const Vec& x, int, Condition c) const override { return c ? Vec(0.3 * x) : Vec(-0.2 * x); }
};

NoiseSchedule default_sched() { return build_noise_schedule(ScheduleKind::linear_beta, 1000, {1e-4, 0.02}); }

}  // namespace

TEST(NoiseSchedule, LinearBetaProduct) {
    const auto s = build_noise_schedule(ScheduleKind::linear_beta, 2, {0.1, 0.1});
    EXPECT_NEAR(s.alpha_bar(1), 0.9, 1e-15);
    EXPECT_NEAR(s.alpha_bar(2), 0.81, 1e-15);
    EXPECT_EQ(s.alpha_bar(0), 1.0);
}

TEST(NoiseSchedule, StrictlyDecreasingAndPositive) {
    for (auto kind : {ScheduleKind::linear_beta, ScheduleKind::cosine}) {
        const auto s = kind == ScheduleKind::cosine ? build_noise_schedule(kind, 1000, {0.008, 0.999}) : default_sched();
        for (int t = 1; t <= 1000; ++t) EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
        EXPECT_GT(s.alpha_bar(1000), 0.0);
    }
}

TEST(NoiseSchedule, CosineMatchesDirectFormula) {
    // Recomputed independently: f(t) = cos^2(((t/10)+0.008)/1.008 * pi/2), beta clipped at 0.999.
    const double expected[] = {0.972092737113969,   0.8987059205995089,  0.7869105111508292,  0.647478211146504,
                               0.4938435904406378,  0.34080963975932416, 0.2031214741183376,  0.0940456126766538,
                               0.02409172414008586, 2.4091724140085884e-05};
    const auto s = build_noise_schedule(ScheduleKind::cosine, 10, {0.008, 0.999});
    for (int t = 1; t <= 10; ++t) EXPECT_NEAR(s.alpha_bar(t), expected[t - 1], 1e-13) << t;
}

TEST(NoiseSchedule, RejectsBadInput) {
    EXPECT_THROW(NoiseSchedule(ScheduleKind::linear_beta, {0.5, 0.6}), ConfigError);
    EXPECT_THROW(NoiseSchedule(ScheduleKind::linear_beta, {1.2}), ConfigError);
    EXPECT_THROW(build_noise_schedule(ScheduleKind::linear_beta, 1, {0.1, 0.1}), ConfigError);
    EXPECT_THROW(parse_schedule_kind("quadratic"), ConfigError);
    EXPECT_THROW(default_sched().alpha_bar(1001), std::out_of_range);
}

TEST(TimestepGrid, UniformStride) {
    const auto g = TimestepGrid::uniform(1000, 50);
    EXPECT_EQ(g.size(), 50);
    EXPECT_EQ(g[0], 1000);
    EXPECT_EQ(g[49], 20);
    EXPECT_EQ(g.next(49), 0);
    EXPECT_THROW(TimestepGrid(std::vector<int>{3, 3}), ConfigError);
}

TEST(DdimStep, RejectsNonDecreasingStep) {
    const auto s = default_sched();
    const Vec x = Vec::Constant(3, 0.7);
    const Vec e = Vec::Constant(3, -1.3);
    EXPECT_THROW(ddim_step(x, e, 500, 500, s), std::invalid_argument);
    EXPECT_THROW(ddim_step(x, e, 400, 500, s), std::invalid_argument);
}

TEST(DdimStep, NoiselessPointRecovery) {
    const NoiseSchedule s(ScheduleKind::linear_beta, {0.81});
    EXPECT_NEAR(ddim_step(v1(0.9), v1(0.0), 1, 0, s)(0), 1.0, 1e-15);
}

TEST(DdimStep, HandArithmetic) {
    const NoiseSchedule s(ScheduleKind::linear_beta, {0.8, 0.5});
    EXPECT_NEAR(ddim_step(v1(1.0), v1(0.2), 2, 1, s)(0), 1.17546834496736, 1e-13);
}

TEST(DdimStep, StochasticNeedsNoise) {
    const NoiseSchedule s(ScheduleKind::linear_beta, {0.8, 0.5});
    EXPECT_THROW(ddim_step(v1(1.0), v1(0.2), 2, 1, s, 0.1), std::invalid_argument);
    EXPECT_THROW(ddim_step(v1(1.0), v1(0.2), 2, 1, s, 0.9, v1(0.0)), std::invalid_argument);
}

TEST(Cfg, EndpointsAndExtrapolation) {
    EXPECT_EQ(apply_cfg(v1(0.4), v1(1.0), 0.0)(0), 0.4);
    EXPECT_EQ(apply_cfg(v1(0.4), v1(1.0), 1.0)(0), 1.0);
    EXPECT_NEAR(apply_cfg(v1(0.0), v1(1.0), 1.5)(0), 1.5, 1e-15);
}

TEST(Cfg, LinearInScale) {
    const Vec u = Vec::Constant(2, 0.3), c = Vec::Constant(2, -0.8);
    const Vec a = apply_cfg(u, c, 0.5), b = apply_cfg(u, c, 1.5), m = apply_cfg(u, c, 1.0);
    EXPECT_TRUE(((a + b) / 2).isApprox(m, 1e-15));
}

TEST(GuidedPrediction, ThresholdBoundaryAndCounts) {
    const LinearPredictor model;
    PassLedger led;
    guided_prediction(v1(1.0), 10, 1, 0.01, 0.05, model, led);
    EXPECT_EQ(led.cond_passes, 1);
    EXPECT_EQ(led.uncond_passes, 0);
    guided_prediction(v1(1.0), 10, 1, 0.05, 0.05, model, led);
    EXPECT_EQ(led.uncond_passes, 1);
}

TEST(Sampler, FiftyStepsEightActiveIsFiftyEightPasses) {
    const auto s = default_sched();
    const auto grid = TimestepGrid::uniform(1000, 50);
    Vec w = Vec::Zero(50);
    for (int i : {0, 3, 7, 11, 20, 30, 41, 49}) w(i) = 2.0;
    const GuidanceSchedule g(w, 0.15, 3.0);
    const LinearPredictor model;
    const auto traj = sample({v1(0.5), 1}, grid, g, model, s);
    EXPECT_EQ(traj.ledger.total_passes(), 58);
    EXPECT_EQ(traj.states.size(), 51u);
}

TEST(Sampler, PointMassSingleStepRecoversData) {
    const auto s = default_sched();
    const GaussianMixture gm({{1.0, v1(1.7), 0.0, 0}});
    const MixturePredictor model(gm, s);
    const auto grid = TimestepGrid::uniform(1000, 1);
    const auto traj = sample({v1(-0.4), 0}, grid, GuidanceSchedule::constant(1, 1.0, 0.15, 3.0), model, s);
    EXPECT_NEAR(traj.final_state()(0), 1.7, 1e-9);
}

TEST(Sampler, ConstantScheduleMatchesClassicCfgLoop) {
    const auto s = default_sched();
    const auto grid = TimestepGrid::uniform(1000, 20);
    const LinearPredictor model;
    const Probe p{v1(0.8), 1};
    const auto traj = sample(p, grid, GuidanceSchedule::constant(20, 1.5, 0.15, 3.0), model, s);
    Vec x = p.x_T;
    for (int i = 0; i < grid.size(); ++i) {
        const Vec eu = model.predict(x, grid[i], std::nullopt), ec = model.predict(x, grid[i], 1);
        const Vec e = eu + 1.5 * (ec - eu);
        const double ab = s.alpha_bar(grid[i]), abp = s.alpha_bar(grid.next(i));
        const Vec x0 = (x - std::sqrt(1 - ab) * e) / std::sqrt(ab);
        x = std::sqrt(abp) * x0 + std::sqrt(1 - abp) * e;
    }
    EXPECT_NEAR(traj.final_state()(0), x(0), 1e-12);
}

TEST(Sampler, DeterministicPerSeed) {
    const auto s = default_sched();
    const auto grid = TimestepGrid::uniform(1000, 25);
    const LinearPredictor model;
    SamplerOptions o;
    o.eta = 1.0;
    o.seed = 42;
    const auto a = sample({v1(0.1), 1}, grid, GuidanceSchedule::constant(25, 1.5, 0.15, 3.0), model, s, o);
    const auto b = sample({v1(0.1), 1}, grid, GuidanceSchedule::constant(25, 1.5, 0.15, 3.0), model, s, o);
    ASSERT_EQ(a.states.size(), b.states.size());
    for (std::size_t i = 0; i < a.states.size(); ++i) EXPECT_EQ(a.states[i](0), b.states[i](0));
}

TEST(Sampler, DivergenceRaisesWithTimestep) {
    class Exploding final : public NoisePredictor {
    public:
        int dim() const override { return 1; }
        Vec predict(const Vec&, int, Condition) const override { return v1(std::nan("")); }
    } model;
    const auto s = default_sched();
    try {
        sample({v1(0.1), 1}, TimestepGrid::uniform(1000, 5), GuidanceSchedule::constant(5, 1.5, 0.15, 3.0), model, s);
        FAIL();
    } catch (const NumericalDivergence& e) {
        EXPECT_EQ(e.timestep(), 1000);
    }
}

TEST(Deviation, TrivialZeros) {
    const auto s = default_sched();
    EXPECT_EQ(deviation_scale(v1(1.0), v1(0.2), 1.5, 1.5, 500, 480, s).norm(), 0.0);
    EXPECT_EQ(deviation_scale(v1(0.2), v1(0.2), 1.5, 2.0, 500, 480, s).norm(), 0.0);
    EXPECT_EQ(deviation_switch(v1(1.0), v1(0.2), 1.0, 500, 480, s).norm(), 0.0);
    EXPECT_EQ(deviation_switch(v1(0.2), v1(0.2), 1.5, 500, 480, s).norm(), 0.0);
}

TEST(Deviation, MatchesTwoStepDifference) {
    const NoiseSchedule s(ScheduleKind::linear_beta, {0.8, 0.5});
    const Vec x = v1(0.37), ec = v1(1.0), eu = v1(0.0);
    const Vec a = ddim_step(x, apply_cfg(eu, ec, 1.5), 2, 1, s);
    const Vec b = ddim_step(x, apply_cfg(eu, ec, 2.0), 2, 1, s);
    EXPECT_NEAR((b - a)(0), deviation_scale(ec, eu, 1.5, 2.0, 2, 1, s)(0), 1e-12);
    const Vec sw = ddim_step(x, ec, 2, 1, s);
    EXPECT_NEAR((sw - a)(0), deviation_switch(ec, eu, 1.5, 2, 1, s)(0), 1e-12);
}

TEST(Deviation, SwitchHasOppositeSignAboveOne) {
    const auto s = default_sched();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(1.01, 3.0);
    for (int k = 0; k < 50; ++k) {
        const double w = u(rng);
        const double a = deviation_scale(v1(0.7), v1(0.1), w, w + 0.5, 600, 580, s)(0);
        const double b = deviation_switch(v1(0.7), v1(0.1), w, 600, 580, s)(0);
        EXPECT_LT(a * b, 0.0);
    }
}

TEST(Deviation, ApproximateCoefficient) {
    const NoiseSchedule s(ScheduleKind::linear_beta, {0.8, 0.5});
    EXPECT_NEAR(deviation_scale(v1(1.0), v1(0.0), 1.0, 2.0, 2, 1, s, false)(0), std::sqrt(0.8 / 0.5), 1e-15);
}
