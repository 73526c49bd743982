#include <gtest/gtest.h>

#include <random>

#include "ousac/cache/bank_io.hpp"
#include "ousac/cache/cached_pipeline.hpp"
#include "ousac/cache/calibration.hpp"
#include "ousac/cache/rank_search.hpp"
#include "ousac/diffusion/ddim.hpp"

using namespace ousac;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

Mat random_matrix(int r, int c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    Mat m(r, c);
    for (int j = 0; j < c; ++j)
        for (int i = 0; i < r; ++i) m(i, j) = n01(rng);
    return m;
}

CalibrationBank bank_of(const Mat& A) {
    LayerIncrements inc{Mat::Identity(A.cols(), A.cols()), A.transpose()};
    CalibrationBank b;
    b.layers.push_back(fit_calibration(inc, 0.0));
    b.width = static_cast<int>(A.rows());
    return b;
}

struct Testbed {
    NoiseSchedule sched = build_noise_schedule(ScheduleKind::linear_beta, 1000, {1e-4, 0.02});
    BlockNetPredictor model;
    explicit Testbed(int blocks = 3, int width = 4)
        : model(BlockNet([&] {
              BlockNetSpec s;
              s.blocks = blocks;
              s.width = width;
              return s;
          }())) {}
};

std::vector<CalibrationRun> runs_for(const std::vector<Probe>& probes, const GuidanceSchedule& g) {
    std::vector<CalibrationRun> r;
    for (const auto& p : probes) r.push_back({p, g});
    return r;
}

}  // namespace

TEST(RegionPartition, FloorWithRemainderLast) {
    EXPECT_EQ(region_partition(8, 4), (std::vector<int>{0, 0, 1, 1, 2, 2, 3, 3}));
    EXPECT_EQ(region_partition(8, 3), (std::vector<int>{0, 0, 1, 1, 2, 2, 2, 2}));
    EXPECT_EQ(region_partition(5, 1), (std::vector<int>{0, 0, 0, 0, 0}));
    EXPECT_THROW(region_partition(3, 4), ConfigError);
}

TEST(FitCalibration, IdentityBlock) {
    const Mat din = random_matrix(40, 5, 1);
    const auto cal = fit_calibration({din, din}, 1e-8);
    EXPECT_LE((cal.A - Mat::Identity(5, 5)).norm(), 1e-4);
}

TEST(FitCalibration, OneSampleInSpan) {
    Mat din = Mat::Zero(1, 3), dout = Mat::Zero(1, 3);
    din(0, 0) = 1.0;
    dout(0, 0) = 2.0;
    const auto cal = fit_calibration({din, dout}, 1e-10);
    EXPECT_NEAR((cal.A.col(0) - 2.0 * Vec::Unit(3, 0)).norm(), 0.0, 1e-9);
    EXPECT_FALSE(cal.stats.warning.empty());
    try {
        fit_calibration({din, dout}, 0.0);
        FAIL();
    } catch (const std::domain_error& e) {
        EXPECT_NE(std::string(e.what()).find("ridge"), std::string::npos);
    }
}

TEST(FitCalibration, RecoversGroundTruth) {
    const Mat A = random_matrix(4, 4, 2);
    const Mat din = random_matrix(100, 4, 3);
    const Mat dout = din * A.transpose();
    const auto cal = fit_calibration({din, dout}, 0.0);
    EXPECT_LE((cal.A - A).norm(), 1e-8);
    EXPECT_LT(cal.stats.residual_norm, 1e-9);
    EXPECT_TRUE(cal.stats.warning.empty());
}

TEST(Truncate, FullRankAndRankOneExact) {
    const Mat A = random_matrix(5, 5, 4);
    const auto bank = bank_of(A);
    EXPECT_LE((truncate_rank(bank, 0, 5).matrix() - A).norm(), 1e-10);
    const Vec u = random_matrix(5, 1, 5).col(0), v = random_matrix(5, 1, 6).col(0);
    const Mat R1 = u * v.transpose();
    EXPECT_LE((truncate_rank(bank_of(R1), 0, 1).matrix() - R1).norm(), 1e-10);
    const auto clamped = truncate_rank(bank, 0, 9);
    EXPECT_TRUE(clamped.clamped);
    EXPECT_EQ(clamped.rank, 5);
    EXPECT_THROW(truncate_rank(bank, 0, 0), std::invalid_argument);
}

TEST(Truncate, EckartYoungAgainstEigenOracle) {
    const Mat A = random_matrix(6, 6, 7);
    const Eigen::SelfAdjointEigenSolver<Mat> eig(A.transpose() * A);
    const Vec ev = eig.eigenvalues();  // ascending: sigma_6^2 .. sigma_1^2
    const double tail = std::sqrt(ev(0) + ev(1) + ev(2));
    EXPECT_NEAR((truncate_rank(bank_of(A), 0, 3).matrix() - A).norm(), tail, 1e-10);
}

TEST(Truncate, ResidualNonIncreasingInRank) {
    const Mat din = random_matrix(60, 6, 8);
    const Mat dout = din * random_matrix(6, 6, 9).transpose() + 0.1 * random_matrix(60, 6, 10);
    CalibrationBank bank;
    bank.width = 6;
    bank.layers.push_back(fit_calibration({din, dout}, 1e-6));
    double prev = std::numeric_limits<double>::infinity();
    for (int r = 1; r <= 6; ++r) {
        const double res = truncation_residual(bank, 0, r, {din, dout});
        EXPECT_LE(res, prev + 1e-12);
        prev = res;
    }
}

TEST(CollectCalibration, ConstantFeaturesGiveZeroIncrements) {
    BlockNetSpec spec;
    spec.blocks = 2;
    spec.width = 3;
    BlockNetWeights w = BlockNet(spec).weights();
    w.embed_w.setZero();
    const BlockNetPredictor model(BlockNet(spec, w));
    const auto sched = build_noise_schedule(ScheduleKind::linear_beta, 1000, {1e-4, 0.02});
    const auto runs = runs_for(draw_probes(2, 1, {1}, 1), GuidanceSchedule::constant(10, 1.5, 0.15, 3.0));
    const auto data = collect_calibration_data(model, runs, TimestepGrid::uniform(1000, 10), sched, CachePolicy{});
    for (const auto& l : data.layers) {
        EXPECT_GT(l.samples(), 0);
        EXPECT_EQ(l.d_in.norm(), 0.0);
        EXPECT_EQ(l.d_out.norm(), 0.0);
    }
}

TEST(CollectCalibration, PairCounts) {
    Testbed tb;
    const auto grid = TimestepGrid::uniform(1000, 50);
    const auto probes = draw_probes(2, 1, {1}, 1);
    const auto cond_only = runs_for(probes, GuidanceSchedule(Vec::Zero(50), 0.15, 3.0));
    EXPECT_EQ(collect_calibration_data(tb.model, cond_only, grid, tb.sched, CachePolicy{}).layers[0].samples(), 50);
    const auto cfg = runs_for(probes, GuidanceSchedule::constant(50, 1.5, 0.15, 3.0));
    EXPECT_EQ(collect_calibration_data(tb.model, cfg, grid, tb.sched, CachePolicy{}).layers[0].samples(), 100);
}

TEST(CollectCalibration, MatchesTapReplay) {
    Testbed tb(3, 4);
    const auto grid = TimestepGrid::uniform(1000, 12);
    const auto probes = draw_probes(8, 1, {1}, 21);
    Vec w = Vec::Constant(12, 1.5);
    w(5) = 0.0;
    const GuidanceSchedule g(w, 0.15, 3.0);
    const auto data = collect_calibration_data(tb.model, runs_for(probes, g), grid, tb.sched, CachePolicy{});

    // Replay: full-compute sampling with taps, pairing odd steps with the step before.
    std::vector<std::vector<Vec>> din(3), dout(3);
    for (const auto& p : probes) {
        Vec x = p.x_T;
        std::vector<std::array<FeatureTap, 2>> taps;
        std::vector<bool> had_u;
        for (int i = 0; i < grid.size(); ++i) {
            std::array<FeatureTap, 2> tp;
            const BlockNet& net = tb.model.net();
            Vec e = net.forward(x, grid[i], p.c, &tp[0]);
            const bool u = g.active(i);
            if (u) {
                const Vec eu = net.forward(x, grid[i], std::nullopt, &tp[1]);
                e = eu + w(i) * (e - eu);
            }
            taps.push_back(tp);
            had_u.push_back(u);
            x = ddim_step(x, e, grid[i], grid.next(i), tb.sched);
        }
        for (int i = 1; i < grid.size(); i += 2)
            for (int b = 0; b < 2; ++b) {
                if (b == 1 && !(had_u[static_cast<std::size_t>(i)] && had_u[static_cast<std::size_t>(i - 1)])) continue;
                for (std::size_t l = 0; l < 3; ++l) {
                    din[l].push_back(taps[static_cast<std::size_t>(i)][static_cast<std::size_t>(b)].h_in[l] -
                                     taps[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(b)].h_in[l]);
                    dout[l].push_back(taps[static_cast<std::size_t>(i)][static_cast<std::size_t>(b)].h_out[l] -
                                      taps[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(b)].h_out[l]);
                }
            }
    }
    for (std::size_t l = 0; l < 3; ++l) {
        ASSERT_EQ(data.layers[l].samples(), static_cast<int>(din[l].size()));
        Vec sum_in = Vec::Zero(4), sum_out = Vec::Zero(4);
        for (std::size_t k = 0; k < din[l].size(); ++k) {
            sum_in += din[l][k];
            sum_out += dout[l][k];
        }
        EXPECT_LT((data.layers[l].d_in.colwise().sum().transpose() - sum_in).norm(), 1e-12);
        EXPECT_LT((data.layers[l].d_out.colwise().sum().transpose() - sum_out).norm(), 1e-12);
        EXPECT_NEAR(data.layers[l].d_in.squaredNorm(), [&] {
            double s = 0.0;
            for (const auto& d : din[l]) s += d.squaredNorm();
            return s;
        }(), 1e-12 * data.layers[l].d_in.squaredNorm());
    }
}

TEST(CachedForward, ZeroIncrementReturnsCachedOutput) {
    Testbed tb;
    const auto grid = TimestepGrid::uniform(1000, 4);
    const auto data = collect_calibration_data(tb.model, runs_for(draw_probes(4, 1, {1}, 2), GuidanceSchedule::constant(4, 1.5, 0.15, 3.0)),
                                               grid, tb.sched, CachePolicy{});
    const auto bank = fit_calibration_bank(data, 1e-6);
    const auto factors = make_layer_factors(bank, RankConfig::uniform(3, 3, 2, 1, 4, 6));
    CacheState st;
    PassLedger led;
    const Vec full = cached_forward(tb.model, *factors, st, v1(0.4), 0, 700, 1, Branch::conditional, CachePolicy{}, led);
    const Vec reuse = cached_forward(tb.model, *factors, st, v1(0.4), 1, 700, 1, Branch::conditional, CachePolicy{}, led);
    EXPECT_EQ(full, reuse);
    EXPECT_EQ(led.total_full_blocks(), 3);
    EXPECT_EQ(led.total_cached_blocks(), 3);
    EXPECT_EQ(led.mac_estimate, 3 * 2.0 * 16 + 3 * 2.0 * 8);
}

TEST(CachedForward, GuidanceRuleFallbackAndTrace) {
    Testbed tb;
    const auto grid = TimestepGrid::uniform(1000, 6);
    Vec w(6);
    w << 1.5, 1.5, 0.0, 1.5, 1.5, 1.5;
    const GuidanceSchedule g(w, 0.15, 3.0);
    const auto bank = fit_calibration_bank(
        collect_calibration_data(tb.model, runs_for(draw_probes(4, 1, {1}, 2), g), grid, tb.sched, CachePolicy{}), 1e-6);
    CachedStepModel m(tb.model, make_layer_factors(bank, RankConfig::uniform(3, 1, 4, 1, 4, 4)), CachePolicy{});
    const auto traj = sample({v1(0.3), 1}, grid, g, m, tb.sched);
    EXPECT_EQ(traj.ledger.cache_fallbacks, 1);  // step 3 needs the unconditional branch skipped at step 2
    EXPECT_EQ(traj.ledger.total_passes(), 11);
    for (const auto& r : traj.ledger.cache_reads) {
        if (r.branch != Branch::unconditional) continue;
        EXPECT_EQ(r.last_exec_step, r.step - 1);
        EXPECT_NE(r.step, 3);
    }

    CachePolicy off;
    off.guidance_rule = false;
    CachedStepModel stale(tb.model, make_layer_factors(bank, RankConfig::uniform(3, 1, 4, 1, 4, 4)), off);
    EXPECT_EQ(sample({v1(0.3), 1}, grid, g, stale, tb.sched).ledger.cache_fallbacks, 0);
}

TEST(CachedForward, RefreshEveryStepIsBitIdentical) {
    Testbed tb(4, 6);
    const auto grid = TimestepGrid::uniform(1000, 20);
    const auto g = GuidanceSchedule::constant(20, 1.5, 0.15, 3.0);
    CachePolicy every;
    every.refresh_period = 1;
    const auto bank = fit_calibration_bank(
        collect_calibration_data(tb.model, runs_for(draw_probes(4, 1, {1}, 2), g), grid, tb.sched, CachePolicy{}), 1e-6);
    CachedStepModel m(tb.model, make_layer_factors(bank, RankConfig::uniform(4, 2, 3, 1, 6, 6)), every);
    const auto a = sample({v1(0.3), 1}, grid, g, m, tb.sched);
    const auto b = sample({v1(0.3), 1}, grid, g, tb.model, tb.sched);
    for (std::size_t i = 0; i < a.states.size(); ++i) EXPECT_EQ(a.states[i], b.states[i]);
    EXPECT_EQ(a.ledger.total_passes(), b.ledger.total_passes());
    EXPECT_EQ(a.ledger.mac_estimate, b.ledger.mac_estimate);
}

TEST(QualityObjective, RefreshOneIsZeroAndFullRankBeatsLowRank) {
    Testbed tb(4, 6);
    const auto grid = TimestepGrid::uniform(1000, 20);
    const auto g = GuidanceSchedule::constant(20, 1.5, 0.15, 3.0);
    const auto probes = draw_probes(8, 1, {1}, 4);
    const auto bank = fit_calibration_bank(
        collect_calibration_data(tb.model, runs_for(probes, g), grid, tb.sched, CachePolicy{}), 1e-6);
    CachePolicy every;
    every.refresh_period = 1;
    const auto p1 = make_rank_problem(tb.model, bank, g, grid, tb.sched, every, probes);
    EXPECT_EQ(quality_objective(RankConfig::uniform(4, 2, 1, 1, 6, 12), p1), 0.0);
    const auto p2 = make_rank_problem(tb.model, bank, g, grid, tb.sched, CachePolicy{}, probes);
    EXPECT_LT(quality_objective(RankConfig::uniform(4, 2, 6, 1, 6, 12), p2),
              quality_objective(RankConfig::uniform(4, 2, 1, 1, 6, 12), p2));
}

TEST(OptimizeRanks, ConstantObjectiveStopsAfterOneSweep) {
    RankSearchOptions o;
    o.blocks = 8;
    o.K = 4;
    o.r_min = 2;
    o.r_max = 8;
    o.budget = 24;
    const auto res = optimize_ranks([](const RankConfig&) { return 1.0; }, o);
    EXPECT_EQ(res.sweeps, 1);
    EXPECT_TRUE(res.moves.empty());
    EXPECT_EQ(res.config.ranks, (std::vector<int>{6, 6, 6, 6}));
}

TEST(OptimizeRanks, SingleRegionScalarSearch) {
    RankSearchOptions o;
    o.blocks = 4;
    o.K = 1;
    o.r_min = 1;
    o.r_max = 16;
    o.budget = 16;
    int calls = 0;
    const auto res = optimize_ranks(
        [&](const RankConfig& c) {
            ++calls;
            return std::pow(c.ranks[0] - 5.0, 2);
        },
        o);
    EXPECT_EQ(res.config.ranks[0], 5);
    EXPECT_LT(calls, 16);
}

TEST(OptimizeRanks, SeparableObjectiveUnderBudget) {
    RankSearchOptions o;
    o.blocks = 8;
    o.K = 4;
    o.r_min = 1;
    o.r_max = 8;
    o.budget = 14;
    const std::vector<int> target{1, 7, 2, 4};
    const auto res = optimize_ranks(
        [&](const RankConfig& c) {
            double s = 0.0;
            for (std::size_t k = 0; k < 4; ++k) s += std::pow(c.ranks[k] - target[k], 2);
            return s;
        },
        o);
    EXPECT_EQ(res.config.ranks, target);
    EXPECT_LE(res.config.total(), 14);
    double prev = res.initial_objective;
    for (const auto& m : res.moves) {
        EXPECT_LE(m.objective, prev);
        prev = m.objective;
    }
}

TEST(OptimizeRanks, InfeasibleBudgetIsConfigError) {
    RankSearchOptions o;
    o.K = 4;
    o.r_min = 3;
    o.budget = 8;
    EXPECT_THROW(optimize_ranks([](const RankConfig&) { return 0.0; }, o), ConfigError);
}

TEST(BankIo, Base64KnownVectors) {
    EXPECT_EQ(base64_encode(""), "");
    EXPECT_EQ(base64_encode("M"), "TQ==");
    EXPECT_EQ(base64_encode("Ma"), "TWE=");
    EXPECT_EQ(base64_encode("Man"), "TWFu");
    for (const std::string s : {"", "M", "Ma", "Man", "hello world!"}) EXPECT_EQ(base64_decode(base64_encode(s)), s);
    EXPECT_THROW(base64_decode("abc"), std::invalid_argument);
}

TEST(BankIo, BankRoundTripIsBitExact) {
    Testbed tb;
    const auto grid = TimestepGrid::uniform(1000, 10);
    const auto bank = fit_calibration_bank(
        collect_calibration_data(tb.model, runs_for(draw_probes(3, 1, {1}, 2), GuidanceSchedule::constant(10, 1.5, 0.15, 3.0)),
                                 grid, tb.sched, CachePolicy{}),
        1e-6);
    const auto j = bank_to_json(bank);
    const auto back = bank_from_json(nlohmann::json::parse(j.dump()));
    ASSERT_EQ(back.size(), bank.size());
    for (int l = 0; l < bank.size(); ++l) {
        EXPECT_EQ(back.layers[static_cast<std::size_t>(l)].A, bank.layers[static_cast<std::size_t>(l)].A);
        EXPECT_EQ(back.layers[static_cast<std::size_t>(l)].S, bank.layers[static_cast<std::size_t>(l)].S);
    }
    EXPECT_EQ(bank_to_json(back).dump(), j.dump());
}

TEST(BankIo, RankConfigRoundTripAndValidation) {
    const auto cfg = RankConfig::uniform(8, 3, 4, 2, 8, 12);
    const auto back = rank_config_from_json(rank_config_to_json(cfg));
    EXPECT_EQ(back.ranks, cfg.ranks);
    EXPECT_EQ(back.region_map, cfg.region_map);
    auto j = rank_config_to_json(cfg);
    j["budget"] = 11;
    EXPECT_THROW(rank_config_from_json(j), ConfigError);
}
