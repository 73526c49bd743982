#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ousac/cache/bank_io.hpp"
#include "ousac/cli/commands.hpp"

using namespace ousac;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ousac_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json small_blocknet() {
    return nlohmann::json::parse(R"({
      "name": "tiny",
      "model": {"kind": "blocknet", "blocknet": {"width": 4, "blocks": 4}},
      "grid": {"steps": 10, "ref_steps": 40},
      "sample": {"n_samples": 50},
      "evo": {"population": 6, "generations": 3, "n_probes": 4, "max_active": 3},
      "cache": {"calibration_runs": 6},
      "rank_search": {"K": 2, "r_min": 1, "r_max": 4, "budget": 6, "eval_probes": 6}
    })");
}

int run_cli(const std::string& args) {
    const int rc = std::system((std::string(OUSAC_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, DefaultsParse) {
    const auto cfg = parse_config(nlohmann::json::object());
    EXPECT_EQ(cfg.name(), "default");
    EXPECT_EQ(make_evo_config(cfg).steps, 50);
    EXPECT_FALSE(uses_blocknet(cfg));
}

TEST(Config, UnknownKeyIsNamed) {
    try {
        parse_config(nlohmann::json::parse(R"({"evo": {"populaton": 4}})"));
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("evo.populaton"), std::string::npos);
    }
    EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"grid": {"steps": "many"}})")), ConfigError);
    EXPECT_THROW(parse_config(nlohmann::json::object(), {"cache.nope=1"}), ConfigError);
}

TEST(Config, DottedOverrides) {
    const auto cfg = parse_config(nlohmann::json::object(), {"evo.population=12", "name=abc", "evo.lambda=0.5"});
    EXPECT_EQ(make_evo_config(cfg).population, 12);
    EXPECT_EQ(*make_evo_config(cfg).lambda, 0.5);
    EXPECT_EQ(cfg.name(), "abc");
    EXPECT_THROW(parse_config(nlohmann::json::object(), {"evo.population=1"}), ConfigError);
}

TEST(Commands, SampleSingleStepWritesTwoRows) {
    const auto dir = scratch("sample");
    CommandOptions o;
    o.out_dir = dir;
    o.steps = 1;
    const auto res = cmd_sample(parse_config(nlohmann::json::object(), {"sample.n_samples=20"}), o);
    std::ifstream csv(res.dir / "trajectory.csv");
    std::string line;
    int rows = -1;
    while (std::getline(csv, line)) ++rows;
    EXPECT_EQ(rows, 2);
    EXPECT_TRUE(res.report["panels"]["checks"]["pass_identity"].get<bool>());
    EXPECT_TRUE(fs::exists(res.dir / "config_echo.json"));
}

TEST(Commands, OptimizeScheduleIsReproducible) {
    const auto cfg = parse_config(small_blocknet(), {"model.kind=mixture"});
    CommandOptions o;
    o.out_dir = scratch("evo_a");
    cmd_optimize_schedule(cfg, o);
    const std::string a = slurp(*o.out_dir / "tiny" / "schedule.json");
    o.out_dir = scratch("evo_b");
    const auto res = cmd_optimize_schedule(cfg, o);
    EXPECT_EQ(a, slurp(*o.out_dir / "tiny" / "schedule.json"));
    EXPECT_LE(res.report["schedule"]["cfg_steps"].get<int>(), 3);

    o.out_dir = scratch("evo_c");
    cmd_optimize_schedule(parse_config(small_blocknet(), {"model.kind=mixture", "evo.generations=1"}), o);
    EXPECT_EQ(nlohmann::json::parse(slurp(*o.out_dir / "tiny" / "search_log.json")).size(), 1u);
}

TEST(Commands, IdentityBlocksGiveNearIdentityCalibration) {
    BlockNetSpec spec;
    spec.width = 4;
    spec.blocks = 2;
    BlockNetWeights w = BlockNet(spec).weights();
    for (auto& b : w.blocks) b.w2.setZero();
    const BlockNetPredictor model(BlockNet(spec, w));
    const auto sched = build_noise_schedule(ScheduleKind::linear_beta, 1000, {1e-4, 0.02});
    std::vector<CalibrationRun> runs;
    for (auto& p : draw_probes(6, 1, {1}, 3)) runs.push_back({p, GuidanceSchedule::constant(20, 1.5, 0.15, 3.0)});
    const auto bank =
        fit_calibration_bank(collect_calibration_data(model, runs, TimestepGrid::uniform(1000, 20), sched, {}), 1e-8);
    for (const auto& l : bank.layers) EXPECT_LE((l.A - Mat::Identity(4, 4)).norm(), 1e-4);
}

TEST(Commands, PipelineEndToEnd) {
    const auto cfg = parse_config(small_blocknet());
    CommandOptions o;
    o.out_dir = scratch("pipeline");
    cmd_optimize_schedule(cfg, o);
    const auto fit = cmd_fit_calibration(cfg, o);
    const std::string bank = slurp(fit.dir / "bank.json");
    const auto ranks = cmd_optimize_ranks(cfg, o);
    EXPECT_LE(ranks.report["rank_config"]["ranks"][0].get<int>() + ranks.report["rank_config"]["ranks"][1].get<int>(), 6);
    const auto bench = cmd_bench(cfg, o);
    for (const auto& run : bench.report["panels"]["runs"]) EXPECT_TRUE(run["pass_identity"].get<bool>());
    EXPECT_TRUE(bench.report["panels"]["mac_additivity"].get<bool>());

    // Cached sampling from the produced artifacts.
    CommandOptions s = o;
    s.schedule = fit.dir / "schedule.json";
    s.bank = fit.dir / "bank.json";
    s.ranks = fit.dir / "ranks.json";
    EXPECT_GT(cmd_sample(cfg, s).report["ledger"]["cached_blocks"].get<long>(), 0);

    cmd_fit_calibration(cfg, o);
    EXPECT_EQ(bank, slurp(fit.dir / "bank.json"));
}

TEST(Commands, CalibrationNeedsBlockNet) {
    CommandOptions o;
    o.out_dir = scratch("mix");
    EXPECT_THROW(cmd_fit_calibration(parse_config(nlohmann::json::object()), o), ConfigError);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    EXPECT_EQ(run_cli("sample --out " + dir.string() + " --steps 2 sample.n_samples=5"), 0);
    EXPECT_EQ(run_cli("sample --out " + dir.string() + " no.such.key=1"), 2);
    EXPECT_EQ(run_cli("sample --config " + (dir / "missing.json").string()), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);
    // Enormous guidance drives the 1-step sampler to overflow.
    EXPECT_EQ(run_cli("sample --out " + dir.string() +
                      " --steps 2 sample.n_samples=2 guidance.w_const=1e308 guidance.w_max=1e308"),
              3);
}
