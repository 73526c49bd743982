#include "ousac/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <random>

#include "ousac/cache/bank_io.hpp"
#include "ousac/metrics/distances.hpp"
#include "ousac/metrics/report.hpp"
#include "ousac/models/model_io.hpp"

namespace ousac {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Fixed offsets keep the probe sets of different stages independent.
constexpr std::uint64_t kSampleStream = 0;
constexpr std::uint64_t kSearchStream = 1000003;
constexpr std::uint64_t kCalibStream = 2000003;
constexpr std::uint64_t kEvalStream = 3000017;
constexpr std::uint64_t kRandomStream = 4000037;

void write_json(const fs::path& p, const json& j) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << j.dump(2) << '\n';
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open " + p.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError(p.string() + " is not valid JSON");
    return j;
}

std::vector<int> probe_classes(const ExperimentConfig& cfg) {
    const Condition c = model_condition(cfg);
    return c ? std::vector<int>{*c} : std::vector<int>{};
}

int sample_count(const ExperimentConfig& cfg) {
    const int n = cfg.section("sample").at("n_samples").get<int>();
    if (n < 1) throw ConfigError("config key 'sample.n_samples' must be >= 1");
    return n;
}

SamplerOptions sampler_options(const ExperimentConfig& cfg) {
    SamplerOptions o;
    o.eta = cfg.section("sample").at("eta").get<double>();
    o.seed = cfg.seed();
    o.record_states = false;
    return o;
}

struct LoadedSchedule {
    GuidanceSchedule schedule;
    TimestepGrid grid;
};

LoadedSchedule load_schedule(const fs::path& p) {
    const json j = read_json(p);
    try {
        return {schedule_from_json(j), TimestepGrid(j.at("grid").get<std::vector<int>>())};
    } catch (const json::exception& e) {
        throw ConfigError("schedule file " + p.string() + " is malformed: " + e.what());
    }
}

LoadedSchedule constant_schedule(const ExperimentConfig& cfg, int steps) {
    const json& g = cfg.section("guidance");
    const int t_max = cfg.section("noise").at("t_max").get<int>();
    return {GuidanceSchedule::constant(steps, g.at("w_const").get<double>(), g.at("tau").get<double>(),
                                       g.at("w_max").get<double>()),
            TimestepGrid::uniform(t_max, steps)};
}

// Explicit path, else the experiment's own artifact, else nothing.
std::optional<fs::path> artifact(const std::optional<fs::path>& given, const fs::path& dir, const char* name) {
    if (given) return given;
    if (fs::exists(dir / name)) return dir / name;
    return std::nullopt;
}

LoadedSchedule stage_schedule(const ExperimentConfig& cfg, const CommandOptions& opts, const fs::path& dir) {
    if (auto p = artifact(opts.schedule, dir, "schedule.json")) return load_schedule(*p);
    return constant_schedule(cfg, cfg.section("grid").at("steps").get<int>());
}

std::optional<GridDensity> guided_target(const ExperimentConfig& cfg) {
    const GaussianMixture gm = make_mixture(cfg);
    const Condition c = model_condition(cfg);
    if (gm.dim() != 1 || !c) return std::nullopt;
    return mixture_guided_target(gm.conditional(*c), gm, cfg.section("guidance").at("w_const").get<double>());
}

json ledger_check(const PassLedger& ledger, const GuidanceSchedule& s, int runs) {
    const PassCount pc = count_passes(s);
    return {{"expected_passes_per_run", pc.total_forward_passes},
            {"cfg_steps", pc.cfg_steps},
            {"pass_identity", ledger.total_passes() == static_cast<std::int64_t>(pc.total_forward_passes) * runs}};
}

void finish(const CommandResult& res, const std::string& command) {
    write_json(res.dir / "report.json", res.report);
    write_json(res.dir / ("report_" + command + ".json"), res.report);
}

std::vector<int> random_positions(int steps, int count, std::mt19937_64& rng) {
    std::vector<int> idx(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> pick(i, steps - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(count));
    return idx;
}

PanelResult run_panel(const std::string& label, std::span<const Probe> probes, const LoadedSchedule& s,
                      const NoisePredictor& model, const NoiseSchedule& sched, const GridDensity& target,
                      const SamplerOptions& opts) {
    const BatchResult res = sample_final_batch(probes, s.grid, s.schedule, model, sched, opts);
    PanelResult p;
    p.label = label;
    p.samples = first_components(res.finals);
    p.w1 = wasserstein_1d_to_density(p.samples, target);
    p.forward_passes = res.ledger.total_passes() / static_cast<std::int64_t>(probes.size());
    p.steps = s.grid.size();
    p.cfg_steps = s.schedule.active_count();
    return p;
}

json panel_json(const PanelResult& p) {
    return {{"label", p.label}, {"w1", p.w1}, {"forward_passes", p.forward_passes}, {"steps", p.steps},
            {"cfg_steps", p.cfg_steps}};
}

}  // namespace

fs::path experiment_dir(const ExperimentConfig& cfg, const CommandOptions& opts) {
    const fs::path root = opts.out_dir ? *opts.out_dir : fs::path(cfg.doc.at("out_dir").get<std::string>());
    const fs::path dir = root / cfg.name();
    fs::create_directories(dir);
    write_json(dir / "config_echo.json", cfg.doc);
    return dir;
}

CommandResult cmd_sample(const ExperimentConfig& cfg, const CommandOptions& opts) {
    const fs::path dir = experiment_dir(cfg, opts);
    const NoiseSchedule sched = make_noise_schedule(cfg);
    const auto model = make_predictor(cfg);

    LoadedSchedule s = opts.schedule ? load_schedule(*opts.schedule)
                                     : constant_schedule(cfg, opts.steps.value_or(cfg.section("grid").at("ref_steps").get<int>()));
    if (opts.schedule && opts.steps && *opts.steps != s.grid.size())
        throw ConfigError("--steps conflicts with the loaded schedule length");

    const auto probes = draw_probes(sample_count(cfg), model->dim(), probe_classes(cfg), cfg.seed() + kSampleStream);
    const SamplerOptions sopts = sampler_options(cfg);

    std::unique_ptr<BlockNetPredictor> net;
    StepModelFactory factory;
    std::optional<RankConfig> ranks;
    if (opts.bank || opts.ranks) {
        if (!opts.bank || !opts.ranks) throw ConfigError("cached sampling needs both --bank and --ranks");
        net = make_blocknet_predictor(cfg);
        const CalibrationBank bank = bank_from_json(read_json(*opts.bank));
        ranks = rank_config_from_json(read_json(*opts.ranks));
        factory = cached_model_factory(*net, bank, *ranks, make_cache_policy(cfg));
    } else {
        factory = [&model] { return std::make_unique<PlainStepModel>(*model); };
    }

    {
        SamplerOptions topts = sopts;
        topts.record_states = true;
        auto step_model = factory();
        const Trajectory traj = sample(probes.front(), s.grid, s.schedule, *step_model, sched, topts);
        std::ofstream csv(dir / "trajectory.csv");
        write_trajectory_csv(csv, traj);
    }

    const BatchResult res = sample_final_batch(probes, s.grid, s.schedule, factory, sched, sopts);
    DistReport dist;
    dist.sample_count = static_cast<std::int64_t>(res.finals.size());
    const json& sc = cfg.section("sample");
    std::map<std::string, std::string> artifacts{{"trajectory", "trajectory.csv"}};
    if (model->dim() == 1) {
        const auto xs = first_components(res.finals);
        if (const auto target = guided_target(cfg)) dist.wasserstein1 = wasserstein_1d_to_density(xs, *target);
        std::ofstream h(dir / "histogram.csv");
        write_histogram_csv(h, histogram(xs, sc.at("hist_lo").get<double>(), sc.at("hist_hi").get<double>(),
                                         sc.at("hist_bins").get<int>()));
        artifacts["histogram"] = "histogram.csv";
    }

    ReportInputs in;
    in.experiment = cfg.name();
    in.config_echo = cfg.doc;
    in.ledgers = {res.ledger};
    in.dist = dist;
    in.schedule = s.schedule;
    in.rank_cfg = ranks;
    in.artifacts = artifacts;
    in.panels = {{"command", "sample"},
                 {"checks", ledger_check(res.ledger, s.schedule, static_cast<int>(probes.size()))}};
    CommandResult out{assemble_report(in), dir};
    finish(out, "sample");
    return out;
}

CommandResult cmd_optimize_schedule(const ExperimentConfig& cfg, const CommandOptions& opts) {
    const fs::path dir = experiment_dir(cfg, opts);
    const NoiseSchedule sched = make_noise_schedule(cfg);
    const auto model = make_predictor(cfg);
    EvoConfig ecfg = make_evo_config(cfg);
    if (opts.steps) ecfg.steps = *opts.steps;
    ecfg.validate();
    const TimestepGrid grid = TimestepGrid::uniform(sched.t_max(), ecfg.steps);

    const auto probes = draw_probes(ecfg.n_probes, model->dim(), probe_classes(cfg), cfg.seed() + kSearchStream);
    const auto refs = reference_outputs(probes, *model, sched, make_ref_grid(cfg), ecfg.w_const, ecfg.tau, ecfg.w_max);
    const ScheduleSearchResult res = optimize_schedule(ecfg, *model, sched, grid, probes, refs);

    write_json(dir / "schedule.json", schedule_to_json(res.schedule, grid));
    json log = json::array();
    for (const auto& r : res.log) log.push_back(to_json(r));
    write_json(dir / "search_log.json", log);

    ReportInputs in;
    in.experiment = cfg.name();
    in.config_echo = cfg.doc;
    in.schedule = res.schedule;
    in.artifacts = {{"schedule", "schedule.json"}, {"search_log", "search_log.json"}};
    in.panels = {{"command", "optimize-schedule"},
                 {"fitness", res.fitness},
                 {"quality_loss", res.quality_loss},
                 {"lambda", res.lambda},
                 {"generations", res.log.size()}};
    CommandResult out{assemble_report(in), dir};
    finish(out, "optimize-schedule");
    return out;
}

CommandResult cmd_fit_calibration(const ExperimentConfig& cfg, const CommandOptions& opts) {
    const fs::path dir = experiment_dir(cfg, opts);
    const NoiseSchedule sched = make_noise_schedule(cfg);
    const auto net = make_blocknet_predictor(cfg);
    const CachePolicy policy = make_cache_policy(cfg);
    const LoadedSchedule s = stage_schedule(cfg, opts, dir);

    const json& c = cfg.section("cache");
    const int n_runs = c.at("calibration_runs").get<int>();
    if (n_runs < 1) throw ConfigError("config key 'cache.calibration_runs' must be >= 1");
    std::vector<CalibrationRun> runs;
    for (auto& p : draw_probes(n_runs, net->dim(), probe_classes(cfg), cfg.seed() + kCalibStream))
        runs.push_back({std::move(p), s.schedule});

    const CalibrationData data = collect_calibration_data(*net, runs, s.grid, sched, policy);
    const CalibrationBank bank = fit_calibration_bank(data, c.at("ridge").get<double>());
    write_json(dir / "bank.json", bank_to_json(bank));

    json layers = json::array();
    for (int l = 0; l < bank.size(); ++l) {
        const auto& st = bank.layers[static_cast<std::size_t>(l)].stats;
        json row = {{"layer", l}, {"samples", st.samples}, {"residual_norm", st.residual_norm},
                    {"relative_residual", st.relative_residual}};
        if (!st.warning.empty()) row["warning"] = st.warning;
        layers.push_back(row);
    }
    ReportInputs in;
    in.experiment = cfg.name();
    in.config_echo = cfg.doc;
    in.schedule = s.schedule;
    in.artifacts = {{"bank", "bank.json"}};
    in.panels = {{"command", "fit-calibration"}, {"runs", n_runs}, {"layers", layers}};
    CommandResult out{assemble_report(in), dir};
    finish(out, "fit-calibration");
    return out;
}

CommandResult cmd_optimize_ranks(const ExperimentConfig& cfg, const CommandOptions& opts) {
    const fs::path dir = experiment_dir(cfg, opts);
    const NoiseSchedule sched = make_noise_schedule(cfg);
    const auto net = make_blocknet_predictor(cfg);
    const LoadedSchedule s = stage_schedule(cfg, opts, dir);
    const auto bank_path = artifact(opts.bank, dir, "bank.json");
    if (!bank_path) throw ConfigError("optimize-ranks needs a calibration bank (--bank or a prior fit-calibration)");
    const CalibrationBank bank = bank_from_json(read_json(*bank_path));

    const json& r = cfg.section("rank_search");
    const int n_eval = r.at("eval_probes").get<int>();
    if (n_eval < 1) throw ConfigError("config key 'rank_search.eval_probes' must be >= 1");
    RankProblem problem = make_rank_problem(*net, bank, s.schedule, s.grid, sched, make_cache_policy(cfg),
                                            draw_probes(n_eval, net->dim(), probe_classes(cfg),
                                                        cfg.seed() + kEvalStream));
    problem.w1_weight = r.at("w1_weight").get<double>();
    if (problem.w1_weight != 0.0) problem.target = guided_target(cfg);

    const RankSearchOptions ropts = make_rank_options(cfg, net->net().blocks());
    const RankSearchResult res = optimize_ranks(problem, ropts);
    write_json(dir / "ranks.json", rank_config_to_json(res.config));

    json uniform = json::array();
    for (int u = ropts.r_min; u <= ropts.r_max && u * ropts.K <= ropts.budget; ++u) {
        const RankConfig ucfg =
            RankConfig::uniform(ropts.blocks, ropts.K, u, ropts.r_min, ropts.r_max, ropts.budget);
        uniform.push_back({{"rank", u}, {"objective", quality_objective(ucfg, problem)}});
    }
    json moves = json::array();
    for (const auto& m : res.moves)
        moves.push_back({{"sweep", m.sweep}, {"region", m.region}, {"from", m.from}, {"to", m.to},
                         {"objective", m.objective}});

    ReportInputs in;
    in.experiment = cfg.name();
    in.config_echo = cfg.doc;
    in.schedule = s.schedule;
    in.rank_cfg = res.config;
    in.artifacts = {{"ranks", "ranks.json"}};
    in.panels = {{"command", "optimize-ranks"},
                 {"objective", res.objective},
                 {"initial_objective", res.initial_objective},
                 {"evaluations", res.evaluations},
                 {"sweeps", res.sweeps},
                 {"unimodality_flags", res.unimodality_flags},
                 {"moves", moves},
                 {"uniform", uniform}};
    CommandResult out{assemble_report(in), dir};
    finish(out, "optimize-ranks");
    return out;
}

Fig2Result run_fig2(const ExperimentConfig& cfg) {
    const NoiseSchedule sched = make_noise_schedule(cfg);
    const GaussianMixture gm = make_mixture(cfg);
    const Condition c = model_condition(cfg);
    if (gm.dim() != 1 || !c) throw ConfigError("repro-fig2 needs a 1D mixture and an integer model.condition");
    if (uses_blocknet(cfg)) throw ConfigError("repro-fig2 runs on the analytic mixture (model.kind = 'mixture')");
    const MixturePredictor model(gm, sched);
    const GridDensity target = *guided_target(cfg);

    const EvoConfig ecfg = make_evo_config(cfg);
    const auto probes = draw_probes(sample_count(cfg), 1, {*c}, cfg.seed() + kSampleStream);
    const SamplerOptions sopts = sampler_options(cfg);

    Fig2Result out{{}, {}, {}, 0.0, {}, GuidanceSchedule::constant(1, 0.0, ecfg.tau, ecfg.w_max), {}};
    out.constant_cfg = run_panel("constant-cfg", probes, constant_schedule(cfg, ecfg.ref_steps), model, sched,
                                 target, sopts);

    const TimestepGrid grid = TimestepGrid::uniform(sched.t_max(), ecfg.steps);
    const LoadedSchedule cond{GuidanceSchedule(Vec::Zero(ecfg.steps), ecfg.tau, ecfg.w_max), grid};
    out.cond_only = run_panel("conditional-only", probes, cond, model, sched, target, sopts);

    const json& f = cfg.section("fig2");
    const int n_random = f.at("random_schedules").get<int>();
    const int k_active = f.at("random_active").get<int>();
    if (n_random < 1 || k_active < 1 || k_active > ecfg.steps)
        throw ConfigError("config keys 'fig2.random_schedules' / 'fig2.random_active' out of range");
    std::mt19937_64 rng(cfg.seed() + kRandomStream);
    std::uniform_real_distribution<double> scale(ecfg.tau, ecfg.w_max);
    std::vector<double> w1s;
    for (int k = 0; k < n_random; ++k) {
        Vec w = Vec::Zero(ecfg.steps);
        for (int i : random_positions(ecfg.steps, k_active, rng)) w(i) = scale(rng);
        const LoadedSchedule rs{GuidanceSchedule(w, ecfg.tau, ecfg.w_max), grid};
        out.random_sparse.push_back(
            run_panel("random-sparse-" + std::to_string(k), probes, rs, model, sched, target, sopts));
        w1s.push_back(out.random_sparse.back().w1);
    }
    std::sort(w1s.begin(), w1s.end());
    const std::size_t m = w1s.size() / 2;
    out.random_median_w1 = w1s.size() % 2 ? w1s[m] : 0.5 * (w1s[m - 1] + w1s[m]);

    const auto search_probes = draw_probes(ecfg.n_probes, 1, {*c}, cfg.seed() + kSearchStream);
    const auto refs = reference_outputs(search_probes, model, sched, TimestepGrid::uniform(sched.t_max(), ecfg.ref_steps),
                                        ecfg.w_const, ecfg.tau, ecfg.w_max);
    ScheduleSearchResult search = optimize_schedule(ecfg, model, sched, grid, search_probes, refs);
    out.optimized_schedule = search.schedule;
    out.search_log = std::move(search.log);
    out.optimized = run_panel("optimized-sparse", probes, {out.optimized_schedule, grid}, model, sched, target, sopts);
    return out;
}

CommandResult cmd_repro_fig2(const ExperimentConfig& cfg, const CommandOptions& opts) {
    const fs::path dir = experiment_dir(cfg, opts);
    const auto t0 = std::chrono::steady_clock::now();
    const Fig2Result r = run_fig2(cfg);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const json& sc = cfg.section("sample");
    const double lo = sc.at("hist_lo").get<double>(), hi = sc.at("hist_hi").get<double>();
    const int bins = sc.at("hist_bins").get<int>();
    std::map<std::string, std::string> artifacts;
    const auto hist = [&](const PanelResult& p, const std::string& file) {
        std::ofstream out(dir / file);
        write_histogram_csv(out, histogram(p.samples, lo, hi, bins));
        artifacts[p.label] = file;
    };
    hist(r.constant_cfg, "hist_constant_cfg.csv");
    hist(r.cond_only, "hist_cond_only.csv");
    hist(r.random_sparse.front(), "hist_random_sparse.csv");
    hist(r.optimized, "hist_optimized_sparse.csv");
    {
        const GridDensity target = *guided_target(cfg);
        std::ofstream out(dir / "target_density.csv");
        out << "x,density\n" << std::setprecision(17);
        for (std::size_t i = 0; i < target.x.size(); i += 10) out << target.x[i] << ',' << target.density[i] << '\n';
        artifacts["target"] = "target_density.csv";
    }
    write_json(dir / "schedule.json", schedule_to_json(r.optimized_schedule,
                                                       TimestepGrid::uniform(make_noise_schedule(cfg).t_max(),
                                                                             r.optimized_schedule.size())));
    json log = json::array();
    for (const auto& g : r.search_log) log.push_back(to_json(g));
    write_json(dir / "search_log.json", log);
    artifacts["schedule"] = "schedule.json";
    artifacts["search_log"] = "search_log.json";

    json random = json::array();
    for (const auto& p : r.random_sparse) random.push_back(panel_json(p));
    ReportInputs in;
    in.experiment = cfg.name();
    in.config_echo = cfg.doc;
    in.schedule = r.optimized_schedule;
    in.artifacts = artifacts;
    DistReport d;
    d.wasserstein1 = r.optimized.w1;
    d.sample_count = static_cast<std::int64_t>(r.optimized.samples.size());
    in.dist = d;
    in.panels = {{"command", "repro-fig2"},
                 {"constant_cfg", panel_json(r.constant_cfg)},
                 {"cond_only", panel_json(r.cond_only)},
                 {"random_sparse", random},
                 {"random_sparse_median_w1", r.random_median_w1},
                 {"optimized_sparse", panel_json(r.optimized)},
                 {"seconds", seconds}};
    CommandResult out{assemble_report(in), dir};
    finish(out, "repro-fig2");
    return out;
}

CommandResult cmd_bench(const ExperimentConfig& cfg, const CommandOptions& opts) {
    const fs::path dir = experiment_dir(cfg, opts);
    const NoiseSchedule sched = make_noise_schedule(cfg);
    const auto net = make_blocknet_predictor(cfg);
    const LoadedSchedule s = stage_schedule(cfg, opts, dir);
    const auto bank_path = artifact(opts.bank, dir, "bank.json");
    const auto ranks_path = artifact(opts.ranks, dir, "ranks.json");
    if (!bank_path || !ranks_path) throw ConfigError("bench needs bank.json and ranks.json (run the earlier stages)");
    const CalibrationBank bank = bank_from_json(read_json(*bank_path));
    const RankConfig ranks = rank_config_from_json(read_json(*ranks_path));
    const CachePolicy policy = make_cache_policy(cfg);

    const auto probes = draw_probes(cfg.section("rank_search").at("eval_probes").get<int>(), net->dim(),
                                    probe_classes(cfg), cfg.seed() + kEvalStream);
    const SamplerOptions sopts = sampler_options(cfg);
    const LoadedSchedule base = constant_schedule(cfg, s.grid.size());

    using clock = std::chrono::steady_clock;
    const auto timed = [&](const GuidanceSchedule& g, const StepModelFactory& f) {
        const auto t0 = clock::now();
        BatchResult r = sample_final_batch(probes, s.grid, g, f, sched, sopts);
        return std::pair{std::move(r), std::chrono::duration<double>(clock::now() - t0).count()};
    };
    const StepModelFactory plain = [&net] { return std::make_unique<PlainStepModel>(*net); };
    const StepModelFactory cached = cached_model_factory(*net, bank, ranks, policy);
    const auto [baseline, t_base] = timed(base.schedule, plain);
    const auto [sparse, t_sparse] = timed(s.schedule, plain);
    const auto [cache, t_cache] = timed(s.schedule, cached);

    // MAC additivity on one trajectory: whole-run ledger vs the sum of per-step ledgers.
    SamplerOptions one = sopts;
    one.record_step_ledgers = true;
    auto step_model = cached();
    const Trajectory traj = sample(probes.front(), s.grid, s.schedule, *step_model, sched, one);
    PassLedger summed;
    for (const auto& l : traj.step_ledgers) summed.merge(l);

    double mse = 0.0;
    for (std::size_t i = 0; i < probes.size(); ++i) mse += (cache.finals[i] - sparse.finals[i]).squaredNorm();
    mse /= static_cast<double>(probes.size());
    const double base_macs = baseline_macs(s.grid.size(), net->net().blocks(), net->net().full_block_macs()) *
                             static_cast<double>(probes.size());

    const auto run_json = [&](const char* label, const BatchResult& r, const GuidanceSchedule& g, double secs) {
        json j = ledger_check(r.ledger, g, static_cast<int>(probes.size()));
        j["label"] = label;
        j["ledger"] = to_json(r.ledger);
        j["compute_fraction"] = compute_fraction(r.ledger, base_macs);
        j["seconds"] = secs;
        return j;
    };
    ReportInputs in;
    in.experiment = cfg.name();
    in.config_echo = cfg.doc;
    in.ledgers = {cache.ledger};
    in.schedule = s.schedule;
    in.rank_cfg = ranks;
    DistReport d;
    d.mse_to_reference = mse;
    d.sample_count = static_cast<std::int64_t>(probes.size());
    in.dist = d;
    in.panels = {{"command", "bench"},
                 {"runs", {run_json("constant-cfg-full", baseline, base.schedule, t_base),
                           run_json("sparse-full", sparse, s.schedule, t_sparse),
                           run_json("sparse-cached", cache, s.schedule, t_cache)}},
                 {"mac_additivity", summed == traj.ledger}};
    CommandResult out{assemble_report(in), dir};
    finish(out, "bench");
    return out;
}

CommandResult run_command(const std::string& name, const ExperimentConfig& cfg, const CommandOptions& opts) {
    if (name == "sample") return cmd_sample(cfg, opts);
    if (name == "optimize-schedule") return cmd_optimize_schedule(cfg, opts);
    if (name == "fit-calibration") return cmd_fit_calibration(cfg, opts);
    if (name == "optimize-ranks") return cmd_optimize_ranks(cfg, opts);
    if (name == "repro-fig2") return cmd_repro_fig2(cfg, opts);
    if (name == "bench") return cmd_bench(cfg, opts);
    throw ConfigError("unknown subcommand '" + name + "'");
}

}  // namespace ousac
