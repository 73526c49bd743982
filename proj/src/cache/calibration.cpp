#include "ousac/cache/calibration.hpp"

#include <array>
#include <exception>

namespace ousac {

namespace {

// Full-compute step model that keeps every branch's taps per step.
class TapRecorder final : public StepModel {
public:
    explicit TapRecorder(const BlockNetPredictor& model) : model_(model) {}

    int dim() const override { return model_.dim(); }

    Vec guided_eps(const Vec& x, int step, int t, Condition c, double w_t, double tau, PassLedger& ledger) override {
        auto& slot = taps_.emplace_back();
        Vec eps_c = run(x, t, c, slot[0]);
        ledger.record_pass(Branch::conditional);
        executed_.push_back({true, false});
        (void)step;
        if (!(w_t >= tau)) return eps_c;
        Vec eps_u = run(x, t, std::nullopt, slot[1]);
        ledger.record_pass(Branch::unconditional);
        executed_.back()[1] = true;
        return apply_cfg(eps_u, eps_c, w_t);
    }

    const std::vector<std::array<FeatureTap, 2>>& taps() const { return taps_; }
    const std::vector<std::array<bool, 2>>& executed() const { return executed_; }

private:
    Vec run(const Vec& x, int t, Condition c, FeatureTap& tap) const {
        Vec h = model_.net().embed(x, t, c);
        for (int l = 0; l < model_.net().blocks(); ++l) {
            Vec out = model_.net().block(l, h);
            tap.h_in.push_back(h);
            tap.h_out.push_back(out);
            h = std::move(out);
        }
        return model_.finish(h, x, t, c);
    }

    const BlockNetPredictor& model_;
    std::vector<std::array<FeatureTap, 2>> taps_;
    std::vector<std::array<bool, 2>> executed_;
};

struct PairRows {
    std::vector<std::vector<Vec>> d_in;   // per layer
    std::vector<std::vector<Vec>> d_out;  // per layer
};

PairRows pairs_for_run(const BlockNetPredictor& model, const CalibrationRun& run, const TimestepGrid& grid,
                       const NoiseSchedule& sched, const CachePolicy& policy) {
    TapRecorder rec(model);
    SamplerOptions opts;
    opts.record_states = false;
    sample(run.probe, grid, run.schedule, rec, sched, opts);

    const int L = model.net().blocks();
    PairRows rows;
    rows.d_in.resize(static_cast<std::size_t>(L));
    rows.d_out.resize(static_cast<std::size_t>(L));
    const auto& taps = rec.taps();
    const auto& exec = rec.executed();
    for (int i = 0; i < grid.size(); ++i) {
        if (policy.is_refresh_step(i)) continue;
        const int src = i - i % policy.refresh_period;
        for (int b = 0; b < 2; ++b) {
            const auto ui = static_cast<std::size_t>(i);
            const auto us = static_cast<std::size_t>(src);
            if (!exec[ui][static_cast<std::size_t>(b)] || !exec[us][static_cast<std::size_t>(b)]) continue;
            const auto& now = taps[ui][static_cast<std::size_t>(b)];
            const auto& then = taps[us][static_cast<std::size_t>(b)];
            for (int l = 0; l < L; ++l) {
                const auto ul = static_cast<std::size_t>(l);
                rows.d_in[ul].push_back(now.h_in[ul] - then.h_in[ul]);
                rows.d_out[ul].push_back(now.h_out[ul] - then.h_out[ul]);
            }
        }
    }
    return rows;
}

Mat stack(const std::vector<Vec>& rows, int width) {
    Mat m(static_cast<Eigen::Index>(rows.size()), width);
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return m;
}

}  // namespace

CalibrationData collect_calibration_data(const BlockNetPredictor& model, std::span<const CalibrationRun> runs,
                                         const TimestepGrid& grid, const NoiseSchedule& sched,
                                         const CachePolicy& policy) {
    if (policy.refresh_period < 1) throw ConfigError("cache.refresh_period must be >= 1");
    const auto n = static_cast<std::ptrdiff_t>(runs.size());
    std::vector<PairRows> per_run(runs.size());
    std::vector<std::exception_ptr> errors(runs.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t r = 0; r < n; ++r) {
        const auto u = static_cast<std::size_t>(r);
        try {
            per_run[u] = pairs_for_run(model, runs[u], grid, sched, policy);
        } catch (...) {
            errors[u] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    const int L = model.net().blocks();
    const int d = model.net().width();
    CalibrationData data;
    data.layers.resize(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l) {
        std::vector<Vec> din;
        std::vector<Vec> dout;
        for (const auto& pr : per_run) {
            const auto& a = pr.d_in[static_cast<std::size_t>(l)];
            const auto& b = pr.d_out[static_cast<std::size_t>(l)];
            din.insert(din.end(), a.begin(), a.end());
            dout.insert(dout.end(), b.begin(), b.end());
        }
        data.layers[static_cast<std::size_t>(l)] = {stack(din, d), stack(dout, d)};
    }
    return data;
}

LayerCalibration fit_calibration(const LayerIncrements& inc, double ridge) {
    if (inc.samples() < 1) throw std::invalid_argument("fit_calibration needs at least one increment pair");
    if (inc.d_in.rows() != inc.d_out.rows()) throw std::invalid_argument("increment row counts differ");
    if (!(ridge >= 0.0)) throw std::invalid_argument("ridge must be non-negative");
    const auto d_in = static_cast<int>(inc.d_in.cols());

    const Mat gram = inc.d_in.transpose() * inc.d_in;
    const double ridge_eff = ridge * gram.trace() / d_in;
    Mat normal = gram;
    normal.diagonal().array() += ridge_eff;

    if (ridge == 0.0) {
        const Eigen::SelfAdjointEigenSolver<Mat> eig(normal, Eigen::EigenvaluesOnly);
        const double top = eig.eigenvalues().maxCoeff();
        if (!(eig.eigenvalues().minCoeff() > 1e-12 * std::max(top, 1e-300)))
            throw std::domain_error("singular calibration normal equations: use ridge > 0");
    }
    const Eigen::LDLT<Mat> ldlt(normal);
    if (ldlt.info() != Eigen::Success) throw std::domain_error("calibration normal equations could not be factored");

    // Rows are samples: d_out ~= d_in * A^T, so A^T = (G + r I)^{-1} d_in^T d_out.
    LayerCalibration cal;
    cal.A = ldlt.solve(inc.d_in.transpose() * inc.d_out).transpose();

    const Eigen::JacobiSVD<Mat> svd(cal.A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    cal.U = svd.matrixU();
    cal.S = svd.singularValues();
    cal.V = svd.matrixV();

    cal.stats.samples = inc.samples();
    cal.stats.effective_ridge = ridge_eff;
    cal.stats.residual_norm = (inc.d_out - inc.d_in * cal.A.transpose()).norm();
    const double scale = inc.d_out.norm();
    cal.stats.relative_residual = scale > 0.0 ? cal.stats.residual_norm / scale : 0.0;
    if (inc.samples() < d_in)
        cal.stats.warning = "rank-deficient: " + std::to_string(inc.samples()) + " increment pairs for width " +
                            std::to_string(d_in);
    return cal;
}

CalibrationBank fit_calibration_bank(const CalibrationData& data, double ridge) {
    CalibrationBank bank;
    for (const auto& layer : data.layers) {
        bank.layers.push_back(fit_calibration(layer, ridge));
        bank.width = static_cast<int>(bank.layers.back().A.rows());
    }
    return bank;
}

TruncatedFactors truncate_rank(const CalibrationBank& bank, int layer, int r) {
    if (layer < 0 || layer >= bank.size()) throw std::out_of_range("calibration layer out of range");
    if (r < 1) throw std::invalid_argument("truncation rank must be >= 1");
    const auto& cal = bank.layers[static_cast<std::size_t>(layer)];
    TruncatedFactors f;
    const int full = static_cast<int>(cal.S.size());
    f.clamped = r > full;
    f.rank = std::min(r, full);
    f.U = cal.U.leftCols(f.rank);
    f.S = cal.S.head(f.rank);
    f.V = cal.V.leftCols(f.rank);
    return f;
}

double truncation_residual(const CalibrationBank& bank, int layer, int r, const LayerIncrements& inc) {
    const TruncatedFactors f = truncate_rank(bank, layer, r);
    return (inc.d_out - inc.d_in * f.matrix().transpose()).norm();
}

}  // namespace ousac
