#pragma once

#include <span>
#include <string>
#include <vector>

#include "ousac/common.hpp"
#include "ousac/diffusion/guidance.hpp"
#include "ousac/diffusion/noise_schedule.hpp"
#include "ousac/diffusion/sampler.hpp"
#include "ousac/models/block_net.hpp"

namespace ousac {

/// Compute/reuse cadence. Steps with index % refresh_period == 0 run in full;
/// the rest reuse the cache. refresh_period == 1 disables reuse.
struct CachePolicy {
    int refresh_period = 2;
    bool guidance_rule = true;  // unconditional cache needs the branch at the previous step

    bool is_refresh_step(int step) const { return refresh_period <= 1 || step % refresh_period == 0; }
};

/// Row-paired input/output increments for one layer (one sample per row).
struct LayerIncrements {
    Mat d_in;
    Mat d_out;
    int samples() const { return static_cast<int>(d_in.rows()); }
};

struct CalibrationData {
    std::vector<LayerIncrements> layers;
};

/// One full-compute sampling run used to gather increments.
struct CalibrationRun {
    Probe probe;
    GuidanceSchedule schedule;
};

/// Replays each run with full compute and feature taps. At every would-be-cached
/// step, pairs each executed branch's features with those of the step the cache
/// would have been filled at; a branch missing at the fill step contributes no pair.
CalibrationData collect_calibration_data(const BlockNetPredictor& model, std::span<const CalibrationRun> runs,
                                         const TimestepGrid& grid, const NoiseSchedule& sched,
                                         const CachePolicy& policy);

struct FitStats {
    int samples = 0;
    double effective_ridge = 0.0;
    double residual_norm = 0.0;   // ||d_out - d_in A^T||_F
    double relative_residual = 0.0;
    std::string warning;          // set when samples < width
};

/// Full calibration matrix of one layer plus its SVD, retained so any rank can
/// be cut without refitting.
struct LayerCalibration {
    Mat A;
    Mat U;
    Vec S;  // descending
    Mat V;
    FitStats stats;
};

/// A = argmin ||d_out - A d_in||_F^2 + ridge_eff ||A||_F^2 with
/// ridge_eff = ridge * trace(d_in^T d_in) / d. Throws std::domain_error when
/// ridge == 0 and the normal equations are singular.
LayerCalibration fit_calibration(const LayerIncrements& increments, double ridge);

struct CalibrationBank {
    int width = 0;
    std::vector<LayerCalibration> layers;
    int size() const { return static_cast<int>(layers.size()); }
};

CalibrationBank fit_calibration_bank(const CalibrationData& data, double ridge);

/// Top-r singular triplets; applying them costs r * (d_in + d_out) MACs.
struct TruncatedFactors {
    Mat U;  // d_out x r
    Vec S;
    Mat V;  // d_in x r
    int rank = 0;
    bool clamped = false;  // requested rank exceeded the width

    Vec apply(const Vec& delta) const { return U * S.cwiseProduct(V.transpose() * delta); }
    Mat matrix() const { return U * S.asDiagonal() * V.transpose(); }
};

/// Requires r >= 1; r above the width is clamped with `clamped` set.
TruncatedFactors truncate_rank(const CalibrationBank& bank, int layer, int r);

/// ||d_out - A_r d_in||_F on the given increments.
double truncation_residual(const CalibrationBank& bank, int layer, int r, const LayerIncrements& increments);

}  // namespace ousac
