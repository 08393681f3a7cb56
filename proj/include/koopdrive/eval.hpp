#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "koopdrive/model.hpp"
#include "koopdrive/rls.hpp"
#include "koopdrive/trajectory.hpp"

namespace koopdrive {

inline constexpr double kMphPerMps = 2.23694;

// sqrt(mean((p - a)^2)). Throws ValidationError on empty or mismatched input.
double rmse(std::span<const double> predicted, std::span<const double> actual);

enum class ModelVariant { Offline, Online };
std::string_view to_string(ModelVariant variant);

struct HorizonReport {
    double horizon_s = 0.0;
    ModelVariant variant = ModelVariant::Offline;
    RolloutMode mode = RolloutMode::Lifted;
    double rmse_speed = 0.0;  // m/s
    double rmse_force = 0.0;  // N
    std::size_t windows = 0;
    std::size_t samples = 0;  // pooled predicted samples

    double rmse_speed_mph() const { return rmse_speed * kMphPerMps; }
    double rmse_force_kn() const { return rmse_force / 1000.0; }
};

struct OnlineSettings {
    double lambda = 0.9;
    double cadence_s = 1.0;
};

struct TimeWindow {
    double t_start = 0.0;
    double t_end = 0.0;
};

// Splits the segment into consecutive windows of length H (the last one may
// be shorter), re-initializes each rollout from the measured state at the
// window start, and pools squared errors over every predicted sample of every
// window. The online variant starts RLS from the offline model at the segment
// start, ticks once per cadence as samples arrive, and predicts each window
// with the estimate held at the window start. Each horizon is an independent
// run. Reports come back offline first, then online, in horizon order.
std::vector<HorizonReport> evaluate_horizons(const Trajectory& trajectory, const KoopmanModel& model,
                                             std::span<const double> horizons, const TimeWindow& segment,
                                             const std::optional<OnlineSettings>& online = std::nullopt,
                                             RolloutMode mode = RolloutMode::Lifted);

std::string horizon_reports_to_csv(const std::vector<HorizonReport>& reports);
std::string horizon_reports_to_table(const std::vector<HorizonReport>& reports);

// Compute-time comparison -------------------------------------------------

struct BenchOptions {
    double lambda = 0.9;
    double cadence_s = 1.0;
    double ridge = 0.0;
    int repeats = 3;  // median over repeats
    std::string hardware_note;
};

struct BenchRow {
    double horizon_s = 0.0;
    std::size_t retrain_pairs = 0;
    double retrain_s = 0.0;   // build matrices + fit on history plus new data
    double online_s = 0.0;    // RLS ticks over only the new data
    std::size_t ticks = 0;
    double per_tick_s = 0.0;
    double speedup = 0.0;       // retrain_s / online_s
    double tick_speedup = 0.0;  // retrain_s / per_tick_s
};

struct BenchReport {
    std::vector<BenchRow> rows;
    std::size_t history_pairs = 0;
    // Per-tick time with the history doubled, divided by per-tick time at the
    // original history size.
    double tick_growth_ratio = 0.0;
    std::string hardware_note;
    std::string warning;
};

inline constexpr std::size_t kBenchMinPairs = 100000;

// For each horizon H, the new measurements are the first H seconds of
// `new_data`.
BenchReport bench_update(std::span<const Trajectory> history, const Trajectory& new_data, const KoopmanModel& model,
                         std::span<const double> horizons, const BenchOptions& options);

std::string bench_report_to_csv(const BenchReport& report);
std::string bench_report_to_table(const BenchReport& report);

}  // namespace koopdrive
