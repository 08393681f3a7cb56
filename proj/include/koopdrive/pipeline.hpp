#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "koopdrive/advisory.hpp"
#include "koopdrive/driversim.hpp"
#include "koopdrive/edmd.hpp"
#include "koopdrive/eval.hpp"
#include "koopdrive/model.hpp"
#include "koopdrive/rls.hpp"

namespace koopdrive {

struct DistractionSpec {
    int driver = 1;  // 1-based roster index
    AttentionWindow window;
};

struct RunConfig {
    std::optional<std::filesystem::path> route;  // resolved against the config file
    std::uint64_t seed = 2024;
    double sample_period = 0.025;

    EcoDpConfig dp;
    double stop_dwell_s = 3.0;

    VehicleParams vehicle;
    int drivers = 18;
    double driver_spread = 0.2;
    DriverParams driver_base;
    std::vector<DistractionSpec> distractions;

    FitConfig fit;
    OnlineSettings rls;

    int eval_driver = 18;
    std::vector<double> horizons{50.0, 20.0, 10.0, 5.0};
    TimeWindow segment{515.0, 630.0};
    std::vector<RolloutMode> modes{RolloutMode::Lifted};

    int bench_repeats = 3;
    int bench_history_copies = 1;  // history is the roster repeated this many times
    std::string hardware_note;

    void validate() const;
    // Every horizon fits in the evaluation segment (eval, bench and pipeline only).
    void validate_horizons() const;
};

// Unknown keys are rejected so a typo cannot silently fall back to a default.
RunConfig run_config_from_json(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

// Seed of roster entry `index` (1-based).
std::uint64_t driver_seed(std::uint64_t seed, int index);
DriverParams roster_driver(const RunConfig& config, int index);
std::string driver_file_name(int index);

// Output directory must exist or be creatable; checked before anything is written.
void prepare_output_dir(const std::filesystem::path& dir);

struct AdvisoryResult {
    AdvisoryProfile profile;
    TimeAdvisory time;
};

AdvisoryResult compute_advisory(const RouteSpec& route, const RunConfig& config);
// advisory_distance.csv, advisory_time.csv, advisory_meta.json
void write_advisory(const AdvisoryResult& result, const RunConfig& config, const std::filesystem::path& out_dir);

std::vector<Trajectory> simulate_roster(const TimeAdvisory& advisory, const RunConfig& config);
void write_roster(const std::vector<Trajectory>& trajectories, const std::filesystem::path& out_dir);

struct FitResult {
    KoopmanModel model;
    FitDiagnostics diagnostics;
    std::size_t train_pairs = 0;
    std::size_t val_pairs = 0;
    std::size_t test_pairs = 0;
    double val_rmse_speed = 0.0;  // one-step, m/s
    double val_rmse_force = 0.0;  // one-step, N
};

FitResult fit_trajectories(const std::vector<Trajectory>& trajectories, const RunConfig& config);
std::string fit_report_json(const FitResult& result, const RunConfig& config);

struct TickRecord {
    std::size_t tick = 0;
    double t_end = 0.0;
    std::size_t updates = 0;
    double theta_change = 0.0;      // Frobenius norm of the change over the tick
    double p_trace = 0.0;
};

struct UpdateResult {
    KoopmanModel model;
    std::vector<TickRecord> ticks;
};

// Runs online updates over the segment of `trajectory`, starting from `model`.
UpdateResult update_model(const KoopmanModel& model, const Trajectory& trajectory, const TimeWindow& segment,
                          const OnlineSettings& settings);
std::string tick_log_csv(const std::vector<TickRecord>& ticks);

std::vector<HorizonReport> evaluate_model(const KoopmanModel& model, const Trajectory& trajectory,
                                          const RunConfig& config, bool online);

// advisory -> roster -> fit -> eval (and bench when requested), all under out_dir.
void run_pipeline(const RunConfig& config, const RouteSpec& route, const std::filesystem::path& out_dir,
                  bool with_bench);

}  // namespace koopdrive
