#include "koopdrive/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "koopdrive/edmd.hpp"
#include "koopdrive/io.hpp"

namespace koopdrive {

double rmse(std::span<const double> predicted, std::span<const double> actual) {
    if (predicted.size() != actual.size()) {
        throw ValidationError("rmse: length mismatch (" + std::to_string(predicted.size()) + " vs " +
                              std::to_string(actual.size()) + ")");
    }
    if (predicted.empty()) throw ValidationError("rmse: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = predicted[i] - actual[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(predicted.size()));
}

std::string_view to_string(ModelVariant variant) { return variant == ModelVariant::Offline ? "offline" : "online"; }

namespace {

struct SegmentIndices {
    std::size_t first = 0;
    std::size_t last = 0;  // inclusive
};

SegmentIndices locate(const Trajectory& traj, const TimeWindow& segment) {
    if (!(segment.t_start < segment.t_end)) throw ValidationError("evaluation segment needs t_start < t_end");
    const auto first = traj.index_at_or_after(segment.t_start);
    auto end = traj.index_at_or_after(segment.t_end);
    if (end < traj.size() && traj.samples[end].t <= segment.t_end + 1e-6) ++end;
    if (first >= traj.size() || end == 0 || end - 1 <= first) {
        throw ValidationError("evaluation segment lies outside the trajectory");
    }
    if (traj.samples.back().t < segment.t_end - 1e-6 || traj.samples.front().t > segment.t_start + 1e-6) {
        throw ValidationError("evaluation segment extends beyond the trajectory");
    }
    return {first, end - 1};
}

HorizonReport run_horizon(const Trajectory& traj, const KoopmanModel& model, double horizon, SegmentIndices seg,
                          const std::optional<OnlineSettings>& online, RolloutMode mode) {
    const auto window = static_cast<std::size_t>(std::llround(horizon / traj.sample_period));
    if (window == 0) throw ValidationError("horizon shorter than one sample");
    if (window > seg.last - seg.first) {
        throw ValidationError("horizon " + io::format_double(horizon) + " s is longer than the evaluation segment");
    }

    std::optional<OnlineUpdater> updater;
    if (online) {
        updater.emplace(init_rls(model, online->lambda), model.basis,
                        samples_per_cadence(online->cadence_s, traj.sample_period));
    }
    std::size_t fed = seg.first;  // next sample index to give the updater

    std::vector<double> inputs;
    std::vector<double> pred_v, pred_f, act_v, act_f;
    HorizonReport report;
    report.horizon_s = horizon;
    report.variant = online ? ModelVariant::Online : ModelVariant::Offline;
    report.mode = mode;

    for (std::size_t start = seg.first; start < seg.last; start += window) {
        const std::size_t stop = std::min(start + window, seg.last);
        if (updater) {
            while (fed <= start) updater->push(traj.samples[fed++]);
        }
        const KoopmanModel snapshot = updater ? updater->state().snapshot(model) : model;
        inputs.clear();
        for (std::size_t k = start; k < stop; ++k) inputs.push_back(traj.samples[k].v_ref);
        const auto predicted = rollout(updater ? snapshot : model, traj.samples[start].state(), inputs, mode);
        for (std::size_t k = 1; k < predicted.size(); ++k) {
            pred_v.push_back(predicted[k].v);
            pred_f.push_back(predicted[k].f_tr);
            act_v.push_back(traj.samples[start + k].v);
            act_f.push_back(traj.samples[start + k].f_tr);
        }
        ++report.windows;
    }
    report.samples = pred_v.size();
    report.rmse_speed = rmse(pred_v, act_v);
    report.rmse_force = rmse(pred_f, act_f);
    return report;
}

}  // namespace

std::vector<HorizonReport> evaluate_horizons(const Trajectory& trajectory, const KoopmanModel& model,
                                             std::span<const double> horizons, const TimeWindow& segment,
                                             const std::optional<OnlineSettings>& online, RolloutMode mode) {
    trajectory.validate();
    model.validate();
    if (horizons.empty()) throw ValidationError("no prediction horizons given");
    for (double h : horizons)
        if (!std::isfinite(h) || !(h > 0.0)) throw ValidationError("prediction horizons must be positive");
    if (!same_sample_period(trajectory.sample_period, model.sample_period)) {
        throw ValidationError("trajectory sample period does not match the model");
    }
    const auto seg = locate(trajectory, segment);

    std::vector<HorizonReport> reports;
    for (double h : horizons) reports.push_back(run_horizon(trajectory, model, h, seg, std::nullopt, mode));
    if (online) {
        for (double h : horizons) reports.push_back(run_horizon(trajectory, model, h, seg, online, mode));
    }
    return reports;
}

std::string horizon_reports_to_csv(const std::vector<HorizonReport>& reports) {
    std::string out =
        "variant,mode,horizon_s,rmse_speed_mps,rmse_speed_mph,rmse_force_n,rmse_force_kn,windows,samples,aggregation\n";
    for (const auto& r : reports) {
        out += std::string(to_string(r.variant)) + ',' + std::string(to_string(r.mode)) + ',' +
               io::format_double(r.horizon_s) + ',' + io::format_double(r.rmse_speed) + ',' +
               io::format_double(r.rmse_speed_mph()) + ',' + io::format_double(r.rmse_force) + ',' +
               io::format_double(r.rmse_force_kn()) + ',' + std::to_string(r.windows) + ',' +
               std::to_string(r.samples) + ",pooled\n";
    }
    return out;
}

namespace {

std::string fixed(double value, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

std::string horizon_reports_to_table(const std::vector<HorizonReport>& reports) {
    // Group by (variant, mode), columns by horizon in first-seen order.
    std::vector<double> horizons;
    for (const auto& r : reports)
        if (std::find(horizons.begin(), horizons.end(), r.horizon_s) == horizons.end()) horizons.push_back(r.horizon_s);

    std::ostringstream os;
    auto emit = [&](const char* title, auto getter, int precision) {
        os << title << '\n';
        os << pad("Prediction horizon [s]", 28);
        for (double h : horizons) os << pad(fixed(h, 0) + "s", 10);
        os << '\n';
        for (ModelVariant variant : {ModelVariant::Offline, ModelVariant::Online})
            for (RolloutMode mode : {RolloutMode::Lifted, RolloutMode::Relift}) {
                std::vector<const HorizonReport*> row;
                for (double h : horizons)
                    for (const auto& r : reports)
                        if (r.variant == variant && r.mode == mode && r.horizon_s == h) row.push_back(&r);
                if (row.empty()) continue;
                os << pad(std::string(to_string(variant)) + " (" + std::string(to_string(mode)) + ")", 28);
                for (const auto* r : row) os << pad(fixed(getter(*r), precision), 10);
                os << '\n';
            }
        os << '\n';
    };
    emit("Speed RMSE [mph]", [](const HorizonReport& r) { return r.rmse_speed_mph(); }, 2);
    emit("Traction force RMSE [kN]", [](const HorizonReport& r) { return r.rmse_force_kn(); }, 2);
    os << "RMSE pooled over all samples of all windows.\n";
    return os.str();
}

// Compute-time comparison -------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const auto n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

Trajectory head_seconds(const Trajectory& traj, double seconds) {
    const auto count = static_cast<std::size_t>(std::llround(seconds / traj.sample_period)) + 1;
    if (count > traj.size()) {
        throw ValidationError("bench: new data shorter than horizon " + io::format_double(seconds) + " s");
    }
    Trajectory out;
    out.sample_period = traj.sample_period;
    out.samples.assign(traj.samples.begin(), traj.samples.begin() + static_cast<std::ptrdiff_t>(count));
    return out;
}

double time_ticks(const KoopmanModel& model, const Trajectory& data, const BenchOptions& options, std::size_t& ticks) {
    const auto per_tick = samples_per_cadence(options.cadence_s, data.sample_period);
    OnlineUpdater updater(init_rls(model, options.lambda), model.basis, per_tick);
    const auto t0 = Clock::now();
    for (const auto& s : data.samples) updater.push(s);
    const double elapsed = seconds_since(t0);
    ticks = updater.ticks();
    return elapsed;
}

}  // namespace

BenchReport bench_update(std::span<const Trajectory> history, const Trajectory& new_data, const KoopmanModel& model,
                         std::span<const double> horizons, const BenchOptions& options) {
    if (history.empty()) throw ValidationError("bench: empty history");
    if (horizons.empty()) throw ValidationError("bench: no horizons");
    if (options.repeats < 1) throw ValidationError("bench: repeats must be >= 1");
    model.validate();
    new_data.validate();

    BenchReport report;
    report.hardware_note = options.hardware_note;
    for (const auto& t : history) report.history_pairs += t.size() > 0 ? t.size() - 1 : 0;
    if (report.history_pairs < kBenchMinPairs) {
        report.warning = "history has " + std::to_string(report.history_pairs) + " pairs (< " +
                         std::to_string(kBenchMinPairs) + "); fixed overheads may dominate";
    }

    FitConfig fit_config;
    fit_config.ridge = options.ridge;

    for (double h : horizons) {
        const Trajectory fresh = head_seconds(new_data, h);
        std::vector<Trajectory> all(history.begin(), history.end());
        all.push_back(fresh);

        BenchRow row;
        row.horizon_s = h;
        std::vector<double> retrain, online;
        for (int r = 0; r < options.repeats; ++r) {
            const auto t0 = Clock::now();
            const auto matrices = build_matrices(all, model.basis);
            const auto refit = fit(matrices, fit_config);
            retrain.push_back(seconds_since(t0));
            row.retrain_pairs = static_cast<std::size_t>(matrices.pairs());
            (void)refit;
            std::size_t ticks = 0;
            online.push_back(time_ticks(model, fresh, options, ticks));
            row.ticks = ticks;
        }
        row.retrain_s = median(retrain);
        row.online_s = median(online);
        row.per_tick_s = row.ticks > 0 ? row.online_s / static_cast<double>(row.ticks) : row.online_s;
        row.speedup = row.online_s > 0.0 ? row.retrain_s / row.online_s : 0.0;
        row.tick_speedup = row.per_tick_s > 0.0 ? row.retrain_s / row.per_tick_s : 0.0;
        report.rows.push_back(row);
    }

    // Per-tick cost against history size: start RLS from models refit on the
    // history and on the history taken twice, and tick over the same new data.
    {
        std::vector<Trajectory> doubled(history.begin(), history.end());
        doubled.insert(doubled.end(), history.begin(), history.end());
        const auto model_single = fit(build_matrices(history, model.basis), fit_config);
        const auto model_double = fit(build_matrices(doubled, model.basis), fit_config);
        const Trajectory fresh = head_seconds(new_data, *std::max_element(horizons.begin(), horizons.end()));
        std::vector<double> single_t, double_t;
        for (int r = 0; r < std::max(options.repeats, 5); ++r) {
            std::size_t ticks_a = 0, ticks_b = 0;
            single_t.push_back(time_ticks(model_single, fresh, options, ticks_a) / static_cast<double>(std::max<std::size_t>(ticks_a, 1)));
            double_t.push_back(time_ticks(model_double, fresh, options, ticks_b) / static_cast<double>(std::max<std::size_t>(ticks_b, 1)));
        }
        const double a = median(single_t);
        const double b = median(double_t);
        report.tick_growth_ratio = a > 0.0 ? b / a : 0.0;
    }
    return report;
}

std::string bench_report_to_csv(const BenchReport& report) {
    std::string out =
        "horizon_s,retrain_pairs,retrain_s,online_s,ticks,per_tick_s,speedup,tick_speedup,history_pairs,"
        "tick_growth_ratio,hardware_note,warning\n";
    auto quote = [](const std::string& s) {
        std::string q = "\"";
        for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    };
    for (const auto& r : report.rows) {
        out += io::format_double(r.horizon_s) + ',' + std::to_string(r.retrain_pairs) + ',' +
               io::format_double(r.retrain_s) + ',' + io::format_double(r.online_s) + ',' + std::to_string(r.ticks) +
               ',' + io::format_double(r.per_tick_s) + ',' + io::format_double(r.speedup) + ',' +
               io::format_double(r.tick_speedup) + ',' + std::to_string(report.history_pairs) + ',' +
               io::format_double(report.tick_growth_ratio) + ',' + quote(report.hardware_note) + ',' +
               quote(report.warning) + '\n';
    }
    return out;
}

std::string bench_report_to_table(const BenchReport& report) {
    std::ostringstream os;
    os << "Computation time [s]\n";
    os << pad("Prediction horizon [s]", 30);
    for (const auto& r : report.rows) os << pad(fixed(r.horizon_s, 0) + "s", 12);
    os << '\n' << pad("Offline model with retraining", 30);
    for (const auto& r : report.rows) os << pad(fixed(r.retrain_s, 4), 12);
    os << '\n' << pad("Online model (RLS)", 30);
    for (const auto& r : report.rows) os << pad(fixed(r.online_s, 6), 12);
    os << '\n' << pad("Speedup", 30);
    for (const auto& r : report.rows) os << pad(fixed(r.speedup, 1), 12);
    os << '\n' << pad("Speedup per 1 s tick", 30);
    for (const auto& r : report.rows) os << pad(fixed(r.tick_speedup, 1), 12);
    os << "\nhistory pairs: " << report.history_pairs << ", per-tick growth with doubled history: "
       << fixed(report.tick_growth_ratio, 3) << '\n';
    if (!report.hardware_note.empty()) os << "hardware: " << report.hardware_note << '\n';
    if (!report.warning.empty()) os << "warning: " << report.warning << '\n';
    return os.str();
}

}  // namespace koopdrive
