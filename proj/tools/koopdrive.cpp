// koopdrive command-line front end.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "koopdrive/advisory.hpp"
#include "koopdrive/error.hpp"
#include "koopdrive/eval.hpp"
#include "koopdrive/io.hpp"
#include "koopdrive/model.hpp"
#include "koopdrive/pipeline.hpp"

namespace fs = std::filesystem;
using namespace koopdrive;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kIo = 2, kValidation = 3, kNumerical = 4 };

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    for (const auto& field : io::split(text, ',')) out.push_back(io::parse_double(field, what));
    return out;
}

TimeWindow parse_segment(const std::string& text) {
    const auto parts = io::split(text, ':');
    if (parts.size() != 2) throw ValidationError("--segment expects START:END, got '" + text + "'");
    return {io::parse_double(parts[0], "--segment"), io::parse_double(parts[1], "--segment")};
}

std::vector<RolloutMode> parse_modes(const std::string& text) {
    if (text == "both") return {RolloutMode::Lifted, RolloutMode::Relift};
    return {parse_rollout_mode(text)};
}

// Options shared by most subcommands; anything set here overrides the config file.
struct Overrides {
    std::string config;
    std::optional<double> gamma;
    std::optional<std::uint64_t> seed;
    std::optional<int> drivers;
    std::optional<double> lambda;
    std::optional<double> cadence;
    std::optional<double> ridge;
    std::optional<int> degree;
    bool auto_scale = false;
    bool no_auto_scale = false;
    std::string horizons;
    std::string segment;
    std::string mode;
    std::optional<int> eval_driver;
};

RunConfig resolve(const Overrides& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
    if (o.gamma) c.dp.gamma = *o.gamma;
    if (o.seed) c.seed = *o.seed;
    if (o.drivers) {
        if (*o.drivers < 1) throw ValidationError("--drivers must be at least 1");
        c.drivers = *o.drivers;
        // Keep the roster consistent with a shrunk driver count.
        std::erase_if(c.distractions, [&](const DistractionSpec& d) { return d.driver > c.drivers; });
        if (c.eval_driver > c.drivers) c.eval_driver = c.drivers;
    }
    if (o.lambda) c.rls.lambda = *o.lambda;
    if (o.cadence) c.rls.cadence_s = *o.cadence;
    if (o.ridge) c.fit.ridge = *o.ridge;
    if (o.degree) c.fit.max_degree = *o.degree;
    if (o.auto_scale) c.fit.auto_scale = true;
    if (o.no_auto_scale) c.fit.auto_scale = false;
    if (!o.horizons.empty()) c.horizons = parse_list(o.horizons, "--horizons");
    if (!o.segment.empty()) c.segment = parse_segment(o.segment);
    if (!o.mode.empty()) c.modes = parse_modes(o.mode);
    if (o.eval_driver) c.eval_driver = *o.eval_driver;
    c.validate();
    return c;
}

void add_config(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "JSON run configuration");
}

std::vector<Trajectory> read_trajectories(const std::vector<std::string>& paths) {
    std::vector<Trajectory> out;
    for (const auto& p : paths) out.push_back(read_trajectory_csv(p));
    return out;
}

RouteSpec read_route(const std::string& path) {
    if (!fs::is_regular_file(path)) throw IoError("route file not found: " + path);
    return read_route_csv(path);
}

void write_or_print(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
    } else {
        io::write_text_file_atomic(path, content);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Koopman driver-response modeling with online updates and eco-driving advice"};
    app.require_subcommand(1);
    Overrides o;

    // advisory
    auto* adv = app.add_subcommand("advisory", "Solve the eco-driving DP on a route and write advisory CSVs");
    std::string route_path, out_dir;
    add_config(adv, o);
    adv->add_option("--route", route_path, "route CSV (position_m,v_min_mps,v_max_mps,stop,grade)")->required();
    adv->add_option("--out", out_dir, "output directory")->required();
    adv->add_option("--gamma", o.gamma, "fuel/time trade-off in [0, 1]");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate the synthetic driver roster on a time advisory");
    std::string advisory_path;
    add_config(sim, o);
    sim->add_option("--advisory", advisory_path, "time advisory CSV (t_s,v_ref_mps)")->required();
    sim->add_option("--out", out_dir, "output directory")->required();
    sim->add_option("--drivers", o.drivers, "number of drivers");
    sim->add_option("--seed", o.seed, "top-level seed; driver i uses seed + i");

    // fit
    auto* fitc = app.add_subcommand("fit", "Fit an EDMD model to trajectory CSVs");
    std::vector<std::string> traj_paths;
    std::string model_out, report_out;
    add_config(fitc, o);
    fitc->add_option("trajectories", traj_paths, "trajectory CSVs")->required();
    fitc->add_option("--model-out", model_out, "model JSON to write")->required();
    fitc->add_option("--report-out", report_out, "fit report JSON (default: stdout)");
    fitc->add_option("--ridge", o.ridge, "Tikhonov weight (0: plain least squares)");
    fitc->add_option("--degree", o.degree, "maximum monomial degree");
    fitc->add_flag("--auto-scale", o.auto_scale, "scale states by their max magnitude before lifting");
    fitc->add_flag("--no-auto-scale", o.no_auto_scale, "lift raw physical states");

    // update
    auto* upd = app.add_subcommand("update", "Run online RLS updates over a trajectory segment");
    std::string model_path, traj_path, log_out;
    add_config(upd, o);
    upd->add_option("--model", model_path, "model JSON")->required();
    upd->add_option("--trajectory", traj_path, "trajectory CSV")->required();
    upd->add_option("--segment", o.segment, "START:END in seconds");
    upd->add_option("--lambda", o.lambda, "forgetting factor in (0, 1]");
    upd->add_option("--cadence", o.cadence, "update cadence in seconds");
    upd->add_option("--model-out", model_out, "updated model JSON")->required();
    upd->add_option("--log-out", log_out, "tick log CSV (default: stdout)");

    // eval
    auto* ev = app.add_subcommand("eval", "Horizon-wise RMSE of offline and online predictions");
    std::string csv_out;
    bool offline_only = false;
    add_config(ev, o);
    ev->add_option("--model", model_path, "model JSON")->required();
    ev->add_option("--trajectory", traj_path, "trajectory CSV")->required();
    ev->add_option("--horizons", o.horizons, "comma-separated horizons in seconds");
    ev->add_option("--segment", o.segment, "START:END in seconds");
    ev->add_option("--mode", o.mode, "lifted, relift or both");
    ev->add_option("--lambda", o.lambda, "forgetting factor for the online variant");
    ev->add_option("--cadence", o.cadence, "update cadence in seconds");
    ev->add_flag("--offline-only", offline_only, "skip the online variant");
    ev->add_option("--out", csv_out, "report CSV (the table goes to stdout)");

    // bench
    auto* bn = app.add_subcommand("bench", "Time full retraining against online RLS ticks");
    std::vector<std::string> history_paths;
    std::optional<int> repeats;
    std::string hardware_note;
    add_config(bn, o);
    bn->add_option("--model", model_path, "model JSON")->required();
    bn->add_option("--history", history_paths, "accumulated trajectory CSVs")->required();
    bn->add_option("--new", traj_path, "new measurements (trajectory CSV)")->required();
    bn->add_option("--horizons", o.horizons, "comma-separated horizons in seconds");
    bn->add_option("--lambda", o.lambda, "forgetting factor");
    bn->add_option("--repeats", repeats, "timing repeats (median is reported)");
    bn->add_option("--hardware-note", hardware_note, "free-text hardware description");
    bn->add_option("--out", csv_out, "report CSV (the table goes to stdout)");

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "advisory -> drivers -> fit -> update -> eval in one run");
    bool with_bench = false;
    add_config(pipe, o);
    pipe->add_option("--route", route_path, "route CSV (default: the config's route)");
    pipe->add_option("--out", out_dir, "output directory")->required();
    pipe->add_option("--gamma", o.gamma, "fuel/time trade-off in [0, 1]");
    pipe->add_option("--seed", o.seed, "top-level seed");
    pipe->add_option("--drivers", o.drivers, "number of drivers");
    pipe->add_option("--lambda", o.lambda, "forgetting factor");
    pipe->add_option("--horizons", o.horizons, "comma-separated horizons in seconds");
    pipe->add_option("--segment", o.segment, "START:END in seconds");
    pipe->add_option("--mode", o.mode, "lifted, relift or both");
    pipe->add_flag("--bench", with_bench, "also time retraining against online updates");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const RunConfig config = resolve(o);

        if (adv->parsed()) {
            const auto route = read_route(route_path);
            const auto result = compute_advisory(route, config);
            prepare_output_dir(out_dir);
            write_advisory(result, config, out_dir);
            std::printf("advisory: %zu nodes, %.1f s, cost %.6g, final SoC %.4f\n", result.profile.points.size(),
                        result.time.duration(), result.profile.total_cost(), result.profile.points.back().soc);
        } else if (sim->parsed()) {
            const auto advisory = read_time_advisory_csv(advisory_path);
            const auto roster = simulate_roster(advisory, config);
            prepare_output_dir(out_dir);
            write_roster(roster, out_dir);
            std::printf("simulate: wrote %zu trajectories to %s\n", roster.size(), out_dir.c_str());
        } else if (fitc->parsed()) {
            const auto result = fit_trajectories(read_trajectories(traj_paths), config);
            const auto report = fit_report_json(result, config);
            save_model(result.model, model_out);
            write_or_print(report_out, report);
        } else if (upd->parsed()) {
            const auto model = load_model(model_path);
            const auto traj = read_trajectory_csv(traj_path);
            const auto result = update_model(model, traj, config.segment, config.rls);
            save_model(result.model, model_out);
            write_or_print(log_out, tick_log_csv(result.ticks));
        } else if (ev->parsed()) {
            const auto model = load_model(model_path);
            const auto traj = read_trajectory_csv(traj_path);
            const auto reports = evaluate_model(model, traj, config, !offline_only);
            if (!csv_out.empty()) io::write_text_file_atomic(csv_out, horizon_reports_to_csv(reports));
            std::cout << horizon_reports_to_table(reports);
        } else if (bn->parsed()) {
            const auto model = load_model(model_path);
            const auto history = read_trajectories(history_paths);
            const auto fresh = read_trajectory_csv(traj_path);
            BenchOptions options;
            options.lambda = config.rls.lambda;
            options.cadence_s = config.rls.cadence_s;
            options.ridge = config.fit.ridge;
            options.repeats = repeats.value_or(config.bench_repeats);
            options.hardware_note = hardware_note.empty() ? config.hardware_note : hardware_note;
            const auto report = bench_update(history, fresh, model, config.horizons, options);
            if (!csv_out.empty()) io::write_text_file_atomic(csv_out, bench_report_to_csv(report));
            std::cout << bench_report_to_table(report);
        } else if (pipe->parsed()) {
            std::optional<fs::path> route_file;
            if (!route_path.empty()) route_file = route_path;
            else route_file = config.route;
            if (!route_file) throw ValidationError("no route given (--route or the config's \"route\")");
            const auto route = read_route(route_file->string());
            run_pipeline(config, route, out_dir, with_bench);
            std::printf("pipeline: outputs in %s\n", out_dir.c_str());
        }
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIo;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kValidation;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
    return kOk;
}
