#include "koopdrive/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "koopdrive/io.hpp"

namespace koopdrive {

using json = nlohmann::ordered_json;

namespace {

// Reads optional fields of one JSON object and complains about leftovers.
class ObjectReader {
public:
    ObjectReader(const json& object, std::string context) : object_(object), context_(std::move(context)) {
        if (!object_.is_object()) throw ValidationError(context_ + ": expected an object");
    }


    template <typename T>
    void read(const char* key, T& target) {
        seen_.insert(key);
        auto it = object_.find(key);
        if (it == object_.end() || it->is_null()) return;
        try {
            target = it->template get<T>();
        } catch (const json::exception&) {
            throw ValidationError(context_ + "." + key + ": wrong type");
        }
    }

    void read_optional(const char* key, std::optional<double>& target) {
        seen_.insert(key);
        auto it = object_.find(key);
        if (it == object_.end() || it->is_null()) return;
        if (!it->is_number()) throw ValidationError(context_ + "." + key + ": expected a number");
        target = it->get<double>();
    }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = object_.find(key);
        if (it == object_.end() || it->is_null()) return nullptr;
        return &*it;
    }

    std::string path(const char* key) const { return context_ + "." + key; }

    void finish() const {
        for (auto it = object_.begin(); it != object_.end(); ++it) {
            if (!seen_.count(it.key())) throw ValidationError(context_ + ": unknown key '" + it.key() + "'");
        }
    }

private:
    const json& object_;
    std::string context_;
    std::set<std::string> seen_;
};

void read_powertrain(const json& j, PowertrainParams& p) {
    ObjectReader r(j, "config.advisory.powertrain");
    r.read("mass_kg", p.mass);
    r.read("a0_n", p.a0);
    r.read("a1_n_per_mps", p.a1);
    r.read("a2_n_per_mps2", p.a2);
    r.read("battery_energy_j", p.battery_energy);
    r.read("discharge_efficiency", p.discharge_efficiency);
    r.read("regen_efficiency", p.regen_efficiency);
    r.read("fuel_lhv_j_per_kg", p.fuel_lhv);
    r.read("equivalence_factor", p.equivalence_factor);
    r.read("engine_idle_fuel_kg_per_s", p.engine_idle_fuel);
    r.read("engine_efficiency", p.engine_efficiency);
    r.read("engine_share", p.engine_share);
    r.read("engine_max_power_w", p.engine_max_power);
    r.finish();
}

void read_advisory(const json& j, RunConfig& c) {
    ObjectReader r(j, "config.advisory");
    r.read("gamma", c.dp.gamma);
    r.read("velocity_grid_mps", c.dp.velocity_grid);
    r.read("velocity_step_mps", c.dp.velocity_step);
    r.read("soc_min", c.dp.soc_min);
    r.read("soc_max", c.dp.soc_max);
    r.read("soc_levels", c.dp.soc_levels);
    r.read("a_min_mps2", c.dp.a_min);
    r.read("a_max_mps2", c.dp.a_max);
    r.read("initial_soc", c.dp.initial_soc);
    r.read("terminal_soc_floor", c.dp.terminal_soc_floor);
    r.read_optional("fuel_norm_kg_per_s", c.dp.fuel_norm);
    r.read("stop_dwell_s", c.stop_dwell_s);
    if (auto* p = r.child("powertrain")) read_powertrain(*p, c.dp.powertrain);
    r.finish();
}

void read_vehicle(const json& j, VehicleParams& v) {
    ObjectReader r(j, "config.vehicle");
    r.read("mass_kg", v.mass);
    r.read("a0_n", v.a0);
    r.read("a1_n_per_mps", v.a1);
    r.read("a2_n_per_mps2", v.a2);
    r.read("f_min_n", v.f_min);
    r.read("f_max_n", v.f_max);
    r.finish();
}

void read_driver_base(const json& j, DriverParams& d) {
    ObjectReader r(j, "config.drivers.base");
    r.read("kp", d.kp);
    r.read("ki", d.ki);
    r.read("reaction_delay_s", d.reaction_delay);
    r.read("force_rate_limit_n_per_s", d.force_rate_limit);
    r.read("noise_std_n", d.noise_std);
    r.read("base_compliance", d.base_compliance);
    r.read("own_speed_time_constant_s", d.own_speed_time_constant);
    r.read_optional("initial_force_n", d.initial_force);
    r.finish();
}

void read_drivers(const json& j, RunConfig& c) {
    ObjectReader r(j, "config.drivers");
    r.read("count", c.drivers);
    r.read("spread", c.driver_spread);
    if (auto* b = r.child("base")) read_driver_base(*b, c.driver_base);
    if (auto* list = r.child("distractions")) {
        if (!list->is_array()) throw ValidationError(r.path("distractions") + ": expected an array");
        c.distractions.clear();
        for (std::size_t i = 0; i < list->size(); ++i) {
            ObjectReader dr((*list)[i], r.path("distractions") + "[" + std::to_string(i) + "]");
            DistractionSpec spec;
            dr.read("driver", spec.driver);
            dr.read("t_start_s", spec.window.t_start);
            dr.read("t_end_s", spec.window.t_end);
            dr.read("compliance", spec.window.compliance);
            dr.read("noise_multiplier", spec.window.noise_multiplier);
            dr.finish();
            c.distractions.push_back(spec);
        }
    }
    r.finish();
}

void read_fit(const json& j, RunConfig& c) {
    ObjectReader r(j, "config.fit");
    r.read("max_degree", c.fit.max_degree);
    r.read("ridge", c.fit.ridge);
    r.read("auto_scale", c.fit.auto_scale);
    std::vector<double> split;
    r.read("split", split);
    if (!split.empty()) {
        if (split.size() != 3) throw ValidationError("config.fit.split: expected [train, val, test]");
        c.fit.split = {split[0], split[1], split[2]};
    }
    r.finish();
}

void read_rls(const json& j, RunConfig& c) {
    ObjectReader r(j, "config.rls");
    r.read("lambda", c.rls.lambda);
    r.read("cadence_s", c.rls.cadence_s);
    r.finish();
}

void read_eval(const json& j, RunConfig& c) {
    ObjectReader r(j, "config.eval");
    r.read("driver", c.eval_driver);
    r.read("horizons_s", c.horizons);
    std::vector<double> segment;
    r.read("segment_s", segment);
    if (!segment.empty()) {
        if (segment.size() != 2) throw ValidationError("config.eval.segment_s: expected [start, end]");
        c.segment = {segment[0], segment[1]};
    }
    std::string mode;
    r.read("mode", mode);
    if (!mode.empty()) {
        if (mode == "both") {
            c.modes = {RolloutMode::Lifted, RolloutMode::Relift};
        } else {
            c.modes = {parse_rollout_mode(mode)};
        }
    }
    r.finish();
}

void read_bench(const json& j, RunConfig& c) {
    ObjectReader r(j, "config.bench");
    r.read("repeats", c.bench_repeats);
    r.read("history_copies", c.bench_history_copies);
    r.read("hardware_note", c.hardware_note);
    r.finish();
}

json number_or_null(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void RunConfig::validate() const {
    if (!(sample_period > 0.0) || !std::isfinite(sample_period)) {
        throw ValidationError("sample period must be positive");
    }
    dp.validate();
    if (!(stop_dwell_s >= 0.0) || !std::isfinite(stop_dwell_s)) throw ValidationError("stop dwell must be >= 0");
    vehicle.validate();
    if (drivers < 1) throw ValidationError("driver count must be at least 1");
    if (!(driver_spread >= 0.0 && driver_spread < 1.0)) throw ValidationError("driver spread must lie in [0, 1)");
    driver_base.validate();
    for (const auto& d : distractions) {
        if (d.driver < 1 || d.driver > drivers) {
            throw ValidationError("distraction refers to driver " + std::to_string(d.driver) + " but the roster has " +
                                  std::to_string(drivers));
        }
        if (!(d.window.t_start < d.window.t_end)) throw ValidationError("distraction window needs t_start < t_end");
        if (!(d.window.compliance >= 0.0 && d.window.compliance <= 1.0)) {
            throw ValidationError("distraction compliance must lie in [0, 1]");
        }
        if (!(d.window.noise_multiplier >= 0.0)) throw ValidationError("distraction noise multiplier must be >= 0");
    }
    fit.validate();
    if (!(rls.lambda > 0.0 && rls.lambda <= 1.0)) throw ValidationError("lambda must lie in (0, 1]");
    if (!(rls.cadence_s > 0.0) || !std::isfinite(rls.cadence_s)) throw ValidationError("cadence must be positive");
    if (samples_per_cadence(rls.cadence_s, sample_period) == 0) {
        throw ValidationError("cadence shorter than one sample");
    }
    if (eval_driver < 1 || eval_driver > drivers) {
        throw ValidationError("evaluation driver " + std::to_string(eval_driver) + " is not in the roster");
    }
    if (horizons.empty()) throw ValidationError("at least one horizon is required");
    for (double h : horizons) {
        if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("horizons must be positive");
    }
    if (!(segment.t_start >= 0.0 && segment.t_start < segment.t_end)) {
        throw ValidationError("evaluation segment needs 0 <= start < end");
    }
    if (modes.empty()) throw ValidationError("at least one rollout mode is required");
    if (bench_repeats < 1) throw ValidationError("bench repeats must be at least 1");
    if (bench_history_copies < 1) throw ValidationError("bench history copies must be at least 1");
}

void RunConfig::validate_horizons() const {
    for (double h : horizons) {
        if (h > segment.t_end - segment.t_start) {
            throw ValidationError("horizon " + io::format_double(h) + " s is longer than the evaluation segment");
        }
    }
}

RunConfig run_config_from_json(std::string_view text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    RunConfig c;
    ObjectReader r(root, "config");
    std::string route;
    r.read("route", route);
    if (!route.empty()) {
        std::filesystem::path p(route);
        c.route = p.is_absolute() ? p : base_dir / p;
    }
    r.read("seed", c.seed);
    r.read("sample_period_s", c.sample_period);
    if (auto* j = r.child("advisory")) read_advisory(*j, c);
    if (auto* j = r.child("vehicle")) read_vehicle(*j, c.vehicle);
    if (auto* j = r.child("drivers")) read_drivers(*j, c);
    if (auto* j = r.child("fit")) read_fit(*j, c);
    if (auto* j = r.child("rls")) read_rls(*j, c);
    if (auto* j = r.child("eval")) read_eval(*j, c);
    if (auto* j = r.child("bench")) read_bench(*j, c);
    r.finish();
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const auto text = io::read_text_file(path);
    try {
        return run_config_from_json(text, path.parent_path());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::string run_config_to_json(const RunConfig& c) {
    json j;
    if (c.route) j["route"] = c.route->string();
    j["seed"] = c.seed;
    j["sample_period_s"] = c.sample_period;
    const auto& pt = c.dp.powertrain;
    j["advisory"] = {{"gamma", c.dp.gamma},
                     {"velocity_grid_mps", c.dp.velocity_grid},
                     {"velocity_step_mps", c.dp.velocity_step},
                     {"soc_min", c.dp.soc_min},
                     {"soc_max", c.dp.soc_max},
                     {"soc_levels", c.dp.soc_levels},
                     {"a_min_mps2", c.dp.a_min},
                     {"a_max_mps2", c.dp.a_max},
                     {"initial_soc", c.dp.initial_soc},
                     {"terminal_soc_floor", c.dp.terminal_soc_floor},
                     {"fuel_norm_kg_per_s", number_or_null(c.dp.fuel_norm)},
                     {"stop_dwell_s", c.stop_dwell_s},
                     {"powertrain",
                      {{"mass_kg", pt.mass},
                       {"a0_n", pt.a0},
                       {"a1_n_per_mps", pt.a1},
                       {"a2_n_per_mps2", pt.a2},
                       {"battery_energy_j", pt.battery_energy},
                       {"discharge_efficiency", pt.discharge_efficiency},
                       {"regen_efficiency", pt.regen_efficiency},
                       {"fuel_lhv_j_per_kg", pt.fuel_lhv},
                       {"equivalence_factor", pt.equivalence_factor},
                       {"engine_idle_fuel_kg_per_s", pt.engine_idle_fuel},
                       {"engine_efficiency", pt.engine_efficiency},
                       {"engine_share", pt.engine_share},
                       {"engine_max_power_w", pt.engine_max_power}}}};
    j["vehicle"] = {{"mass_kg", c.vehicle.mass},     {"a0_n", c.vehicle.a0},       {"a1_n_per_mps", c.vehicle.a1},
                    {"a2_n_per_mps2", c.vehicle.a2}, {"f_min_n", c.vehicle.f_min}, {"f_max_n", c.vehicle.f_max}};
    const auto& d = c.driver_base;
    json distractions = json::array();
    for (const auto& s : c.distractions) {
        distractions.push_back({{"driver", s.driver},
                                {"t_start_s", s.window.t_start},
                                {"t_end_s", s.window.t_end},
                                {"compliance", s.window.compliance},
                                {"noise_multiplier", s.window.noise_multiplier}});
    }
    j["drivers"] = {{"count", c.drivers},
                    {"spread", c.driver_spread},
                    {"base",
                     {{"kp", d.kp},
                      {"ki", d.ki},
                      {"reaction_delay_s", d.reaction_delay},
                      {"force_rate_limit_n_per_s", d.force_rate_limit},
                      {"noise_std_n", d.noise_std},
                      {"base_compliance", d.base_compliance},
                      {"own_speed_time_constant_s", d.own_speed_time_constant},
                      {"initial_force_n", number_or_null(d.initial_force)}}},
                    {"distractions", distractions}};
    j["fit"] = {{"max_degree", c.fit.max_degree},
                {"ridge", c.fit.ridge},
                {"auto_scale", c.fit.auto_scale},
                {"split", {c.fit.split.train, c.fit.split.val, c.fit.split.test}}};
    j["rls"] = {{"lambda", c.rls.lambda}, {"cadence_s", c.rls.cadence_s}};
    std::string mode = c.modes.size() == 2 ? "both" : std::string(to_string(c.modes.front()));
    j["eval"] = {{"driver", c.eval_driver},
                 {"horizons_s", c.horizons},
                 {"segment_s", {c.segment.t_start, c.segment.t_end}},
                 {"mode", mode}};
    j["bench"] = {{"repeats", c.bench_repeats},
                  {"history_copies", c.bench_history_copies},
                  {"hardware_note", c.hardware_note}};
    return j.dump(2) + "\n";
}

std::uint64_t driver_seed(std::uint64_t seed, int index) { return seed + static_cast<std::uint64_t>(index); }

DriverParams roster_driver(const RunConfig& config, int index) {
    auto driver = derive_driver(config.driver_base, driver_seed(config.seed, index), config.driver_spread);
    for (const auto& d : config.distractions) {
        if (d.driver != index) continue;
        driver = make_distracted_segment(driver, d.window.t_start, d.window.t_end, d.window.compliance,
                                         d.window.noise_multiplier);
    }
    return driver;
}

std::string driver_file_name(int index) {
    char name[32];
    std::snprintf(name, sizeof(name), "driver_%02d.csv", index);
    return name;
}

void prepare_output_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    if (std::filesystem::exists(dir, ec)) {
        if (!std::filesystem::is_directory(dir, ec)) throw IoError("output path is not a directory: " + dir.string());
        return;
    }
    if (!std::filesystem::create_directories(dir, ec) || ec) {
        throw IoError("cannot create output directory: " + dir.string());
    }
}

AdvisoryResult compute_advisory(const RouteSpec& route, const RunConfig& config) {
    AdvisoryResult result;
    result.profile = solve_eco_dp(route, config.dp);
    result.time = resample_to_time(result.profile, config.sample_period, config.stop_dwell_s);
    return result;
}

void write_advisory(const AdvisoryResult& result, const RunConfig& config, const std::filesystem::path& out_dir) {
    const auto& pts = result.profile.points;
    std::size_t stops = 0;
    for (std::size_t s = 1; s < pts.size(); ++s) stops += pts[s].stop ? 1 : 0;
    json meta;
    meta["gamma"] = result.profile.gamma;
    meta["ds_m"] = result.profile.ds;
    meta["steps"] = pts.empty() ? 0 : pts.size() - 1;
    meta["route_length_m"] = pts.empty() ? 0.0 : pts.back().position;
    meta["total_cost"] = result.profile.total_cost();
    meta["travel_time_s"] = result.profile.travel_time();
    meta["stop_dwell_s"] = config.stop_dwell_s;
    meta["stops"] = stops;
    meta["initial_soc"] = pts.empty() ? 0.0 : pts.front().soc;
    meta["final_soc"] = pts.empty() ? 0.0 : pts.back().soc;
    meta["terminal_soc_floor"] = config.dp.terminal_soc_floor;
    meta["sample_period_s"] = result.time.sample_period;
    meta["samples"] = result.time.v_ref.size();
    meta["duration_s"] = result.time.duration();
    io::write_text_file_atomic(out_dir / "advisory_distance.csv", profile_to_csv(result.profile));
    io::write_text_file_atomic(out_dir / "advisory_time.csv", time_advisory_to_csv(result.time));
    io::write_text_file_atomic(out_dir / "advisory_meta.json", meta.dump(2) + "\n");
}

std::vector<Trajectory> simulate_roster(const TimeAdvisory& advisory, const RunConfig& config) {
    if (config.drivers < 1) throw ValidationError("driver count must be at least 1");
    if (!same_sample_period(advisory.sample_period, config.sample_period)) {
        throw ValidationError("advisory sample period " + io::format_double(advisory.sample_period) +
                              " s does not match the configured " + io::format_double(config.sample_period) + " s");
    }
    for (const auto& d : config.distractions) {
        if (d.window.t_start > advisory.duration()) {
            throw ValidationError("distraction for driver " + std::to_string(d.driver) + " starts after the advisory ends");
        }
    }
    std::vector<Trajectory> out;
    out.reserve(static_cast<std::size_t>(config.drivers));
    for (int i = 1; i <= config.drivers; ++i) {
        out.push_back(simulate_driver(config.vehicle, roster_driver(config, i), advisory.v_ref, advisory.sample_period,
                                      advisory.duration()));
    }
    return out;
}

void write_roster(const std::vector<Trajectory>& trajectories, const std::filesystem::path& out_dir) {
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        write_trajectory_csv(out_dir / driver_file_name(static_cast<int>(i) + 1), trajectories[i]);
    }
}

namespace {

std::size_t count_pairs(const std::vector<Trajectory>& trajectories) {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.size() - 1;
    return n;
}

// One-step prediction error of the projected state on held-out pairs.
void one_step_rmse(const KoopmanModel& model, const std::vector<Trajectory>& data, double& speed, double& force) {
    double sv = 0.0, sf = 0.0;
    std::size_t n = 0;
    for (const auto& traj : data) {
        for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
            const auto& s = traj.samples[k];
            const auto z = step(model, model.basis.lift(s.state()), s.v_ref);
            const auto x = model.basis.project(z);
            const double dv = x.v - traj.samples[k + 1].v;
            const double df = x.f_tr - traj.samples[k + 1].f_tr;
            sv += dv * dv;
            sf += df * df;
            ++n;
        }
    }
    speed = n ? std::sqrt(sv / static_cast<double>(n)) : 0.0;
    force = n ? std::sqrt(sf / static_cast<double>(n)) : 0.0;
}

}  // namespace

FitResult fit_trajectories(const std::vector<Trajectory>& trajectories, const RunConfig& config) {
    if (trajectories.empty()) throw ValidationError("fit needs at least one trajectory");
    config.fit.validate();
    for (const auto& t : trajectories) t.validate();
    const auto split = split_dataset(trajectories, config.fit.split);
    if (split.train.empty()) throw ValidationError("training split is empty");

    auto basis = LiftedBasis::enumerate(2, config.fit.max_degree);
    if (config.fit.auto_scale) basis = basis.with_scaler(fit_max_abs_scaler(split.train));

    const auto matrices = build_matrices(split.train, basis);
    FitDiagnostics diagnostics;
    auto model = fit(matrices, config.fit, &diagnostics);
    FitResult result{std::move(model), diagnostics};
    result.model.provenance += " split=" + io::format_double(config.fit.split.train) + "/" +
                               io::format_double(config.fit.split.val) + "/" + io::format_double(config.fit.split.test);
    result.train_pairs = count_pairs(split.train);
    result.val_pairs = count_pairs(split.val);
    result.test_pairs = count_pairs(split.test);
    one_step_rmse(result.model, split.val, result.val_rmse_speed, result.val_rmse_force);
    return result;
}

std::string fit_report_json(const FitResult& r, const RunConfig& config) {
    json j;
    j["lifted_dim"] = r.model.lifted_dim();
    j["state_dim"] = r.model.basis.state_dim();
    j["input_dim"] = r.model.input_dim();
    j["max_degree"] = r.model.basis.max_degree();
    j["auto_scale"] = config.fit.auto_scale;
    j["split"] = {{"train", config.fit.split.train}, {"val", config.fit.split.val}, {"test", config.fit.split.test}};
    j["pairs"] = {{"train", r.train_pairs}, {"val", r.val_pairs}, {"test", r.test_pairs}};
    j["ridge"] = r.diagnostics.ridge;
    j["numerical_rank"] = r.diagnostics.numerical_rank;
    j["regressors"] = r.diagnostics.regressors;
    j["condition_number"] = r.diagnostics.condition_number;
    j["residual_fro"] = r.diagnostics.residual_fro;
    j["val_one_step_rmse_speed_mps"] = r.val_rmse_speed;
    j["val_one_step_rmse_force_n"] = r.val_rmse_force;
    return j.dump(2) + "\n";
}

UpdateResult update_model(const KoopmanModel& model, const Trajectory& trajectory, const TimeWindow& segment,
                          const OnlineSettings& settings) {
    model.validate();
    trajectory.validate();
    if (!same_sample_period(model.sample_period, trajectory.sample_period)) {
        throw ValidationError("model and trajectory sample periods differ");
    }
    if (!(segment.t_start < segment.t_end)) throw ValidationError("update segment needs t_start < t_end");
    const auto first = trajectory.index_at_or_after(segment.t_start);
    if (first >= trajectory.size() || trajectory.samples.back().t < segment.t_end - 1e-6) {
        throw ValidationError("update segment extends beyond the trajectory");
    }
    OnlineUpdater updater(init_rls(model, settings.lambda), model.basis,
                          samples_per_cadence(settings.cadence_s, trajectory.sample_period));
    std::vector<TickRecord> ticks;
    Eigen::MatrixXd previous = updater.state().theta;
    for (std::size_t k = first; k < trajectory.size() && trajectory.samples[k].t <= segment.t_end + 1e-6; ++k) {
        if (!updater.push(trajectory.samples[k])) continue;
        const auto& st = updater.state();
        TickRecord rec;
        rec.tick = updater.ticks();
        rec.t_end = trajectory.samples[k].t;
        rec.updates = updater.samples_per_tick();
        rec.theta_change = (st.theta - previous).norm();
        rec.p_trace = st.P.trace();
        previous = st.theta;
        ticks.push_back(rec);
    }
    UpdateResult result{updater.state().snapshot(model), std::move(ticks)};
    result.model.provenance = model.provenance + "; rls: lambda=" + io::format_double(settings.lambda) +
                              " cadence_s=" + io::format_double(settings.cadence_s) +
                              " ticks=" + std::to_string(updater.ticks()) +
                              " segment=" + io::format_double(segment.t_start) + ":" + io::format_double(segment.t_end);
    return result;
}

std::string tick_log_csv(const std::vector<TickRecord>& ticks) {
    std::string out = "tick,t_end_s,updates,theta_change_fro,p_trace\n";
    for (const auto& t : ticks) {
        out += std::to_string(t.tick) + ',' + io::format_double(t.t_end) + ',' + std::to_string(t.updates) + ',' +
               io::format_double(t.theta_change) + ',' + io::format_double(t.p_trace) + '\n';
    }
    return out;
}

std::vector<HorizonReport> evaluate_model(const KoopmanModel& model, const Trajectory& trajectory,
                                          const RunConfig& config, bool online) {
    std::vector<HorizonReport> all;
    for (auto mode : config.modes) {
        auto reports = evaluate_horizons(trajectory, model, config.horizons, config.segment,
                                         online ? std::optional<OnlineSettings>(config.rls) : std::nullopt, mode);
        all.insert(all.end(), reports.begin(), reports.end());
    }
    return all;
}

void run_pipeline(const RunConfig& config, const RouteSpec& route, const std::filesystem::path& out_dir,
                  bool with_bench) {
    config.validate();
    config.validate_horizons();
    route.validate();
    prepare_output_dir(out_dir);

    // Everything is computed before the first file is written.
    const auto advisory = compute_advisory(route, config);
    if (advisory.time.duration() < config.segment.t_end) {
        throw ValidationError("advisory lasts " + io::format_double(advisory.time.duration()) +
                              " s, shorter than the evaluation segment end");
    }
    const auto roster = simulate_roster(advisory.time, config);
    const auto fitted = fit_trajectories(roster, config);
    const auto& eval_traj = roster[static_cast<std::size_t>(config.eval_driver - 1)];
    const auto reports = evaluate_model(fitted.model, eval_traj, config, true);
    const auto update = update_model(fitted.model, eval_traj, config.segment, config.rls);

    std::optional<BenchReport> bench;
    if (with_bench) {
        std::vector<Trajectory> history;
        for (int c = 0; c < config.bench_history_copies; ++c) history.insert(history.end(), roster.begin(), roster.end());
        BenchOptions options;
        options.lambda = config.rls.lambda;
        options.cadence_s = config.rls.cadence_s;
        options.ridge = config.fit.ridge;
        options.repeats = config.bench_repeats;
        options.hardware_note = config.hardware_note;
        bench = bench_update(history, eval_traj, fitted.model, config.horizons, options);
    }

    write_advisory(advisory, config, out_dir);
    write_roster(roster, out_dir);
    save_model(fitted.model, out_dir / "model.json");
    io::write_text_file_atomic(out_dir / "fit_report.json", fit_report_json(fitted, config));
    save_model(update.model, out_dir / "model_online.json");
    io::write_text_file_atomic(out_dir / "update_ticks.csv", tick_log_csv(update.ticks));
    io::write_text_file_atomic(out_dir / "eval_report.csv", horizon_reports_to_csv(reports));
    io::write_text_file_atomic(out_dir / "eval_report.txt", horizon_reports_to_table(reports));
    if (bench) {
        io::write_text_file_atomic(out_dir / "bench_report.csv", bench_report_to_csv(*bench));
        io::write_text_file_atomic(out_dir / "bench_report.txt", bench_report_to_table(*bench));
    }
    io::write_text_file_atomic(out_dir / "run_config.json", run_config_to_json(config));
}

}  // namespace koopdrive
