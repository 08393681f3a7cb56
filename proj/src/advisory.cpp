#include "koopdrive/advisory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "koopdrive/io.hpp"

namespace koopdrive {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSpeedTol = 1e-9;
constexpr double kSnapTol = 1e-9;
// Cost assigned to states that break the SoC bounds or the terminal floor.
constexpr double kSocPenalty = 1e12;

}  // namespace

// Route ------------------------------------------------------------------

void RouteSpec::validate() const {
    if (!std::isfinite(ds) || !(ds > 0.0)) throw ValidationError("route: distance step must be positive");
    if (nodes.size() < 2) throw ValidationError("route: needs at least 2 nodes");
    for (std::size_t s = 0; s < nodes.size(); ++s) {
        const auto& n = nodes[s];
        const std::string where = "route node " + std::to_string(s);
        if (!std::isfinite(n.position) || !std::isfinite(n.v_min) || !std::isfinite(n.v_max) || !std::isfinite(n.grade)) {
            throw ValidationError(where + ": non-finite value");
        }
        if (!(0.0 <= n.v_min && n.v_min < n.v_max)) throw ValidationError(where + ": need 0 <= v_min < v_max");
        const double expected = ds * static_cast<double>(s);
        if (std::abs(n.position - expected) > 1e-6 * std::max(1.0, expected)) {
            throw ValidationError(where + ": position " + io::format_double(n.position) +
                                  " is not on the distance grid (expected " + io::format_double(expected) + ")");
        }
    }
}

RouteSpec route_from_csv(std::string_view text, std::string_view context) {
    auto table = io::parse_numeric_csv(text, context);
    if (table.header != io::split(kRouteCsvHeader, ',')) {
        throw ValidationError(std::string(context) + ": route header must be '" + std::string(kRouteCsvHeader) + "'");
    }
    RouteSpec route;
    for (const auto& r : table.rows) {
        if (r[3] != 0.0 && r[3] != 1.0) throw ValidationError(std::string(context) + ": stop flag must be 0 or 1");
        route.nodes.push_back({r[0], r[1], r[2], r[3] == 1.0, r[4]});
    }
    if (route.nodes.size() < 2) throw ValidationError(std::string(context) + ": route needs at least 2 nodes");
    route.ds = route.nodes[1].position - route.nodes[0].position;
    try {
        route.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(context) + ": " + e.what());
    }
    return route;
}

RouteSpec read_route_csv(const std::filesystem::path& path) {
    return route_from_csv(io::read_text_file(path), path.string());
}

std::string route_to_csv(const RouteSpec& route) {
    std::string out(kRouteCsvHeader);
    out += '\n';
    for (const auto& n : route.nodes) {
        out += io::format_double(n.position) + ',' + io::format_double(n.v_min) + ',' + io::format_double(n.v_max) +
               ',' + (n.stop ? "1" : "0") + ',' + io::format_double(n.grade) + '\n';
    }
    return out;
}

// Surrogate powertrain ----------------------------------------------------

double PowertrainParams::max_fuel_rate() const {
    return engine_idle_fuel + engine_max_power / (engine_efficiency * fuel_lhv);
}

void PowertrainParams::validate() const {
    for (double x : {mass, a0, a1, a2, gravity, battery_energy, discharge_efficiency, regen_efficiency, fuel_lhv,
                     equivalence_factor, engine_idle_fuel, engine_efficiency, engine_share, engine_max_power}) {
        if (!std::isfinite(x) || x < 0.0) throw ValidationError("powertrain parameters must be finite and nonnegative");
    }
    if (!(mass > 0.0) || !(battery_energy > 0.0) || !(fuel_lhv > 0.0) || !(engine_efficiency > 0.0)) {
        throw ValidationError("powertrain mass, battery energy, LHV and engine efficiency must be positive");
    }
    if (discharge_efficiency <= 0.0 || discharge_efficiency > 1.0 || regen_efficiency > 1.0) {
        throw ValidationError("powertrain efficiencies must lie in (0, 1]");
    }
    if (!(engine_share > 0.0 && engine_share < 1.0)) throw ValidationError("engine share must lie in (0, 1)");
}

PowertrainOutput surrogate_powertrain(const PowertrainParams& p, double v, double a, bool engine_on, double grade) {
    if (!std::isfinite(v) || !std::isfinite(a) || !std::isfinite(grade)) {
        throw ValidationError("surrogate powertrain: non-finite input");
    }
    if (!(v > 0.0)) throw ValidationError("surrogate powertrain: speed must be positive");

    PowertrainOutput out;
    const double force = p.mass * a + (p.a0 + p.a1 * v + p.a2 * v * v) + p.mass * p.gravity * grade;
    out.power = force * v;

    // Wheel power left for the electric path.
    double electric = out.power;
    double engine_power = 0.0;
    if (engine_on) {
        if (out.power > 0.0) {
            engine_power = std::min(p.engine_share * out.power, p.engine_max_power);
            electric = out.power - engine_power;
        } else {
            // Engine drag takes its share of the braking power.
            electric = (1.0 - p.engine_share) * out.power;
        }
        out.fuel_rate = p.engine_idle_fuel + engine_power / (p.engine_efficiency * p.fuel_lhv);
    }
    out.battery_power = electric > 0.0 ? electric / p.discharge_efficiency : electric * p.regen_efficiency;
    out.equivalent_fuel_rate = out.fuel_rate + p.equivalence_factor * out.battery_power / p.fuel_lhv;
    out.dsoc_ds = -out.battery_power / (p.battery_energy * v);
    return out;
}

// Eco-driving DP ----------------------------------------------------------

void EcoDpConfig::validate() const {
    if (!std::isfinite(gamma) || gamma < 0.0 || gamma > 1.0) throw ValidationError("gamma must lie in [0, 1]");
    if (velocity_grid.empty() && (!std::isfinite(velocity_step) || !(velocity_step > 0.0))) {
        throw ValidationError("velocity grid step must be positive");
    }
    for (std::size_t i = 0; i < velocity_grid.size(); ++i) {
        if (!std::isfinite(velocity_grid[i]) || velocity_grid[i] < 0.0 ||
            (i > 0 && !(velocity_grid[i] > velocity_grid[i - 1]))) {
            throw ValidationError("velocity grid must be nonnegative and strictly increasing");
        }
    }
    if (soc_levels < 2) throw ValidationError("SoC grid needs at least 2 levels");
    if (!(0.0 <= soc_min && soc_min < soc_max && soc_max <= 1.0)) {
        throw ValidationError("SoC bounds must satisfy 0 <= soc_min < soc_max <= 1");
    }
    if (!(a_min < 0.0 && 0.0 < a_max) || !std::isfinite(a_min) || !std::isfinite(a_max)) {
        throw ValidationError("acceleration bounds must satisfy a_min < 0 < a_max");
    }
    if (!(initial_soc >= soc_min && initial_soc <= soc_max)) throw ValidationError("initial SoC outside SoC bounds");
    if (!(terminal_soc_floor >= soc_min && terminal_soc_floor < soc_max)) {
        throw ValidationError("terminal SoC floor outside SoC bounds");
    }
    if (fuel_norm && (!std::isfinite(*fuel_norm) || !(*fuel_norm > 0.0))) {
        throw ValidationError("fuel normalization must be positive");
    }
    powertrain.validate();
}

std::vector<double> velocity_grid_for(const RouteSpec& route, const EcoDpConfig& config) {
    if (!config.velocity_grid.empty()) return config.velocity_grid;
    double top = 0.0;
    for (const auto& n : route.nodes) top = std::max(top, n.v_max);
    std::vector<double> grid;
    for (long i = 0;; ++i) {
        const double v = static_cast<double>(i) * config.velocity_step;
        if (v > top + kSpeedTol) break;
        grid.push_back(v);
    }
    return grid;
}

StageModel surrogate_stage_model(const RouteSpec& route, const EcoDpConfig& config) {
    const double norm = config.effective_fuel_norm();
    const double gamma = config.gamma;
    const double ds = route.ds;
    std::vector<double> grades;
    for (const auto& n : route.nodes) grades.push_back(n.grade);
    PowertrainParams params = config.powertrain;
    return [=](std::size_t step, double v, double v_next, bool engine_on) {
        const double v_mean = 0.5 * (v + v_next);
        const double dt = ds / v_mean;
        const double accel = (v_next * v_next - v * v) / (2.0 * ds);
        const auto pt = surrogate_powertrain(params, v_mean, accel, engine_on, grades[step]);
        StageOutcome out;
        out.travel_time = dt;
        out.equivalent_fuel_rate = pt.equivalent_fuel_rate;
        out.cost = (gamma * pt.equivalent_fuel_rate / norm + (1.0 - gamma)) * dt;
        out.soc_delta = pt.dsoc_ds * ds;
        return out;
    };
}

namespace {

struct Candidate {
    double value = kInf;
    double abs_accel = kInf;
    bool engine_on = true;
    std::size_t next = 0;
    double stage_cost = 0.0;
    double soc_next = 0.0;
    StageOutcome outcome;

    // Lower value, then lower |a|, then engine off.
    bool better_than(const Candidate& other) const {
        if (value != other.value) return value < other.value;
        if (abs_accel != other.abs_accel) return abs_accel < other.abs_accel;
        return !engine_on && other.engine_on;
    }
};

class SocAxis {
public:
    SocAxis(double lo, double hi, int levels) : lo_(lo), hi_(hi), levels_(levels), step_((hi - lo) / (levels - 1)) {}

    double at(int j) const { return j == levels_ - 1 ? hi_ : lo_ + step_ * j; }
    int levels() const { return levels_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }

    // Interpolated value; infinite if either bracketing node is.
    double interpolate(const double* row, double soc) const {
        const double p = (soc - lo_) / step_;
        if (p < -kSnapTol || p > (levels_ - 1) + kSnapTol) return kInf;
        const double r = std::round(p);
        if (std::abs(p - r) <= kSnapTol) return row[static_cast<int>(r)];
        const int j0 = static_cast<int>(std::floor(p));
        const double w = p - j0;
        const double a = row[j0];
        const double b = row[j0 + 1];
        if (!std::isfinite(a) || !std::isfinite(b)) return kInf;
        return (1.0 - w) * a + w * b;
    }

private:
    double lo_, hi_;
    int levels_;
    double step_;
};

// Admissible velocity-grid indices per node.
std::vector<std::vector<std::size_t>> admissible_speeds(const RouteSpec& route, const std::vector<double>& grid) {
    std::vector<std::vector<std::size_t>> out(route.nodes.size());
    for (std::size_t s = 0; s < route.nodes.size(); ++s) {
        const auto& node = route.nodes[s];
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (grid[i] >= node.v_min - kSpeedTol && grid[i] <= node.v_max + kSpeedTol) {
                out[s].push_back(i);
                // Start node (v = v_min there) and stops take the lowest admissible speed only.
                if (s == 0 || node.stop) break;
            }
        }
        if (out[s].empty()) {
            throw InfeasibleRouteError(s, "route infeasible: no velocity grid point within limits at node " +
                                              std::to_string(s));
        }
    }
    return out;
}

bool transition_allowed(double v, double v_next, double ds, double a_min, double a_max) {
    if (v <= 0.0 && v_next <= 0.0) return false;
    const double accel = (v_next * v_next - v * v) / (2.0 * ds);
    return accel >= a_min - 1e-12 && accel <= a_max + 1e-12;
}

}  // namespace

AdvisoryProfile solve_eco_dp(const RouteSpec& route, const EcoDpConfig& config) {
    return solve_eco_dp(route, config, surrogate_stage_model(route, config));
}

AdvisoryProfile solve_eco_dp(const RouteSpec& route, const EcoDpConfig& config, const StageModel& stage) {
    route.validate();
    config.validate();
    const auto grid = velocity_grid_for(route, config);
    if (grid.empty()) throw ValidationError("velocity grid is empty");
    const auto allowed = admissible_speeds(route, grid);
    const std::size_t steps = route.steps();
    const std::size_t nv = grid.size();
    const SocAxis soc(config.soc_min, config.soc_max, config.soc_levels);
    const int ns = soc.levels();

    // Stage outcomes per step: [from][to][engine], only for allowed transitions.
    struct Edge {
        std::size_t from, to;
        bool engine_on;
        StageOutcome outcome;
        double abs_accel;
    };
    auto edges_for = [&](std::size_t s) {
        std::vector<Edge> edges;
        for (auto i : allowed[s])
            for (auto j : allowed[s + 1]) {
                if (!transition_allowed(grid[i], grid[j], route.ds, config.a_min, config.a_max)) continue;
                const double accel = (grid[j] * grid[j] - grid[i] * grid[i]) / (2.0 * route.ds);
                for (bool engine : {false, true}) {
                    edges.push_back({i, j, engine, stage(s, grid[i], grid[j], engine), std::abs(accel)});
                }
            }
        return edges;
    };

    // value[s][i * ns + j]. Infinite marks a speed node with no admissible
    // continuation. SoC violations cost kSocPenalty instead, so interpolating
    // next to a violating node raises the value without poisoning it.
    std::vector<std::vector<double>> value(steps + 1, std::vector<double>(nv * ns, kInf));
    for (auto i : allowed[steps])
        for (int j = 0; j < ns; ++j) value[steps][i * ns + j] = soc.at(j) > config.terminal_soc_floor ? 0.0 : kSocPenalty;

    auto next_soc = [&](double current, double delta) { return std::min(current + delta, config.soc_max); };
    // Value of arriving at node s + 1 with speed index `to` and SoC xi_next.
    auto future_value = [&](std::size_t s, std::size_t to, double xi_next) {
        if (value[s + 1][to * ns] == kInf) return kInf;
        if (xi_next < config.soc_min - kSnapTol) return kSocPenalty;
        if (s + 1 == steps) return xi_next > config.terminal_soc_floor ? 0.0 : kSocPenalty;
        return std::min(soc.interpolate(&value[s + 1][to * ns], xi_next), kSocPenalty);
    };

    for (std::size_t s = steps; s-- > 0;) {
        const auto edges = edges_for(s);
        auto& row = value[s];
        for (int j = 0; j < ns; ++j) {
            const double xi = soc.at(j);
            std::vector<Candidate> best(nv);
            for (const auto& e : edges) {
                const double future = future_value(s, e.to, next_soc(xi, e.outcome.soc_delta));
                if (!std::isfinite(future)) continue;
                Candidate c;
                c.value = std::min(e.outcome.cost + future, kSocPenalty);
                c.abs_accel = e.abs_accel;
                c.engine_on = e.engine_on;
                if (c.better_than(best[e.from])) best[e.from] = c;
            }
            for (std::size_t i = 0; i < nv; ++i) row[i * ns + j] = best[i].value;
        }
    }

    const std::size_t start = allowed[0].front();
    if (!std::isfinite(value[0][start * ns])) {
        // First node that no admissible speed sequence from the start reaches.
        std::vector<std::vector<bool>> fwd(steps + 1, std::vector<bool>(nv, false));
        fwd[0][start] = true;
        std::size_t blocking = steps;
        for (std::size_t s = 0; s < steps; ++s) {
            bool any = false;
            for (auto i : allowed[s])
                if (fwd[s][i])
                    for (auto j : allowed[s + 1])
                        if (transition_allowed(grid[i], grid[j], route.ds, config.a_min, config.a_max)) {
                            fwd[s + 1][j] = true;
                            any = true;
                        }
            if (!any) {
                blocking = s + 1;
                break;
            }
        }
        throw InfeasibleRouteError(blocking, "route infeasible: speed limits, stops and acceleration bounds leave "
                                             "no admissible speed at node " + std::to_string(blocking));
    }

    // Forward pass from the exact initial state.
    AdvisoryProfile profile;
    profile.ds = route.ds;
    profile.gamma = config.gamma;
    profile.points.resize(steps + 1);
    std::size_t vi = start;
    double xi = config.initial_soc;
    double cost = 0.0;
    double time = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
        Candidate best;
        for (auto j : allowed[s + 1]) {
            if (!transition_allowed(grid[vi], grid[j], route.ds, config.a_min, config.a_max)) continue;
            const double accel = (grid[j] * grid[j] - grid[vi] * grid[vi]) / (2.0 * route.ds);
            for (bool engine : {false, true}) {
                const auto outcome = stage(s, grid[vi], grid[j], engine);
                const double xi_next = next_soc(xi, outcome.soc_delta);
                if (xi_next < config.soc_min - kSnapTol) continue;
                const double future = future_value(s, j, xi_next);
                if (!std::isfinite(future)) continue;
                Candidate c;
                c.value = std::min(outcome.cost + future, kSocPenalty);
                c.abs_accel = std::abs(accel);
                c.engine_on = engine;
                c.next = j;
                c.soc_next = xi_next;
                c.outcome = outcome;
                if (c.better_than(best)) best = c;
            }
        }
        if (!std::isfinite(best.value) || best.value >= kSocPenalty) {
            throw InfeasibleRouteError(s, "route infeasible: SoC bounds or terminal SoC floor cannot be met (from step " +
                                              std::to_string(s) + ")");
        }
        auto& pt = profile.points[s];
        pt.position = route.nodes[s].position;
        pt.v_ref = grid[vi];
        pt.engine_on = best.engine_on;
        pt.soc = xi;
        pt.cumulative_cost = cost;
        pt.time = time;
        pt.accel = (grid[best.next] * grid[best.next] - grid[vi] * grid[vi]) / (2.0 * route.ds);
        pt.stop = route.nodes[s].stop;
        cost += best.outcome.cost;
        time += best.outcome.travel_time;
        vi = best.next;
        xi = std::clamp(best.soc_next, config.soc_min, config.soc_max);
    }
    auto& last = profile.points[steps];
    last.position = route.nodes[steps].position;
    last.v_ref = grid[vi];
    last.soc = xi;
    last.cumulative_cost = cost;
    last.time = time;
    last.stop = route.nodes[steps].stop;
    return profile;
}

std::string profile_to_csv(const AdvisoryProfile& profile) {
    std::string out = "position_m,v_ref_mps,engine_on,soc,cumulative_cost,time_s,accel_mps2\n";
    for (const auto& p : profile.points) {
        out += io::format_double(p.position) + ',' + io::format_double(p.v_ref) + ',' + (p.engine_on ? "1" : "0") +
               ',' + io::format_double(p.soc) + ',' + io::format_double(p.cumulative_cost) + ',' +
               io::format_double(p.time) + ',' + io::format_double(p.accel) + '\n';
    }
    return out;
}

// Time-indexed advisory ---------------------------------------------------

TimeAdvisory resample_to_time(const AdvisoryProfile& profile, double sample_period, double stop_dwell) {
    if (!std::isfinite(sample_period) || !(sample_period > 0.0)) throw ValidationError("sample period must be positive");
    if (!std::isfinite(stop_dwell) || stop_dwell < 0.0) throw ValidationError("stop dwell must be nonnegative");
    const auto& pts = profile.points;
    if (pts.size() < 2) throw ValidationError("advisory profile needs at least 2 points");
    if (!(profile.ds > 0.0)) throw ValidationError("advisory profile distance step must be positive");

    // Breakpoints of the piecewise-linear v(t).
    std::vector<double> times{0.0};
    std::vector<double> speeds{pts[0].v_ref};
    for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
        const double v = pts[s].v_ref;
        const double v_next = pts[s + 1].v_ref;
        if (!std::isfinite(v) || v < 0.0) throw ValidationError("advisory speed invalid at point " + std::to_string(s));
        if (v == 0.0 && s > 0 && !pts[s].stop) {
            throw ValidationError("advisory has zero speed at point " + std::to_string(s) + " without a stop");
        }
        if (v == 0.0 && v_next == 0.0) {
            throw ValidationError("advisory has consecutive zero speeds at point " + std::to_string(s));
        }
        if (v == 0.0 && s > 0 && stop_dwell > 0.0) {
            times.push_back(times.back() + stop_dwell);
            speeds.push_back(0.0);
        }
        times.push_back(times.back() + 2.0 * profile.ds / (v + v_next));
        speeds.push_back(v_next);
    }
    if (pts.back().v_ref == 0.0 && !pts.back().stop && pts.size() > 1) {
        throw ValidationError("advisory ends at zero speed without a stop");
    }

    const double total = times.back();
    const auto n = static_cast<std::size_t>(std::ceil(total / sample_period - 1e-9));
    TimeAdvisory out;
    out.sample_period = sample_period;
    out.v_ref.reserve(n);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * sample_period;
        while (seg + 2 < times.size() && times[seg + 1] <= t) ++seg;
        const double t0 = times[seg];
        const double t1 = times[seg + 1];
        const double w = t1 > t0 ? std::clamp((t - t0) / (t1 - t0), 0.0, 1.0) : 1.0;
        out.v_ref.push_back((1.0 - w) * speeds[seg] + w * speeds[seg + 1]);
    }
    return out;
}

std::string time_advisory_to_csv(const TimeAdvisory& advisory) {
    std::string out(kTimeAdvisoryCsvHeader);
    out += '\n';
    for (std::size_t k = 0; k < advisory.v_ref.size(); ++k) {
        out += io::format_double(static_cast<double>(k) * advisory.sample_period) + ',' +
               io::format_double(advisory.v_ref[k]) + '\n';
    }
    return out;
}

TimeAdvisory time_advisory_from_csv(std::string_view text, std::string_view context) {
    auto table = io::parse_numeric_csv(text, context);
    if (table.header != io::split(kTimeAdvisoryCsvHeader, ',')) {
        throw ValidationError(std::string(context) + ": advisory header must be '" +
                              std::string(kTimeAdvisoryCsvHeader) + "'");
    }
    if (table.rows.size() < 2) throw ValidationError(std::string(context) + ": advisory needs at least 2 samples");
    TimeAdvisory out;
    out.sample_period = io::snap_period((table.rows.back()[0] - table.rows.front()[0]) /
                                        static_cast<double>(table.rows.size() - 1));
    if (!(out.sample_period > 0.0)) throw ValidationError(std::string(context) + ": time column must increase");
    for (std::size_t k = 0; k < table.rows.size(); ++k) {
        const double expected = table.rows.front()[0] + static_cast<double>(k) * out.sample_period;
        if (std::abs(table.rows[k][0] - expected) > 1e-6) {
            throw ValidationError(std::string(context) + ": advisory sample " + std::to_string(k) +
                                  " breaks uniform spacing");
        }
        out.v_ref.push_back(table.rows[k][1]);
    }
    return out;
}

TimeAdvisory read_time_advisory_csv(const std::filesystem::path& path) {
    return time_advisory_from_csv(io::read_text_file(path), path.string());
}

}  // namespace koopdrive
