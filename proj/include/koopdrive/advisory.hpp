#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "koopdrive/error.hpp"

namespace koopdrive {

// Route ------------------------------------------------------------------

struct RouteNode {
    double position = 0.0;  // m
    double v_min = 0.0;     // m/s
    double v_max = 0.0;     // m/s
    bool stop = false;      // speed must drop to the lowest admissible grid speed here
    double grade = 0.0;     // rise over run, applied to the step starting at this node
};

// Distance grid with nodes at position 0, ds, 2 ds, ...; step s runs from
// node s to node s + 1.
struct RouteSpec {
    double ds = 10.0;
    std::vector<RouteNode> nodes;

    std::size_t steps() const { return nodes.empty() ? 0 : nodes.size() - 1; }
    double total_length() const { return ds * static_cast<double>(steps()); }
    void validate() const;
};

inline constexpr std::string_view kRouteCsvHeader = "position_m,v_min_mps,v_max_mps,stop,grade";

RouteSpec route_from_csv(std::string_view text, std::string_view context);
RouteSpec read_route_csv(const std::filesystem::path& path);
std::string route_to_csv(const RouteSpec& route);

// Surrogate powertrain ----------------------------------------------------

// Stand-in for a plug-in hybrid minivan: a battery-electric drive (EV mode)
// and an engine that carries `engine_share` of the traction power when on
// (HEV mode). Fuel use follows an affine Willans line.
struct PowertrainParams {
    double mass = 2200.0;  // kg
    double a0 = 150.0;     // N
    double a1 = 4.0;       // N s/m
    double a2 = 0.45;      // N s^2/m^2
    double gravity = 9.81;
    double battery_energy = 16.0 * 3.6e6;  // J
    double discharge_efficiency = 0.88;
    double regen_efficiency = 0.65;
    double fuel_lhv = 42.6e6;         // J/kg
    double equivalence_factor = 2.0;  // weight of battery energy against fuel energy
    double engine_idle_fuel = 1.5e-4;  // kg/s
    double engine_efficiency = 0.30;   // marginal (Willans slope)
    double engine_share = 0.7;
    double engine_max_power = 1.2e5;  // W

    // Idle plus full-power fuel flow [kg/s].
    double max_fuel_rate() const;
    void validate() const;
};

struct PowertrainOutput {
    double power = 0.0;          // W at the wheels
    double battery_power = 0.0;  // W drawn from the battery (negative when charging)
    double fuel_rate = 0.0;      // kg/s actual fuel
    double equivalent_fuel_rate = 0.0;  // kg/s, fuel plus weighted battery energy
    double dsoc_ds = 0.0;        // per metre
};

// v > 0 required (dSoC/ds divides by speed).
PowertrainOutput surrogate_powertrain(const PowertrainParams& params, double v, double a, bool engine_on,
                                      double grade);

// Eco-driving DP ----------------------------------------------------------

struct EcoDpConfig {
    double gamma = 0.5;
    // Velocity grid: explicit nodes, or 0, step, 2 step, ... up to the fastest
    // route limit when left empty.
    std::vector<double> velocity_grid;
    double velocity_step = 0.5;
    double soc_min = 0.20;
    double soc_max = 0.90;
    int soc_levels = 141;
    double a_min = -1.5;  // m/s^2
    double a_max = 1.5;
    double initial_soc = 0.40;
    double terminal_soc_floor = 0.26;  // strict: final SoC must exceed it
    std::optional<double> fuel_norm;   // kg/s; defaults to max_fuel_rate()
    PowertrainParams powertrain;

    double effective_fuel_norm() const { return fuel_norm.value_or(powertrain.max_fuel_rate()); }
    void validate() const;
};

// Cost and battery change of crossing one distance step.
struct StageOutcome {
    double cost = 0.0;
    double soc_delta = 0.0;
    double travel_time = 0.0;
    double equivalent_fuel_rate = 0.0;
};

// Evaluates step `step` from speed v to v_next with the given engine flag.
// Only called for transitions that satisfy the speed and acceleration rules.
using StageModel = std::function<StageOutcome(std::size_t step, double v, double v_next, bool engine_on)>;

// Stage cost (gamma * mdot_eqf / mdot_norm + (1 - gamma)) * dt with
// dt = 2 ds / (v + v_next) and the surrogate evaluated at the mean speed and
// the constant acceleration (v_next^2 - v^2) / (2 ds).
StageModel surrogate_stage_model(const RouteSpec& route, const EcoDpConfig& config);

struct ProfilePoint {
    double position = 0.0;
    double v_ref = 0.0;
    bool engine_on = false;  // control applied over the step leaving this node
    double soc = 0.0;
    double cumulative_cost = 0.0;  // cost accrued up to this node
    double time = 0.0;             // travel time up to this node, dwell excluded
    double accel = 0.0;            // over the step leaving this node
    bool stop = false;
};

struct AdvisoryProfile {
    double ds = 0.0;
    double gamma = 0.0;
    std::vector<ProfilePoint> points;

    double total_cost() const { return points.empty() ? 0.0 : points.back().cumulative_cost; }
    double travel_time() const { return points.empty() ? 0.0 : points.back().time; }
};

class InfeasibleRouteError : public ValidationError {
public:
    InfeasibleRouteError(std::size_t blocking_step, const std::string& message)
        : ValidationError(message), blocking_step_(blocking_step) {}
    std::size_t blocking_step() const { return blocking_step_; }

private:
    std::size_t blocking_step_;
};

// Backward induction over (velocity node x SoC grid) with linear
// interpolation of the value function along SoC, then a forward pass from the
// exact initial SoC that re-optimizes each step. SoC saturates at soc_max
// (surplus regeneration goes to the friction brakes). Among equal-cost
// controls the lower |a| wins, then engine off.
AdvisoryProfile solve_eco_dp(const RouteSpec& route, const EcoDpConfig& config);
AdvisoryProfile solve_eco_dp(const RouteSpec& route, const EcoDpConfig& config, const StageModel& stage);

// Grid actually used by the solver for this route and config.
std::vector<double> velocity_grid_for(const RouteSpec& route, const EcoDpConfig& config);

std::string profile_to_csv(const AdvisoryProfile& profile);

// Time-indexed advisory ---------------------------------------------------

struct TimeAdvisory {
    double sample_period = 0.025;
    std::vector<double> v_ref;

    double duration() const { return sample_period * static_cast<double>(v_ref.size()); }
};

// Node times accumulate dt_s = 2 ds / (v_s + v_{s+1}); speed is linear in time
// within a step (constant acceleration). Every stop between the start and
// the final node holds zero speed for `stop_dwell` seconds. Samples are taken at k * period for
// k * period < total time.
TimeAdvisory resample_to_time(const AdvisoryProfile& profile, double sample_period, double stop_dwell = 0.0);

inline constexpr std::string_view kTimeAdvisoryCsvHeader = "t_s,v_ref_mps";

std::string time_advisory_to_csv(const TimeAdvisory& advisory);
TimeAdvisory time_advisory_from_csv(std::string_view text, std::string_view context);
TimeAdvisory read_time_advisory_csv(const std::filesystem::path& path);

}  // namespace koopdrive
