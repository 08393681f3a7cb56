#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "koopdrive/trajectory.hpp"

namespace koopdrive {

// Longitudinal point-mass vehicle with quadratic road load.
struct VehicleParams {
    double mass = 2200.0;  // kg
    double a0 = 150.0;     // N
    double a1 = 4.0;       // N s/m
    double a2 = 0.45;      // N s^2/m^2
    double f_min = -9000.0;
    double f_max = 6000.0;

    double road_load(double v) const { return a0 + a1 * v + a2 * v * v; }
    void validate() const;
};

// Interval in which the driver pays less attention to the advisory.
struct AttentionWindow {
    double t_start = 0.0;
    double t_end = 0.0;
    double compliance = 0.2;
    double noise_multiplier = 2.0;
};

// PI speed-tracking driver with reaction delay, force rate limit and force noise.
//
// The driver tracks target = c(t) * v_ref + (1 - c(t)) * v_own, where v_own is
// their own cruise speed (a first-order lag of the actual speed with time
// constant own_speed_time_constant). c = 1 follows the advisory, c = 0 ignores
// it and holds the current speed.
struct DriverParams {
    double kp = 700.0;                // N per m/s
    double ki = 90.0;                 // N per m
    double reaction_delay = 0.3;      // s
    double force_rate_limit = 8000.0;  // N/s
    double noise_std = 40.0;          // N
    double base_compliance = 1.0;
    double own_speed_time_constant = 10.0;  // s
    std::optional<double> initial_force;    // N; default: road load at the initial speed
    std::vector<AttentionWindow> windows;
    std::uint64_t seed = 1;

    // Minimum over active windows, base_compliance elsewhere.
    double compliance(double t) const;
    // Maximum multiplier over active windows, 1 elsewhere.
    double noise_scale(double t) const;
    void validate() const;
};

// Adds a window [t_start, t_end] of reduced compliance and amplified noise.
// Windows compose, so repeated calls produce several distracted segments.
DriverParams make_distracted_segment(DriverParams driver, double t_start, double t_end, double compliance = 0.2,
                                     double noise_multiplier = 2.0);

// Per-driver variation of a base parameter set: gains, delay and noise are
// scaled by factors drawn uniformly from [1 - spread, 1 + spread] using
// std::mt19937_64(seed); the result carries `seed`.
DriverParams derive_driver(const DriverParams& base, std::uint64_t seed, double spread = 0.2);

// Explicit-Euler simulation at the advisory sample period. Produces
// round(duration / sample_period) samples; the advisory must cover them.
// initial_speed defaults to the first advisory value.
Trajectory simulate_driver(const VehicleParams& vehicle, const DriverParams& driver, std::span<const double> v_ref,
                           double sample_period, double duration, std::optional<double> initial_speed = std::nullopt);

}  // namespace koopdrive
