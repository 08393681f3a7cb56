#include "koopdrive/driversim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "koopdrive/error.hpp"

namespace koopdrive {

namespace {

bool finite_all(std::initializer_list<double> values) {
    return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

bool active(const AttentionWindow& w, double t) { return t >= w.t_start && t <= w.t_end; }

}  // namespace

void VehicleParams::validate() const {
    if (!finite_all({mass, a0, a1, a2, f_min, f_max})) throw ValidationError("vehicle parameters must be finite");
    if (!(mass > 0.0)) throw ValidationError("vehicle mass must be positive");
    if (!(f_min < 0.0 && 0.0 < f_max)) throw ValidationError("traction bounds must satisfy f_min < 0 < f_max");
}

double DriverParams::compliance(double t) const {
    double c = base_compliance;
    for (const auto& w : windows)
        if (active(w, t)) c = std::min(c, w.compliance);
    return c;
}

double DriverParams::noise_scale(double t) const {
    double s = 1.0;
    for (const auto& w : windows)
        if (active(w, t)) s = std::max(s, w.noise_multiplier);
    return s;
}

void DriverParams::validate() const {
    if (!finite_all({kp, ki, reaction_delay, force_rate_limit, noise_std, base_compliance, own_speed_time_constant})) {
        throw ValidationError("driver parameters must be finite");
    }
    if (kp < 0.0 || ki < 0.0) throw ValidationError("driver gains must be nonnegative");
    if (reaction_delay < 0.0 || reaction_delay >= 5.0) throw ValidationError("reaction delay must lie in [0, 5) s");
    if (!(force_rate_limit > 0.0)) throw ValidationError("force rate limit must be positive");
    if (noise_std < 0.0) throw ValidationError("noise std must be nonnegative");
    if (base_compliance < 0.0 || base_compliance > 1.0) throw ValidationError("compliance must lie in [0, 1]");
    if (!(own_speed_time_constant > 0.0)) throw ValidationError("own-speed time constant must be positive");
    if (initial_force && !std::isfinite(*initial_force)) throw ValidationError("initial force must be finite");
    for (const auto& w : windows) {
        if (!finite_all({w.t_start, w.t_end, w.compliance, w.noise_multiplier}) || !(w.t_start < w.t_end)) {
            throw ValidationError("attention window needs finite t_start < t_end");
        }
        if (w.compliance < 0.0 || w.compliance > 1.0 || w.noise_multiplier < 0.0) {
            throw ValidationError("attention window compliance must lie in [0, 1]");
        }
    }
}

DriverParams make_distracted_segment(DriverParams driver, double t_start, double t_end, double compliance,
                                     double noise_multiplier) {
    if (!std::isfinite(t_start) || !std::isfinite(t_end) || !(t_start < t_end)) {
        throw ValidationError("distracted segment needs t_start < t_end");
    }
    if (!(compliance >= 0.0 && compliance <= 1.0)) throw ValidationError("compliance must lie in [0, 1]");
    driver.windows.push_back({t_start, t_end, compliance, noise_multiplier});
    return driver;
}

DriverParams derive_driver(const DriverParams& base, std::uint64_t seed, double spread) {
    if (!(spread >= 0.0 && spread < 1.0)) throw ValidationError("driver spread must lie in [0, 1)");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> factor(1.0 - spread, 1.0 + spread);
    DriverParams d = base;
    d.kp *= factor(rng);
    d.ki *= factor(rng);
    d.reaction_delay *= factor(rng);
    d.noise_std *= factor(rng);
    d.own_speed_time_constant *= factor(rng);
    d.seed = seed;
    return d;
}

Trajectory simulate_driver(const VehicleParams& vehicle, const DriverParams& driver, std::span<const double> v_ref,
                           double sample_period, double duration, std::optional<double> initial_speed) {
    vehicle.validate();
    driver.validate();
    if (!std::isfinite(sample_period) || !(sample_period > 0.0)) {
        throw ValidationError("sample period must be positive");
    }
    if (!std::isfinite(duration) || !(duration > 0.0)) throw ValidationError("duration must be positive");
    const auto n = static_cast<std::size_t>(std::llround(duration / sample_period));
    if (n < 2) throw ValidationError("duration covers fewer than 2 samples");
    if (v_ref.size() < n) {
        throw ValidationError("advisory covers " + std::to_string(v_ref.size()) + " samples, simulation needs " +
                              std::to_string(n));
    }
    for (std::size_t k = 0; k < n; ++k)
        if (!std::isfinite(v_ref[k])) throw ValidationError("advisory has a non-finite value at sample " + std::to_string(k));

    const double dt = sample_period;
    const auto delay_steps = static_cast<std::size_t>(std::llround(driver.reaction_delay / dt));

    double v = initial_speed.value_or(v_ref[0]);
    if (!std::isfinite(v) || v < 0.0) throw ValidationError("initial speed must be finite and nonnegative");
    double f = driver.initial_force.value_or(std::clamp(v > 0.0 ? vehicle.road_load(v) : 0.0, vehicle.f_min, vehicle.f_max));
    f = std::clamp(f, vehicle.f_min, vehicle.f_max);
    double integral = f;
    double own_speed = v;

    std::mt19937_64 rng(driver.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<double> perceived_error;
    perceived_error.reserve(n);

    Trajectory traj;
    traj.sample_period = dt;
    traj.samples.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        traj.samples.push_back({t, v, f, v_ref[k]});

        const double c = driver.compliance(t);
        const double target = c * v_ref[k] + (1.0 - c) * own_speed;
        perceived_error.push_back(target - v);
        const double e = perceived_error[k >= delay_steps ? k - delay_steps : 0];

        const double noise = driver.noise_std * driver.noise_scale(t) * gauss(rng);
        double command = driver.kp * e + integral + noise;
        const bool saturated_high = command > vehicle.f_max && e > 0.0;
        const bool saturated_low = command < vehicle.f_min && e < 0.0;
        if (!saturated_high && !saturated_low) integral += driver.ki * e * dt;

        const double max_delta = driver.force_rate_limit * dt;
        double f_next = f + std::clamp(command - f, -max_delta, max_delta);
        f_next = std::clamp(f_next, vehicle.f_min, vehicle.f_max);

        // At standstill, rolling resistance only opposes forces up to a0.
        const double resist = v > 0.0 ? vehicle.road_load(v) : std::clamp(f, 0.0, vehicle.a0);
        double v_next = v + dt * (f - resist) / vehicle.mass;
        v_next = std::max(v_next, 0.0);

        own_speed += dt / driver.own_speed_time_constant * (v - own_speed);
        v = v_next;
        f = f_next;
    }
    return traj;
}

}  // namespace koopdrive
