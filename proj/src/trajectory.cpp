#include "koopdrive/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "koopdrive/error.hpp"
#include "koopdrive/io.hpp"

namespace koopdrive {

namespace {
constexpr double kTimeTolerance = 1e-6;  // s
}

bool same_sample_period(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); }

void Trajectory::validate() const {
    if (!(sample_period > 0.0) || !std::isfinite(sample_period)) {
        throw ValidationError("trajectory sample period must be positive and finite");
    }
    if (samples.size() < 2) throw ValidationError("trajectory needs at least 2 samples");
    const double t0 = samples.front().t;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto& s = samples[k];
        if (!std::isfinite(s.t) || !std::isfinite(s.v) || !std::isfinite(s.f_tr) || !std::isfinite(s.v_ref)) {
            throw ValidationError("trajectory sample " + std::to_string(k) + " has a non-finite value");
        }
        const double expected = t0 + static_cast<double>(k) * sample_period;
        if (std::abs(s.t - expected) > kTimeTolerance + 1e-9 * std::abs(expected)) {
            throw ValidationError("trajectory sample " + std::to_string(k) + " breaks uniform spacing");
        }
    }
}

std::size_t Trajectory::index_at_or_after(double t) const {
    auto it = std::lower_bound(samples.begin(), samples.end(), t - kTimeTolerance,
                               [](const Sample& s, double value) { return s.t < value; });
    return static_cast<std::size_t>(it - samples.begin());
}

Trajectory Trajectory::slice_time(double t_start, double t_end) const {
    Trajectory out;
    out.sample_period = sample_period;
    for (const auto& s : samples) {
        if (s.t >= t_start - kTimeTolerance && s.t <= t_end + kTimeTolerance) out.samples.push_back(s);
    }
    return out;
}

std::string trajectory_to_csv(const Trajectory& traj) {
    std::string out(kTrajectoryCsvHeader);
    out += '\n';
    for (const auto& s : traj.samples) {
        out += io::format_double(s.t);
        out += ',';
        out += io::format_double(s.v);
        out += ',';
        out += io::format_double(s.f_tr);
        out += ',';
        out += io::format_double(s.v_ref);
        out += '\n';
    }
    return out;
}

Trajectory trajectory_from_csv(std::string_view text, std::string_view context) {
    auto table = io::parse_numeric_csv(text, context);
    const auto expected = io::split(kTrajectoryCsvHeader, ',');
    if (table.header != expected) {
        throw ValidationError(std::string(context) + ": trajectory header must be '" +
                              std::string(kTrajectoryCsvHeader) + "'");
    }
    Trajectory traj;
    traj.samples.reserve(table.rows.size());
    for (const auto& r : table.rows) traj.samples.push_back({r[0], r[1], r[2], r[3]});
    if (traj.samples.size() < 2) {
        throw ValidationError(std::string(context) + ": trajectory needs at least 2 samples");
    }
    traj.sample_period = io::snap_period((traj.samples.back().t - traj.samples.front().t) /
                                         static_cast<double>(traj.samples.size() - 1));
    try {
        traj.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(context) + ": " + e.what());
    }
    return traj;
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
    return trajectory_from_csv(io::read_text_file(path), path.string());
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
    io::write_text_file_atomic(path, trajectory_to_csv(traj));
}

}  // namespace koopdrive
