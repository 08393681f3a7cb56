#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "koopdrive/basis.hpp"

namespace koopdrive {

struct Sample {
    double t = 0.0;      // s
    double v = 0.0;      // m/s
    double f_tr = 0.0;   // N
    double v_ref = 0.0;  // m/s, advisory speed (model input)

    PhysicalState state() const { return {v, f_tr}; }
    friend bool operator==(const Sample&, const Sample&) = default;
};

// Uniformly sampled record of one drive.
struct Trajectory {
    double sample_period = 0.025;
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    double duration() const { return samples.empty() ? 0.0 : samples.back().t - samples.front().t; }

    // Finite values, length >= 2, uniform spacing equal to sample_period.
    void validate() const;

    // Samples whose time lies in [t_start, t_end] (inclusive, with a small
    // tolerance against accumulated rounding in t).
    Trajectory slice_time(double t_start, double t_end) const;
    std::size_t index_at_or_after(double t) const;
};

inline constexpr std::string_view kTrajectoryCsvHeader = "t_s,v_mps,f_tr_n,v_ref_mps";

std::string trajectory_to_csv(const Trajectory& traj);
Trajectory trajectory_from_csv(std::string_view text, std::string_view context);
Trajectory read_trajectory_csv(const std::filesystem::path& path);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);

// Relative tolerance used when comparing sample periods.
bool same_sample_period(double a, double b);

}  // namespace koopdrive
