#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "koopdrive/advisory.hpp"

#include "dp_oracle.hpp"

using namespace koopdrive;
using namespace dporacle;

namespace {

const std::filesystem::path kDataDir = KOOPDRIVE_DATA_DIR;

// Highest grid speed per node that lies on some admissible path.
std::vector<double> max_speed_envelope(const RouteSpec& route, const std::vector<double>& grid, double a_min,
                                       double a_max) {
    const std::size_t n = route.nodes.size();
    auto ok_at = [&](std::size_t s, std::size_t i) {
        return grid[i] >= route.nodes[s].v_min - 1e-9 && grid[i] <= route.nodes[s].v_max + 1e-9;
    };
    auto lowest = [&](std::size_t s) {
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (ok_at(s, i)) return i;
        return grid.size();
    };
    auto usable = [&](std::size_t s, std::size_t i) {
        return ok_at(s, i) && ((s != 0 && !route.nodes[s].stop) || i == lowest(s));
    };
    auto step_ok = [&](double v, double w) {
        if (v == 0.0 && w == 0.0) return false;
        const double a = (w * w - v * v) / (2.0 * route.ds);
        return a >= a_min - 1e-12 && a <= a_max + 1e-12;
    };
    std::vector<std::vector<bool>> fwd(n, std::vector<bool>(grid.size())), bwd = fwd;
    fwd[0][lowest(0)] = true;
    for (std::size_t s = 1; s < n; ++s)
        for (std::size_t j = 0; j < grid.size(); ++j)
            for (std::size_t i = 0; i < grid.size(); ++i)
                if (usable(s, j) && fwd[s - 1][i] && step_ok(grid[i], grid[j])) fwd[s][j] = true;
    for (std::size_t j = 0; j < grid.size(); ++j) bwd[n - 1][j] = usable(n - 1, j);
    for (std::size_t s = n - 1; s-- > 0;)
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (std::size_t j = 0; j < grid.size(); ++j)
                if (usable(s, i) && bwd[s + 1][j] && step_ok(grid[i], grid[j])) bwd[s][i] = true;
    std::vector<double> out(n, -1.0);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (fwd[s][i] && bwd[s][i]) out[s] = grid[i];
    return out;
}

RouteSpec example_route() { return read_route_csv(kDataDir / "example_route.csv"); }

AdvisoryProfile constant_profile(double v, std::size_t nodes, double ds) {
    AdvisoryProfile p;
    p.ds = ds;
    for (std::size_t s = 0; s < nodes; ++s) {
        ProfilePoint pt;
        pt.position = ds * static_cast<double>(s);
        pt.v_ref = v;
        p.points.push_back(pt);
    }
    return p;
}

}  // namespace

TEST_CASE("surrogate powertrain signs") {
    const PowertrainParams p;
    const auto accel_ev = surrogate_powertrain(p, 10.0, 1.0, false, 0.0);
    CHECK(accel_ev.power > 0.0);
    CHECK(accel_ev.battery_power > 0.0);
    CHECK(accel_ev.dsoc_ds < 0.0);
    CHECK(accel_ev.fuel_rate == 0.0);

    const auto brake = surrogate_powertrain(p, 10.0, -1.5, false, 0.0);
    CHECK(brake.power < 0.0);
    CHECK(brake.battery_power < 0.0);
    CHECK(brake.dsoc_ds > 0.0);

    const auto downhill = surrogate_powertrain(p, 15.0, 0.0, false, -0.05);
    CHECK(downhill.dsoc_ds > 0.0);

    for (double v : {3.0, 10.0, 20.0}) {
        for (double a : {0.0, 0.5, 1.5}) {
            const auto off = surrogate_powertrain(p, v, a, false, 0.01);
            const auto on = surrogate_powertrain(p, v, a, true, 0.01);
            CHECK(on.fuel_rate > 0.0);
            CHECK(on.equivalent_fuel_rate > off.equivalent_fuel_rate);
            CHECK(std::abs(on.dsoc_ds) < std::abs(off.dsoc_ds));
        }
    }

    CHECK_THROWS_AS(surrogate_powertrain(p, 0.0, 0.0, false, 0.0), ValidationError);
    CHECK_THROWS_AS(surrogate_powertrain(p, 5.0, std::nan(""), false, 0.0), ValidationError);
}

TEST_CASE("stage cost blends fuel and time by gamma") {
    auto route = toy_route();
    auto cfg = toy_config();
    cfg.fuel_norm = 1e-3;
    for (double gamma : {0.0, 0.3, 1.0}) {
        cfg.gamma = gamma;
        const auto stage = surrogate_stage_model(route, cfg);
        const auto o = stage(1, 2.0, 3.0, false);
        CHECK(o.travel_time == doctest::Approx(4.0));
        const auto pt = surrogate_powertrain(cfg.powertrain, 2.5, 0.25, false, 0.0);
        CHECK(o.cost == doctest::Approx((gamma * pt.equivalent_fuel_rate / 1e-3 + 1.0 - gamma) * 4.0));
        CHECK(o.soc_delta == doctest::Approx(pt.dsoc_ds * 10.0));
    }
}

TEST_CASE("DP matches exhaustive search on toy routes") {
    const auto route = toy_route();
    const auto cfg = toy_config();
    int feasible = 0, infeasible = 0;
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        // Later seeds never charge, so some of them cannot end above the floor.
        const TableStage table(seed, route.steps(), seed <= 40 ? 1 : 0);
        const auto stage = table.model();
        BruteForce oracle{route, cfg, stage};
        const double expected = oracle.solve();
        if (std::isfinite(expected)) {
            ++feasible;
            const auto profile = solve_eco_dp(route, cfg, stage);
            CHECK(profile.total_cost() == expected);
            // The reported path must reproduce its own cost and SoC trace.
            double cost = 0.0, soc = cfg.initial_soc;
            for (std::size_t s = 0; s < route.steps(); ++s) {
                CHECK(profile.points[s].soc == soc);
                const auto o = stage(s, profile.points[s].v_ref, profile.points[s + 1].v_ref, profile.points[s].engine_on);
                cost += o.cost;
                soc = std::min(soc + o.soc_delta, cfg.soc_max);
                CHECK(soc >= cfg.soc_min);
            }
            CHECK(cost == expected);
            CHECK(profile.points.back().soc > cfg.terminal_soc_floor);
        } else {
            ++infeasible;
            CHECK_THROWS_AS(solve_eco_dp(route, cfg, stage), InfeasibleRouteError);
        }
    }
    CHECK(feasible > 10);
    CHECK(infeasible > 0);
}

TEST_CASE("DP profile respects the route and grid rules") {
    const auto route = toy_route();
    const auto cfg = toy_config();
    const TableStage table(3, route.steps());
    const auto profile = solve_eco_dp(route, cfg, table.model());
    REQUIRE(profile.points.size() == route.nodes.size());
    CHECK(profile.points[0].v_ref == 0.0);
    CHECK(profile.points[3].v_ref == 0.0);
    for (std::size_t s = 0; s < profile.points.size(); ++s) {
        CHECK(profile.points[s].position == route.nodes[s].position);
        CHECK(profile.points[s].v_ref >= route.nodes[s].v_min);
        CHECK(profile.points[s].v_ref <= route.nodes[s].v_max);
        if (s + 1 < profile.points.size()) {
            CHECK(profile.points[s].accel >= cfg.a_min);
            CHECK(profile.points[s].accel <= cfg.a_max);
            CHECK(profile.points[s + 1].cumulative_cost > profile.points[s].cumulative_cost);
        }
    }
}

TEST_CASE("gamma = 0 drives the fastest admissible profile") {
    RouteSpec route;
    route.ds = 10.0;
    for (int s = 0; s <= 40; ++s) {
        const double limit = s < 15 ? 14.0 : s < 25 ? 8.0 : 16.0;
        route.nodes.push_back({10.0 * s, 0.0, limit, s == 0 || s == 30 || s == 40, 0.01 * std::sin(0.3 * s)});
    }
    EcoDpConfig cfg;
    cfg.gamma = 0.0;
    cfg.soc_min = 0.0;
    cfg.soc_max = 1.0;
    cfg.soc_levels = 11;
    cfg.initial_soc = 0.9;
    cfg.terminal_soc_floor = 0.0;
    const auto profile = solve_eco_dp(route, cfg);
    const auto envelope = max_speed_envelope(route, velocity_grid_for(route, cfg), cfg.a_min, cfg.a_max);
    for (std::size_t s = 0; s < route.nodes.size(); ++s) CHECK(profile.points[s].v_ref == envelope[s]);

    double expected_time = 0.0;
    for (std::size_t s = 0; s + 1 < envelope.size(); ++s) expected_time += 2.0 * route.ds / (envelope[s] + envelope[s + 1]);
    CHECK(profile.travel_time() == doctest::Approx(expected_time).epsilon(1e-12));
    CHECK(profile.total_cost() == doctest::Approx(expected_time).epsilon(1e-12));
}

TEST_CASE("infeasible speed limits report the blocking node") {
    auto route = toy_route();
    auto cfg = toy_config();
    cfg.velocity_grid = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0};
    route.nodes[2].v_min = 9.5;
    route.nodes[2].v_max = 10.0;
    const TableStage table(1, route.steps());
    try {
        solve_eco_dp(route, cfg, surrogate_stage_model(route, cfg));
        FAIL("expected an infeasible route");
    } catch (const InfeasibleRouteError& e) {
        CHECK(e.blocking_step() == 2);
    }

    auto gap = toy_route();
    gap.nodes[4].v_min = 4.5;
    gap.nodes[4].v_max = 4.8;
    try {
        solve_eco_dp(gap, toy_config(), table.model());
        FAIL("expected an infeasible route");
    } catch (const InfeasibleRouteError& e) {
        CHECK(e.blocking_step() == 4);
    }
}

TEST_CASE("unreachable terminal SoC is infeasible") {
    const auto route = toy_route();
    const auto cfg = toy_config();
    const StageModel drain = [](std::size_t, double v, double w, bool) {
        return StageOutcome{1.0, -0.25, 20.0 / (v + w), 0.0};
    };
    CHECK_THROWS_AS(solve_eco_dp(route, cfg, drain), InfeasibleRouteError);

    const StageModel hold = [](std::size_t, double v, double w, bool) {
        return StageOutcome{1.0, 0.0, 20.0 / (v + w), 0.0};
    };
    CHECK(solve_eco_dp(route, cfg, hold).total_cost() == 5.0);
    auto strict = cfg;
    strict.terminal_soc_floor = 0.5;
    // Final SoC must exceed the floor, not just reach it.
    CHECK_THROWS_AS(solve_eco_dp(route, strict, hold), InfeasibleRouteError);
}

TEST_CASE("SoC saturates at the upper bound") {
    const auto route = toy_route();
    const auto cfg = toy_config();
    const StageModel charge = [](std::size_t, double v, double w, bool) {
        return StageOutcome{1.0, 0.25, 20.0 / (v + w), 0.0};
    };
    const auto profile = solve_eco_dp(route, cfg, charge);
    for (const auto& p : profile.points) CHECK(p.soc <= cfg.soc_max);
    CHECK(profile.points.back().soc == cfg.soc_max);
}

TEST_CASE("DP config and route validation") {
    auto cfg = toy_config();
    cfg.gamma = 1.5;
    CHECK_THROWS_AS(solve_eco_dp(toy_route(), cfg), ValidationError);
    cfg = toy_config();
    cfg.velocity_grid = {0.0, 2.0, 1.0};
    CHECK_THROWS_AS(solve_eco_dp(toy_route(), cfg), ValidationError);
    cfg = toy_config();
    cfg.initial_soc = 0.9;
    CHECK_THROWS_AS(solve_eco_dp(toy_route(), cfg), ValidationError);

    auto route = toy_route();
    route.nodes[2].position = 21.0;
    CHECK_THROWS_AS(solve_eco_dp(route, toy_config()), ValidationError);
    route = toy_route();
    route.nodes.resize(1);
    CHECK_THROWS_AS(solve_eco_dp(route, toy_config()), ValidationError);
}

TEST_CASE("route CSV round trip and parse errors") {
    const auto route = toy_route();
    const auto text = route_to_csv(route);
    const auto back = route_from_csv(text, "toy");
    REQUIRE(back.nodes.size() == route.nodes.size());
    CHECK(back.ds == 10.0);
    for (std::size_t s = 0; s < route.nodes.size(); ++s) {
        CHECK(back.nodes[s].v_max == route.nodes[s].v_max);
        CHECK(back.nodes[s].stop == route.nodes[s].stop);
    }

    CHECK_THROWS_AS(route_from_csv("position,v_min,v_max,stop,grade\n0,0,1,0,0\n10,0,1,0,0\n", "x"), ValidationError);
    CHECK_THROWS_AS(route_from_csv("position_m,v_min_mps,v_max_mps,stop,grade\n0,0,1,2,0\n10,0,1,0,0\n", "x"),
                    ValidationError);
    CHECK_THROWS_AS(route_from_csv("position_m,v_min_mps,v_max_mps,stop,grade\n0,0,1,0,0\n10,0,1,0,0\n25,0,1,0,0\n", "x"),
                    ValidationError);
    CHECK_THROWS_AS(route_from_csv("position_m,v_min_mps,v_max_mps,stop,grade\n0,2,1,0,0\n10,0,1,0,0\n", "x"),
                    ValidationError);
    CHECK_THROWS_AS(route_from_csv("position_m,v_min_mps,v_max_mps,stop,grade\n0,0,1,0\n", "x"), ValidationError);
    CHECK_THROWS_AS(read_route_csv(kDataDir / "no_such_route.csv"), IoError);
}

TEST_CASE("resampling a constant speed profile") {
    const auto profile = constant_profile(10.0, 11, 10.0);
    const auto adv = resample_to_time(profile, 0.025);
    CHECK(adv.v_ref.size() == 400);
    for (double v : adv.v_ref) CHECK(v == doctest::Approx(10.0));
    CHECK(adv.duration() == doctest::Approx(10.0));

    auto stopped = profile;
    stopped.points[5].v_ref = 0.0;
    CHECK_THROWS_AS(resample_to_time(stopped, 0.025), ValidationError);
    stopped.points[5].stop = true;
    CHECK_NOTHROW(resample_to_time(stopped, 0.025));
    CHECK_THROWS_AS(resample_to_time(profile, 0.0), ValidationError);
}

TEST_CASE("stops hold zero speed for the dwell time") {
    auto profile = constant_profile(10.0, 11, 10.0);
    profile.points[0].v_ref = 0.0;
    profile.points[0].stop = true;
    profile.points[5].v_ref = 0.0;
    profile.points[5].stop = true;
    const auto plain = resample_to_time(profile, 0.025);
    const auto dwell = resample_to_time(profile, 0.025, 3.0);
    // The start stop has no dwell; the one midway does.
    CHECK(dwell.duration() == doctest::Approx(plain.duration() + 3.0).epsilon(1e-3));
    std::size_t zeros = 0;
    for (double v : dwell.v_ref) zeros += v == 0.0 ? 1 : 0;
    CHECK(zeros >= 120);
}

TEST_CASE("time advisory CSV round trip") {
    TimeAdvisory adv;
    adv.sample_period = 0.025;
    adv.v_ref = {0.0, 0.5, 1.25, 2.0};
    const auto back = time_advisory_from_csv(time_advisory_to_csv(adv), "adv");
    CHECK(back.sample_period == 0.025);
    CHECK(back.v_ref == adv.v_ref);
    CHECK_THROWS_AS(time_advisory_from_csv("t_s,v_ref_mps\n0,1\n0.025,1\n0.1,1\n", "adv"), ValidationError);
    CHECK_THROWS_AS(time_advisory_from_csv("t,v\n0,1\n0.025,1\n", "adv"), ValidationError);
}

TEST_CASE("example route advisory meets every constraint") {
    const auto route = example_route();
    const EcoDpConfig cfg;
    const auto profile = solve_eco_dp(route, cfg);
    REQUIRE(profile.points.size() == route.nodes.size());
    CHECK(profile.points.front().soc == cfg.initial_soc);
    CHECK(profile.points.back().soc > cfg.terminal_soc_floor);
    for (std::size_t s = 0; s < profile.points.size(); ++s) {
        const auto& p = profile.points[s];
        CHECK(p.v_ref >= route.nodes[s].v_min - 1e-9);
        CHECK(p.v_ref <= route.nodes[s].v_max + 1e-9);
        CHECK(p.soc >= cfg.soc_min);
        CHECK(p.soc <= cfg.soc_max);
        if (route.nodes[s].stop) CHECK(p.v_ref == 0.0);
        if (s + 1 < profile.points.size()) {
            CHECK(p.accel >= cfg.a_min - 1e-12);
            CHECK(p.accel <= cfg.a_max + 1e-12);
        }
    }

    const auto adv = resample_to_time(profile, 0.025, 3.0);
    double distance = 0.0;
    for (std::size_t k = 0; k + 1 < adv.v_ref.size(); ++k) distance += 0.5 * adv.sample_period * (adv.v_ref[k] + adv.v_ref[k + 1]);
    CHECK(std::abs(distance - route.total_length()) <= 1e-3 * route.total_length());
    std::size_t stops_after_start = 0;
    for (std::size_t s = 1; s + 1 < route.nodes.size(); ++s) stops_after_start += route.nodes[s].stop ? 1 : 0;
    CHECK(std::abs(adv.duration() - (profile.travel_time() + 3.0 * stops_after_start)) <= 0.025 + 1e-9);
}

TEST_CASE("travel time does not grow as gamma falls") {
    const auto route = example_route();
    double previous = -1.0;
    for (double gamma : {1.0, 0.75, 0.5, 0.25, 0.0}) {
        EcoDpConfig cfg;
        cfg.gamma = gamma;
        const auto profile = solve_eco_dp(route, cfg);
        if (previous >= 0.0) CHECK(profile.travel_time() <= previous + 1e-9);
        previous = profile.travel_time();
    }
}
