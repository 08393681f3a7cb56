#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "koopdrive/driversim.hpp"
#include "koopdrive/error.hpp"

using namespace koopdrive;

namespace {

DriverParams quiet_driver() {
    DriverParams d;
    d.noise_std = 0.0;
    return d;
}

std::vector<double> stepped_advisory(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = 0.025 * static_cast<double>(k);
        v[k] = t < 20.0 ? 12.0 : t < 40.0 ? 20.0 : t < 60.0 ? 0.0 : t < 80.0 ? 18.0 : 5.0;
    }
    return v;
}

}  // namespace

TEST_CASE("attentive PI driver settles on a constant advisory") {
    const std::vector<double> v_ref(4000, 15.0);
    const auto traj = simulate_driver(VehicleParams{}, quiet_driver(), v_ref, 0.025, 100.0, 5.0);
    REQUIRE(traj.size() == 4000);
    for (std::size_t k = 2400; k < traj.size(); ++k) CHECK(std::abs(traj.samples[k].v - 15.0) <= 0.1);
}

TEST_CASE("a driver ignoring the advisory holds their speed") {
    auto d = quiet_driver();
    d.base_compliance = 0.0;
    const std::vector<double> v_ref(4000, 25.0);
    const auto traj = simulate_driver(VehicleParams{}, d, v_ref, 0.025, 100.0, 10.0);
    for (const auto& s : traj.samples) CHECK(std::abs(s.v - 10.0) <= 0.2);
}

TEST_CASE("same seed gives identical trajectories, another seed does not") {
    const auto v_ref = stepped_advisory(4000);
    DriverParams d;
    d.seed = 77;
    const auto a = simulate_driver(VehicleParams{}, d, v_ref, 0.025, 100.0);
    const auto b = simulate_driver(VehicleParams{}, d, v_ref, 0.025, 100.0);
    CHECK(a.samples == b.samples);
    d.seed = 78;
    const auto c = simulate_driver(VehicleParams{}, d, v_ref, 0.025, 100.0);
    CHECK(a.samples != c.samples);
}

TEST_CASE("distracted segment lowers compliance inside its window") {
    const auto d = make_distracted_segment(DriverParams{}, 515.0, 630.0);
    CHECK(d.compliance(520.0) == 0.2);
    CHECK(d.compliance(700.0) == 1.0);
    CHECK(d.compliance(500.0) == 1.0);
    CHECK(d.noise_scale(520.0) == 2.0);
    CHECK(d.noise_scale(700.0) == 1.0);

    CHECK_THROWS_AS(make_distracted_segment(DriverParams{}, 515.0, 515.0), ValidationError);
    CHECK_THROWS_AS(make_distracted_segment(DriverParams{}, 630.0, 515.0), ValidationError);

    const auto two = make_distracted_segment(make_distracted_segment(DriverParams{}, 10.0, 20.0), 40.0, 50.0, 0.5, 3.0);
    CHECK(two.compliance(15.0) == 0.2);
    CHECK(two.compliance(30.0) == 1.0);
    CHECK(two.compliance(45.0) == 0.5);
    CHECK(two.noise_scale(45.0) == 3.0);
}

TEST_CASE("distraction changes behavior only inside the window") {
    const auto v_ref = stepped_advisory(4000);
    DriverParams base = quiet_driver();
    const auto calm = simulate_driver(VehicleParams{}, base, v_ref, 0.025, 100.0);
    const auto distracted = simulate_driver(VehicleParams{}, make_distracted_segment(base, 30.0, 50.0), v_ref, 0.025, 100.0);
    for (std::size_t k = 0; k < 1200; ++k) CHECK(calm.samples[k] == distracted.samples[k]);
    double gap = 0.0;
    for (std::size_t k = 1200; k < 2000; ++k) gap = std::max(gap, std::abs(calm.samples[k].v - distracted.samples[k].v));
    CHECK(gap > 1.0);
}

TEST_CASE("force stays within bounds and speed stays nonnegative") {
    const auto v_ref = stepped_advisory(4000);
    DriverParams d;
    d.noise_std = 400.0;
    d.kp = 3000.0;
    d.force_rate_limit = 1e5;
    VehicleParams veh;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        d.seed = seed;
        const auto traj = simulate_driver(veh, d, v_ref, 0.025, 100.0);
        for (const auto& s : traj.samples) {
            CHECK(s.f_tr >= veh.f_min);
            CHECK(s.f_tr <= veh.f_max);
            CHECK(s.v >= 0.0);
        }
    }
}

TEST_CASE("with zero traction force the vehicle only slows down") {
    DriverParams d = quiet_driver();
    d.kp = 0.0;
    d.ki = 0.0;
    d.initial_force = 0.0;
    const std::vector<double> v_ref(4000, 30.0);
    const auto traj = simulate_driver(VehicleParams{}, d, v_ref, 0.025, 100.0, 20.0);
    for (std::size_t k = 1; k < traj.size(); ++k) {
        CHECK(traj.samples[k].f_tr == 0.0);
        CHECK(traj.samples[k].v < traj.samples[k - 1].v);
    }
}

TEST_CASE("force rate limit holds between samples") {
    const auto v_ref = stepped_advisory(4000);
    DriverParams d;
    d.force_rate_limit = 2000.0;
    const auto traj = simulate_driver(VehicleParams{}, d, v_ref, 0.025, 100.0);
    for (std::size_t k = 1; k < traj.size(); ++k) {
        CHECK(std::abs(traj.samples[k].f_tr - traj.samples[k - 1].f_tr) <= 2000.0 * 0.025 + 1e-9);
    }
}

TEST_CASE("simulation input checks") {
    const std::vector<double> v_ref(100, 10.0);
    CHECK_THROWS_AS(simulate_driver(VehicleParams{}, DriverParams{}, v_ref, 0.025, 10.0), ValidationError);
    CHECK_NOTHROW(simulate_driver(VehicleParams{}, DriverParams{}, v_ref, 0.025, 2.5));
    CHECK_THROWS_AS(simulate_driver(VehicleParams{}, DriverParams{}, v_ref, 0.0, 2.5), ValidationError);

    VehicleParams heavy;
    heavy.mass = 0.0;
    CHECK_THROWS_AS(simulate_driver(heavy, DriverParams{}, v_ref, 0.025, 2.5), ValidationError);
    VehicleParams bounds;
    bounds.f_min = 10.0;
    CHECK_THROWS_AS(simulate_driver(bounds, DriverParams{}, v_ref, 0.025, 2.5), ValidationError);
    DriverParams slow;
    slow.reaction_delay = 5.0;
    CHECK_THROWS_AS(simulate_driver(VehicleParams{}, slow, v_ref, 0.025, 2.5), ValidationError);
    DriverParams nan_gain;
    nan_gain.kp = std::nan("");
    CHECK_THROWS_AS(simulate_driver(VehicleParams{}, nan_gain, v_ref, 0.025, 2.5), ValidationError);
}

TEST_CASE("derived drivers vary within the spread and are reproducible") {
    const DriverParams base;
    const auto a = derive_driver(base, 2025);
    const auto b = derive_driver(base, 2025);
    CHECK(a.kp == b.kp);
    CHECK(a.seed == 2025);
    CHECK(a.kp >= 0.8 * base.kp);
    CHECK(a.kp <= 1.2 * base.kp);
    CHECK(a.reaction_delay >= 0.8 * base.reaction_delay);
    CHECK(a.reaction_delay <= 1.2 * base.reaction_delay);
    CHECK(derive_driver(base, 2026).kp != a.kp);
    CHECK(derive_driver(base, 5, 0.0).kp == base.kp);
    CHECK_THROWS_AS(derive_driver(base, 5, 1.0), ValidationError);
}
