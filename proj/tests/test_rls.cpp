#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "koopdrive/rls.hpp"

#include "generators.hpp"

using namespace koopdrive;

namespace {

double asymmetry(const Eigen::MatrixXd& p) { return (p - p.transpose()).norm() / p.norm(); }

double min_eigenvalue(const Eigen::MatrixXd& p) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p);
    return es.eigenvalues().minCoeff();
}

Trajectory noisy_drive(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.05);
    Trajectory t;
    double v = 0.4, f = 0.1;
    for (std::size_t k = 0; k < n; ++k) {
        const double u = 0.5 + 0.3 * std::sin(0.05 * static_cast<double>(k));
        t.samples.push_back({0.025 * static_cast<double>(k), v, f, u});
        const double v_next = 0.95 * v + 0.04 * f + 0.01 * u + noise(rng);
        f = 0.9 * f + 0.08 * (u - v) + noise(rng);
        v = v_next;
    }
    return t;
}

}  // namespace

TEST_CASE("init_rls uses P0 = I / lambda") {
    const auto sys = testgen::random_lifted_system(1);
    const auto s = init_rls(sys.model, 0.9);
    CHECK(s.theta == sys.model.stacked());
    REQUIRE(s.P.rows() == 10);
    CHECK(s.P(0, 0) == doctest::Approx(1.1111111111111112));
    CHECK(s.P(3, 3) == 1.0 / 0.9);
    CHECK(s.P(0, 1) == 0.0);
    CHECK(s.update_count == 0);

    CHECK(init_rls(sys.model, 1.0).P == Eigen::MatrixXd::Identity(10, 10));
    CHECK_THROWS_AS(init_rls(sys.model, 0.0), ValidationError);
    CHECK_THROWS_AS(init_rls(sys.model, 1.5), ValidationError);
    CHECK_THROWS_AS(init_rls(sys.model, std::nan("")), ValidationError);
}

TEST_CASE("scalar gain example") {
    RlsState s = init_rls(Eigen::MatrixXd::Zero(1, 1), 0.9, 1.0 / 0.9);
    const Eigen::VectorXd z = Eigen::VectorXd::Ones(1);
    const Eigen::VectorXd target = Eigen::VectorXd::Ones(1);
    const double p0 = s.P(0, 0);
    const double gain = p0 / (0.9 + p0);
    CHECK(gain == doctest::Approx(0.5525).epsilon(1e-4));
    const double err = rls_update_regressor(s, z, target);
    CHECK(err == 1.0);
    CHECK(s.theta(0, 0) == doctest::Approx(gain).epsilon(1e-15));
    CHECK(s.P(0, 0) == doctest::Approx((p0 - gain * p0) / 0.9).epsilon(1e-15));
    CHECK(s.update_count == 1);
}

TEST_CASE("zero prediction error leaves theta unchanged but shrinks P") {
    const auto sys = testgen::random_lifted_system(2);
    RlsState s = init_rls(sys.model, 0.9);
    std::mt19937_64 rng(3);
    for (int k = 0; k < 100; ++k) {
        const Eigen::VectorXd z = testgen::gaussian(10, 1, rng);
        const Eigen::VectorXd target = sys.model.stacked() * z;
        const Eigen::MatrixXd before = s.theta;
        const double trace = s.P.trace();
        const double err = rls_update_regressor(s, z, target);
        CHECK(err == 0.0);
        CHECK(s.theta == before);
        if (k == 0) CHECK(s.P.trace() < trace / 0.9);
    }
}

TEST_CASE("an update reduces the error on the same sample") {
    const auto sys = testgen::random_lifted_system(4);
    std::mt19937_64 rng(5);
    for (double lambda : {0.9, 0.99, 1.0}) {
        RlsState s = init_rls(sys.model, lambda);
        for (int k = 0; k < 200; ++k) {
            const Eigen::VectorXd z = testgen::gaussian(10, 1, rng);
            const Eigen::VectorXd target = testgen::gaussian(9, 1, rng);
            const double before = rls_update_regressor(s, z, target);
            const double after = (target - s.theta * z).norm();
            CHECK(after < before);
        }
    }
}

TEST_CASE("P stays symmetric positive definite over many updates") {
    std::mt19937_64 rng(6);
    for (double lambda : {0.9, 0.99, 1.0}) {
        RlsState s = init_rls(Eigen::MatrixXd::Zero(9, 10), lambda, 1.0 / lambda);
        for (int k = 0; k < 10000; ++k) {
            const Eigen::VectorXd z = testgen::gaussian(10, 1, rng);
            const Eigen::VectorXd target = testgen::gaussian(9, 1, rng);
            rls_update_regressor(s, z, target);
            if (k % 500 == 499) {
                CHECK(asymmetry(s.P) <= 1e-9);
                CHECK(min_eigenvalue(s.P) > 0.0);
            }
        }
        CHECK(s.update_count == 10000);
    }
}

TEST_CASE("lambda = 1 with a large P0 matches the ridge batch fit") {
    const auto sys = testgen::random_lifted_system(7);
    const auto d = testgen::lifted_matrices(sys, 2000, 8, 0.1);
    RlsState s = init_rls(Eigen::MatrixXd::Zero(9, 10), 1.0, 1e6);
    Eigen::VectorXd z(10);
    for (Eigen::Index k = 0; k < d.pairs(); ++k) {
        z << d.x.col(k), d.u.col(k);
        rls_update_regressor(s, z, d.x_plus.col(k));
    }
    FitConfig cfg;
    cfg.ridge = 1e-6;
    const auto batch = fit(d, cfg).stacked();
    CHECK(testgen::relative_fro(s.theta, batch) < 1e-6);
}

TEST_CASE("failed updates leave the state untouched") {
    const auto sys = testgen::random_lifted_system(9);
    RlsState s = init_rls(sys.model, 0.9);
    const RlsState before = s;
    Eigen::VectorXd z = Eigen::VectorXd::Ones(10);
    z(3) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(rls_update_regressor(s, z, Eigen::VectorXd::Zero(9)), RlsUpdateError);
    CHECK(s.theta == before.theta);
    CHECK(s.P == before.P);
    CHECK(s.update_count == 0);

    // A negative-definite P gives a non-positive denominator.
    s.P = -Eigen::MatrixXd::Identity(10, 10);
    CHECK_THROWS_AS(rls_update_regressor(s, Eigen::VectorXd::Ones(10), Eigen::VectorXd::Zero(9)), RlsUpdateError);
    CHECK(s.theta == before.theta);
    CHECK_THROWS_AS(rls_update_regressor(s, Eigen::VectorXd::Ones(4), Eigen::VectorXd::Zero(9)), ValidationError);
}

TEST_CASE("update_tick runs one update per pair") {
    const auto sys = testgen::random_lifted_system(10);
    const auto traj = noisy_drive(81, 11);
    RlsState s = init_rls(sys.model, 0.9);

    CHECK(update_tick(s, sys.model.basis, std::span<const Sample>{}) == 0);
    CHECK(update_tick(s, sys.model.basis, std::span<const Sample>(traj.samples.data(), 1)) == 0);
    CHECK(s.theta == sys.model.stacked());

    const std::span<const Sample> tick(traj.samples.data(), 41);
    CHECK(update_tick(s, sys.model.basis, tick) == 40);
    CHECK(s.update_count == 40);

    // Same as calling rls_update pair by pair.
    RlsState manual = init_rls(sys.model, 0.9);
    for (std::size_t k = 0; k < 40; ++k) {
        rls_update(manual, sys.model.basis, traj.samples[k].state(), traj.samples[k].v_ref, traj.samples[k + 1].state());
    }
    CHECK(manual.theta == s.theta);
    CHECK(manual.P == s.P);
}

TEST_CASE("update_tick reports the failing sample") {
    const auto sys = testgen::random_lifted_system(12);
    auto traj = noisy_drive(41, 13);
    traj.samples[17].f_tr = std::numeric_limits<double>::infinity();
    RlsState s = init_rls(sys.model, 0.9);
    try {
        update_tick(s, sys.model.basis, traj.samples);
        FAIL("expected an update error");
    } catch (const RlsUpdateError& e) {
        CHECK(e.sample_index() == 16);
    }
    CHECK(s.update_count == 16);
}

TEST_CASE("online updater ticks once per cadence without losing pairs") {
    const auto sys = testgen::random_lifted_system(14);
    const auto traj = noisy_drive(401, 15);
    CHECK(samples_per_cadence(1.0, 0.025) == 40);
    OnlineUpdater updater(init_rls(sys.model, 0.99), sys.model.basis, 40);
    std::size_t ticks = 0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const bool ticked = updater.push(traj.samples[k]);
        // Ticks complete on samples 40, 80, ...
        CHECK(ticked == (k > 0 && k % 40 == 0));
        ticks += ticked ? 1 : 0;
    }
    CHECK(ticks == 10);
    CHECK(updater.ticks() == 10);
    CHECK(updater.state().update_count == 400);

    RlsState batch = init_rls(sys.model, 0.99);
    update_tick(batch, sys.model.basis, traj.samples);
    CHECK(batch.theta == updater.state().theta);
}

TEST_CASE("updates are deterministic") {
    const auto sys = testgen::random_lifted_system(16);
    const auto traj = noisy_drive(300, 17);
    RlsState a = init_rls(sys.model, 0.9);
    RlsState b = init_rls(sys.model, 0.9);
    update_tick(a, sys.model.basis, traj.samples);
    update_tick(b, sys.model.basis, traj.samples);
    CHECK(a.theta == b.theta);
    CHECK(a.P == b.P);
}

TEST_CASE("snapshot carries the estimate into a model") {
    const auto sys = testgen::random_lifted_system(18);
    RlsState s = init_rls(sys.model, 1.0);
    s.theta(0, 0) += 1.0;
    s.theta(2, 9) -= 2.0;
    const auto m = s.snapshot(sys.model);
    CHECK(m.A(0, 0) == sys.model.A(0, 0) + 1.0);
    CHECK(m.B(2, 0) == sys.model.B(2, 0) - 2.0);
    CHECK(m.basis == sys.model.basis);
}
