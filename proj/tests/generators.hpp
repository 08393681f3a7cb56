// Data generators shared by the unit and acceptance tests. Each one is its
// own oracle: the system that produced the data is known exactly.
#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "koopdrive/basis.hpp"
#include "koopdrive/edmd.hpp"
#include "koopdrive/model.hpp"
#include "koopdrive/trajectory.hpp"

namespace testgen {

struct LiftedSystem {
    koopdrive::KoopmanModel model;
};

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double std = 1.0) {
    std::normal_distribution<double> n(0.0, std);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
    return m;
}

// Random stable z+ = A z + B u on the two-state cubic basis (N = 9, m = 1),
// spectral radius 0.9.
inline LiftedSystem random_lifted_system(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd a = gaussian(9, 9, rng);
    const double radius = a.eigenvalues().cwiseAbs().maxCoeff();
    a *= 0.9 / radius;
    koopdrive::KoopmanModel model{koopdrive::enumerate_basis(2, 3), a, gaussian(9, 1, rng)};
    return {model};
}

struct LiftedRun {
    std::vector<koopdrive::PhysicalState> states;  // C z_k, k = 0..steps
    std::vector<double> inputs;                    // u_k, k = 0..steps-1
};

// Propagates the lifted system from z0 = lift(x0) with random inputs.
inline LiftedRun simulate_lifted(const LiftedSystem& sys, std::size_t steps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 0.5);
    LiftedRun run;
    Eigen::VectorXd z = sys.model.basis.lift(koopdrive::PhysicalState{n(rng), n(rng)});
    run.states.push_back(sys.model.basis.project(z));
    for (std::size_t k = 0; k < steps; ++k) {
        const double u = n(rng);
        z = sys.model.A * z + sys.model.B * u;
        run.inputs.push_back(u);
        run.states.push_back(sys.model.basis.project(z));
    }
    return run;
}

// Snapshot matrices of the lifted system with independent Gaussian regressor
// columns, optionally with Gaussian noise on the targets.
inline koopdrive::DataMatrices lifted_matrices(const LiftedSystem& sys, Eigen::Index pairs, std::uint64_t seed,
                                               double noise = 0.0) {
    std::mt19937_64 rng(seed);
    koopdrive::DataMatrices d{gaussian(9, pairs, rng), Eigen::MatrixXd(), gaussian(1, pairs, rng), sys.model.basis,
                              sys.model.sample_period};
    d.x_plus = sys.model.A * d.x + sys.model.B * d.u;
    if (noise > 0.0) d.x_plus += gaussian(9, pairs, rng, noise);
    return d;
}

// x+ = M x keeps every homogeneous degree block closed, so lift(M x) =
// A lift(x) for a block-diagonal A. A is recovered from 9 generic points.
inline koopdrive::KoopmanModel manifold_model(const Eigen::Matrix2d& m, std::uint64_t seed) {
    const auto basis = koopdrive::enumerate_basis(2, 3);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd psi(9, 9), psi_next(9, 9);
    for (int j = 0; j < 9; ++j) {
        const Eigen::Vector2d x(u(rng), u(rng));
        const Eigen::Vector2d y = m * x;
        psi.col(j) = basis.lift(koopdrive::PhysicalState{x(0), x(1)});
        psi_next.col(j) = basis.lift(koopdrive::PhysicalState{y(0), y(1)});
    }
    const Eigen::MatrixXd a = psi.transpose().fullPivLu().solve(psi_next.transpose()).transpose();
    return {basis, a, Eigen::MatrixXd::Zero(9, 1)};
}

// Physical trajectory of x+ = M x with an arbitrary (ignored) advisory column.
inline koopdrive::Trajectory manifold_trajectory(const Eigen::Matrix2d& m, koopdrive::PhysicalState x0,
                                                 std::size_t samples, double period = 0.025) {
    koopdrive::Trajectory t;
    t.sample_period = period;
    Eigen::Vector2d x(x0.v, x0.f_tr);
    for (std::size_t k = 0; k < samples; ++k) {
        t.samples.push_back({static_cast<double>(k) * period, x(0), x(1), 0.5 * static_cast<double>(k % 7)});
        x = m * x;
    }
    return t;
}

inline double relative_fro(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
    return (estimate - truth).norm() / truth.norm();
}

}  // namespace testgen
