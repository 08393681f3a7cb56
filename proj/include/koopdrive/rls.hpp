#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "koopdrive/basis.hpp"
#include "koopdrive/error.hpp"
#include "koopdrive/model.hpp"
#include "koopdrive/trajectory.hpp"

namespace koopdrive {

// Recursive least-squares estimate of theta = [A B] with exponential forgetting.
// Single writer: one context updates it, readers take snapshots by value.
struct RlsState {
    Eigen::MatrixXd theta;  // N x (N + m)
    Eigen::MatrixXd P;      // (N + m) x (N + m), symmetric positive definite
    double lambda = 1.0;
    std::size_t update_count = 0;

    // Copy of `like` with [A B] replaced by the current estimate.
    KoopmanModel snapshot(const KoopmanModel& like) const;
};

// theta = [A B] of the offline model, P0 = I / lambda.
RlsState init_rls(const KoopmanModel& model, double lambda);
// Same theta, caller-chosen P0 = p0_scale * I.
RlsState init_rls(const KoopmanModel& model, double lambda, double p0_scale);
RlsState init_rls(const Eigen::MatrixXd& theta, double lambda, double p0_scale);

class RlsUpdateError : public NumericalError {
public:
    RlsUpdateError(std::size_t sample_index, const std::string& message)
        : NumericalError(message), sample_index_(sample_index) {}
    std::size_t sample_index() const { return sample_index_; }

private:
    std::size_t sample_index_;
};

// One step on a raw regressor z = [psi(x_k); u_k] and target psi(x_{k+1}):
//   eps = target - theta z
//   K   = P z / (lambda + z' P z)
//   theta += eps K'
//   P   = (P - K z' P) / lambda, then P = (P + P') / 2
// Returns ||eps||. On non-finite inputs or a non-positive denominator the
// state is left untouched and RlsUpdateError is thrown.
double rls_update_regressor(RlsState& state, const Eigen::Ref<const Eigen::VectorXd>& z,
                            const Eigen::Ref<const Eigen::VectorXd>& target);

double rls_update(RlsState& state, const LiftedBasis& basis, const PhysicalState& x_k, double u_k,
                  const PhysicalState& x_next);

// Sequential updates over consecutive pairs of `buffer`, in time order.
// Returns the number of updates applied (buffer.size() - 1, or 0).
std::size_t update_tick(RlsState& state, const LiftedBasis& basis, std::span<const Sample> buffer);

// Feeds samples as they arrive and runs update_tick once per cadence. A tick
// holds samples_per_tick + 1 samples (samples_per_tick pairs); the last
// sample carries over as the first of the next tick, so no pair is lost.
class OnlineUpdater {
public:
    OnlineUpdater(RlsState state, LiftedBasis basis, std::size_t samples_per_tick);

    // Returns true when the push completed a tick.
    bool push(const Sample& sample);

    const RlsState& state() const { return state_; }
    std::size_t ticks() const { return ticks_; }
    std::size_t samples_per_tick() const { return samples_per_tick_; }

private:
    RlsState state_;
    LiftedBasis basis_;
    std::size_t samples_per_tick_;
    std::vector<Sample> buffer_;
    std::size_t ticks_ = 0;
};

// Number of samples in one cadence interval, rounded to the nearest integer.
std::size_t samples_per_cadence(double cadence_s, double sample_period_s);

}  // namespace koopdrive
