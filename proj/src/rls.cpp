#include "koopdrive/rls.hpp"

#include <cmath>
#include <string>

namespace koopdrive {

namespace {

void check_lambda(double lambda) {
    if (!std::isfinite(lambda) || !(lambda > 0.0) || lambda > 1.0) {
        throw ValidationError("forgetting factor must lie in (0, 1], got " + std::to_string(lambda));
    }
}

}  // namespace

KoopmanModel RlsState::snapshot(const KoopmanModel& like) const {
    return KoopmanModel::from_stacked(like.basis, theta, like.sample_period,
                                      "rls snapshot: updates=" + std::to_string(update_count) +
                                          " lambda=" + std::to_string(lambda));
}

RlsState init_rls(const Eigen::MatrixXd& theta, double lambda, double p0_scale) {
    check_lambda(lambda);
    if (!std::isfinite(p0_scale) || !(p0_scale > 0.0)) throw ValidationError("P0 scale must be positive");
    if (!theta.allFinite()) throw ValidationError("initial [A B] contains non-finite entries");
    const auto p = theta.cols();
    return RlsState{theta, p0_scale * Eigen::MatrixXd::Identity(p, p), lambda, 0};
}

RlsState init_rls(const KoopmanModel& model, double lambda, double p0_scale) {
    model.validate();
    return init_rls(model.stacked(), lambda, p0_scale);
}

RlsState init_rls(const KoopmanModel& model, double lambda) {
    check_lambda(lambda);
    return init_rls(model, lambda, 1.0 / lambda);
}

double rls_update_regressor(RlsState& state, const Eigen::Ref<const Eigen::VectorXd>& z,
                            const Eigen::Ref<const Eigen::VectorXd>& target) {
    const auto index = state.update_count;
    if (z.size() != state.theta.cols() || target.size() != state.theta.rows()) {
        throw ValidationError("rls update: regressor/target dimensions do not match [A B]");
    }
    if (!z.allFinite() || !target.allFinite()) {
        throw RlsUpdateError(index, "rls update " + std::to_string(index) + ": non-finite input");
    }

    const Eigen::VectorXd eps = target - state.theta * z;
    const Eigen::VectorXd pz = state.P * z;
    const double denom = state.lambda + z.dot(pz);
    if (!std::isfinite(denom) || !(denom > 0.0)) {
        throw RlsUpdateError(index, "rls update " + std::to_string(index) + ": invalid gain denominator");
    }
    const Eigen::VectorXd gain = pz / denom;

    Eigen::MatrixXd theta = state.theta;
    theta.noalias() += eps * gain.transpose();
    Eigen::MatrixXd p = state.P;
    p.noalias() -= gain * pz.transpose();  // K z' P, with P z = pz since P is symmetric
    p /= state.lambda;
    p = (0.5 * (p + p.transpose())).eval();
    if (!theta.allFinite() || !p.allFinite()) {
        throw RlsUpdateError(index, "rls update " + std::to_string(index) + ": non-finite result");
    }

    state.theta.swap(theta);
    state.P.swap(p);
    ++state.update_count;
    return eps.norm();
}

double rls_update(RlsState& state, const LiftedBasis& basis, const PhysicalState& x_k, double u_k,
                  const PhysicalState& x_next) {
    if (!std::isfinite(x_k.v) || !std::isfinite(x_k.f_tr) || !std::isfinite(u_k) || !std::isfinite(x_next.v) ||
        !std::isfinite(x_next.f_tr)) {
        throw RlsUpdateError(state.update_count, "rls update " + std::to_string(state.update_count) +
                                                     ": non-finite input");
    }
    const auto n = basis.lifted_dim();
    Eigen::VectorXd z(state.theta.cols());
    z.head(n) = basis.lift(x_k);
    z.tail(z.size() - n).setConstant(u_k);
    return rls_update_regressor(state, z, basis.lift(x_next));
}

std::size_t update_tick(RlsState& state, const LiftedBasis& basis, std::span<const Sample> buffer) {
    if (buffer.size() < 2) return 0;
    for (std::size_t k = 0; k + 1 < buffer.size(); ++k) {
        try {
            rls_update(state, basis, buffer[k].state(), buffer[k].v_ref, buffer[k + 1].state());
        } catch (const RlsUpdateError& e) {
            throw RlsUpdateError(k, "tick sample " + std::to_string(k) + ": " + e.what());
        }
    }
    return buffer.size() - 1;
}

OnlineUpdater::OnlineUpdater(RlsState state, LiftedBasis basis, std::size_t samples_per_tick)
    : state_(std::move(state)), basis_(std::move(basis)), samples_per_tick_(samples_per_tick) {
    if (samples_per_tick_ == 0) throw ValidationError("online updater needs at least one sample per tick");
    buffer_.reserve(samples_per_tick_ + 1);
}

bool OnlineUpdater::push(const Sample& sample) {
    buffer_.push_back(sample);
    if (buffer_.size() < samples_per_tick_ + 1) return false;
    update_tick(state_, basis_, buffer_);
    const Sample last = buffer_.back();
    buffer_.clear();
    buffer_.push_back(last);
    ++ticks_;
    return true;
}

std::size_t samples_per_cadence(double cadence_s, double sample_period_s) {
    if (!(cadence_s > 0.0) || !(sample_period_s > 0.0) || !std::isfinite(cadence_s)) {
        throw ValidationError("cadence and sample period must be positive");
    }
    const auto n = static_cast<std::size_t>(std::llround(cadence_s / sample_period_s));
    if (n == 0) throw ValidationError("cadence shorter than one sample period");
    return n;
}

}  // namespace koopdrive
