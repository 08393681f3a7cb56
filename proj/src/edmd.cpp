#include "koopdrive/edmd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "koopdrive/io.hpp"

namespace koopdrive {

void SplitFractions::validate() const {
    for (double f : {train, val, test}) {
        if (!std::isfinite(f) || !(f > 0.0)) {
            throw ValidationError("split fractions must all be positive");
        }
    }
    if (std::abs(train + val + test - 1.0) > 1e-9) throw ValidationError("split fractions must sum to 1");
}

void FitConfig::validate() const {
    if (!std::isfinite(ridge) || ridge < 0.0) throw ValidationError("ridge must be a nonnegative finite number");
    if (max_degree < 1) throw ValidationError("max_degree must be >= 1");
    split.validate();
}

DataMatrices build_matrices(std::span<const Trajectory> trajectories, const LiftedBasis& basis) {
    if (trajectories.empty()) throw ValidationError("build_matrices: no trajectories");
    if (basis.state_dim() != 2) throw ValidationError("build_matrices: basis must lift (v, f_tr)");
    const double period = trajectories.front().sample_period;
    Eigen::Index total = 0;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const auto& traj = trajectories[i];
        if (traj.size() < 2) {
            throw ValidationError("build_matrices: trajectory " + std::to_string(i) + " has fewer than 2 samples");
        }
        if (!same_sample_period(traj.sample_period, period)) {
            throw ValidationError("build_matrices: trajectory " + std::to_string(i) + " has sample period " +
                                  io::format_double(traj.sample_period) + " s, expected " + io::format_double(period));
        }
        total += static_cast<Eigen::Index>(traj.size() - 1);
    }

    const int n = basis.lifted_dim();
    DataMatrices out{Eigen::MatrixXd(n, total), Eigen::MatrixXd(n, total), Eigen::MatrixXd(1, total), basis, period};
    Eigen::Index col = 0;
    for (const auto& traj : trajectories) {
        Eigen::VectorXd current = basis.lift(traj.samples.front().state());
        for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
            Eigen::VectorXd next = basis.lift(traj.samples[k + 1].state());
            out.x.col(col) = current;
            out.x_plus.col(col) = next;
            out.u(0, col) = traj.samples[k].v_ref;
            current = std::move(next);
            ++col;
        }
    }
    return out;
}

KoopmanModel fit(const DataMatrices& matrices, const FitConfig& config, FitDiagnostics* diagnostics) {
    if (!std::isfinite(config.ridge) || config.ridge < 0.0) {
        throw ValidationError("ridge must be a nonnegative finite number");
    }
    const Eigen::Index n = matrices.x.rows();
    const Eigen::Index m = matrices.u.rows();
    const Eigen::Index t = matrices.pairs();
    const Eigen::Index p = n + m;
    if (matrices.x_plus.rows() != n || matrices.x_plus.cols() != t || matrices.u.cols() != t) {
        throw ValidationError("fit: data matrices have inconsistent shapes");
    }
    if (n != matrices.basis.lifted_dim()) throw ValidationError("fit: data matrices do not match the basis");
    if (t == 0) throw ValidationError("fit: no transition pairs");
    if (t < p && config.ridge == 0.0) {
        throw RankDeficientError("fit: " + std::to_string(t) + " pairs cannot determine " + std::to_string(p) +
                                 " regressors; use ridge > 0");
    }

    // Regressors as rows of Z^T (T x p), equilibrated column-wise.
    Eigen::MatrixXd zt(t, p);
    zt.leftCols(n) = matrices.x.transpose();
    zt.rightCols(m) = matrices.u.transpose();
    Eigen::VectorXd norms = zt.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < p; ++j)
        if (!(norms(j) > 0.0)) norms(j) = 1.0;
    zt = zt * norms.cwiseInverse().asDiagonal();

    Eigen::MatrixXd y = matrices.x_plus.transpose();  // T x N
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(zt);
    const Eigen::Index k = std::min(t, p);
    Eigen::MatrixXd qty = qr.householderQ().transpose() * y;

    const bool ridged = config.ridge > 0.0;
    const Eigen::Index rows = k + (ridged ? p : 0);
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(rows, p);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(rows, n);
    lhs.topRows(k) = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    rhs.topRows(k) = qty.topRows(k);
    if (ridged) {
        lhs.bottomRows(p).diagonal() = std::sqrt(config.ridge) * norms.cwiseInverse();
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(lhs, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();
    const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
    const double tol = static_cast<double>(std::max(t, p)) * std::numeric_limits<double>::epsilon() * sigma_max;
    int rank = 0;
    for (Eigen::Index i = 0; i < sigma.size(); ++i)
        if (sigma(i) > tol) ++rank;
    if (!ridged && rank < p) {
        throw RankDeficientError("fit: regressor matrix [X; U] is rank deficient (numerical rank " +
                                 std::to_string(rank) + " of " + std::to_string(p) +
                                 "); the data lack excitation, use ridge > 0");
    }

    Eigen::VectorXd inv_sigma = Eigen::VectorXd::Zero(sigma.size());
    for (Eigen::Index i = 0; i < sigma.size(); ++i)
        if (sigma(i) > tol) inv_sigma(i) = 1.0 / sigma(i);
    Eigen::MatrixXd phi = svd.matrixV() * inv_sigma.asDiagonal() * svd.matrixU().transpose() * rhs;  // p x N
    Eigen::MatrixXd theta = (norms.cwiseInverse().asDiagonal() * phi).transpose();                // N x p

    if (!theta.allFinite()) throw NumericalError("fit: solution contains non-finite entries");

    Eigen::MatrixXd residual = matrices.x_plus - theta.leftCols(n) * matrices.x - theta.rightCols(m) * matrices.u;

    // Condition number of the equilibrated regressors alone (R from the QR).
    Eigen::MatrixXd r_only = lhs.topRows(k);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd_r(r_only);
    const auto& sr = svd_r.singularValues();
    const double smin = sr.size() == p ? sr(sr.size() - 1) : 0.0;
    const double cond = smin > 0.0 ? sr(0) / smin : std::numeric_limits<double>::infinity();

    FitDiagnostics diag;
    diag.pairs = t;
    diag.regressors = static_cast<int>(p);
    diag.numerical_rank = rank;
    diag.ridge = config.ridge;
    diag.residual_fro = residual.norm();
    diag.condition_number = cond;
    diag.rank_tolerance = tol;
    if (diagnostics) *diagnostics = diag;

    std::ostringstream prov;
    prov << "edmd fit: pairs=" << t << " ridge=" << io::format_double(config.ridge)
         << " residual_fro=" << io::format_double(diag.residual_fro) << " rank=" << rank << "/" << p
         << " condition=" << io::format_double(cond);
    return KoopmanModel::from_stacked(matrices.basis, theta, matrices.sample_period, prov.str());
}

DatasetSplit split_dataset(std::span<const Trajectory> trajectories, const SplitFractions& split) {
    split.validate();
    std::size_t total = 0;
    for (const auto& t : trajectories) total += t.size();
    const auto b1 = static_cast<std::size_t>(std::floor(static_cast<double>(total) * split.train));
    const auto b2 = static_cast<std::size_t>(std::floor(static_cast<double>(total) * (split.train + split.val)));

    DatasetSplit out;
    std::size_t global = 0;
    for (const auto& traj : trajectories) {
        Trajectory piece[3];
        for (auto& p : piece) p.sample_period = traj.sample_period;
        for (const auto& s : traj.samples) {
            const int bucket = global < b1 ? 0 : (global < b2 ? 1 : 2);
            piece[bucket].samples.push_back(s);
            ++global;
        }
        std::vector<Trajectory>* targets[3] = {&out.train, &out.val, &out.test};
        for (int b = 0; b < 3; ++b)
            if (piece[b].size() >= 2) targets[b]->push_back(std::move(piece[b]));
    }
    return out;
}

AffineScaler fit_max_abs_scaler(std::span<const Trajectory> trajectories) {
    double vmax = 0.0;
    double fmax = 0.0;
    for (const auto& traj : trajectories)
        for (const auto& s : traj.samples) {
            vmax = std::max(vmax, std::abs(s.v));
            fmax = std::max(fmax, std::abs(s.f_tr));
        }
    AffineScaler scaler{Eigen::VectorXd::Zero(2), Eigen::VectorXd(2)};
    scaler.scale << (vmax > 0.0 ? vmax : 1.0), (fmax > 0.0 ? fmax : 1.0);
    return scaler;
}

}  // namespace koopdrive
