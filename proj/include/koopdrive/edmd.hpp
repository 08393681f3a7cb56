#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "koopdrive/basis.hpp"
#include "koopdrive/error.hpp"
#include "koopdrive/model.hpp"
#include "koopdrive/trajectory.hpp"

namespace koopdrive {

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;

    // All positive, summing to 1 within 1e-9.
    void validate() const;
};

struct FitConfig {
    double ridge = 0.0;
    SplitFractions split;
    int max_degree = 3;
    // Fit an offset-free max-abs scaler on the training data before lifting.
    bool auto_scale = false;

    void validate() const;
};

// Snapshot matrices. Column k of x_plus is the lift of the sample that follows
// column k of x inside the same trajectory.
struct DataMatrices {
    Eigen::MatrixXd x;       // N x T
    Eigen::MatrixXd x_plus;  // N x T
    Eigen::MatrixXd u;       // m x T
    LiftedBasis basis;
    double sample_period = 0.0;

    Eigen::Index pairs() const { return x.cols(); }
};

// T = sum(len_i - 1); columns ordered by trajectory, then time.
DataMatrices build_matrices(std::span<const Trajectory> trajectories, const LiftedBasis& basis);

class RankDeficientError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

struct FitDiagnostics {
    Eigen::Index pairs = 0;
    int regressors = 0;       // N + m
    int numerical_rank = 0;
    double ridge = 0.0;
    double residual_fro = 0.0;     // ||X+ - A X - B U||_F
    double condition_number = 0.0;  // of the row-equilibrated regressor matrix
    double rank_tolerance = 0.0;
};

// Least-squares [A B] = X+ [X; U]^+ (ridge == 0) or the Tikhonov solution
// minimizing ||X+ - [A B][X; U]||_F^2 + ridge ||[A B]||_F^2.
//
// Regressor rows are equilibrated to unit norm, then the tall system is reduced
// with a Householder QR and solved through an SVD of the triangular factor.
// Singular values below max(T, N+m) * eps * sigma_max count as zero; with
// ridge == 0 any such value raises RankDeficientError.
KoopmanModel fit(const DataMatrices& matrices, const FitConfig& config, FitDiagnostics* diagnostics = nullptr);

struct DatasetSplit {
    std::vector<Trajectory> train;
    std::vector<Trajectory> val;
    std::vector<Trajectory> test;
};

// Cascades the trajectories into one sample stream and cuts it at
// floor(S * train) and floor(S * (train + val)). Cut pieces stay separate
// trajectories; pieces shorter than 2 samples are dropped.
DatasetSplit split_dataset(std::span<const Trajectory> trajectories, const SplitFractions& split);

// Offset-free scaler with scale = max |x_i| over the data (1 where all zero).
AffineScaler fit_max_abs_scaler(std::span<const Trajectory> trajectories);

}  // namespace koopdrive
