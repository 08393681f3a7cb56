#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "koopdrive/basis.hpp"
#include "koopdrive/error.hpp"

namespace koopdrive {

// Controlled linear predictor in lifted coordinates:
//   z_{k+1} = A z_k + B u_k,   x_k = C z_k,   C = [I 0].
struct KoopmanModel {
    LiftedBasis basis;
    Eigen::MatrixXd A;  // N x N
    Eigen::MatrixXd B;  // N x m
    double sample_period = 0.025;
    std::string provenance;

    int lifted_dim() const { return basis.lifted_dim(); }
    int input_dim() const { return static_cast<int>(B.cols()); }
    Eigen::MatrixXd C() const { return basis.projection_matrix(); }

    // Shapes consistent and all entries finite.
    void validate() const;

    // [A B], N x (N + m).
    Eigen::MatrixXd stacked() const;
    static KoopmanModel from_stacked(LiftedBasis basis, const Eigen::MatrixXd& theta, double sample_period,
                                     std::string provenance = {});
};

// A z + B u for the scalar advisory input.
Eigen::VectorXd step(const KoopmanModel& model, const Eigen::Ref<const Eigen::VectorXd>& z, double u);

enum class RolloutMode {
    Lifted,  // propagate z linearly, project at each step
    Relift,  // project, re-lift, then propagate one step
};

std::string_view to_string(RolloutMode mode);
RolloutMode parse_rollout_mode(std::string_view text);

// Thrown when a rollout produces a non-finite value.
class DivergenceError : public NumericalError {
public:
    DivergenceError(std::size_t step_index, const std::string& message)
        : NumericalError(message), step_index_(step_index) {}
    std::size_t step_index() const { return step_index_; }

private:
    std::size_t step_index_;
};

using LiftFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Predicts inputs.size() steps ahead from x0. The result has inputs.size() + 1
// states and starts with the (projected) initial state. `lift_override`
// replaces basis.lift when given; tests use it to observe lift calls.
std::vector<PhysicalState> rollout(const KoopmanModel& model, const PhysicalState& x0, std::span<const double> inputs,
                                   RolloutMode mode = RolloutMode::Lifted, const LiftFunction& lift_override = {});

// Model file ---------------------------------------------------------------

inline constexpr int kModelSchemaVersion = 1;

class ModelFileError : public ValidationError {
public:
    enum class Kind { Parse, MissingField, UnsupportedVersion, DimensionMismatch, NonFinite };
    ModelFileError(Kind kind, const std::string& message) : ValidationError(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

std::string model_to_json(const KoopmanModel& model);
KoopmanModel model_from_json(std::string_view text);
void save_model(const KoopmanModel& model, const std::filesystem::path& destination);
KoopmanModel load_model(const std::filesystem::path& source);

}  // namespace koopdrive
