#include "koopdrive/model.hpp"

#include <cmath>

#include <json.hpp>

#include "koopdrive/io.hpp"

namespace koopdrive {

using Json = nlohmann::ordered_json;

namespace {

std::string shape(Eigen::Index rows, Eigen::Index cols) { return std::to_string(rows) + "x" + std::to_string(cols); }

}  // namespace

void KoopmanModel::validate() const {
    const auto n = lifted_dim();
    if (A.rows() != n || A.cols() != n) {
        throw ValidationError("A must be " + shape(n, n) + ", found " + shape(A.rows(), A.cols()));
    }
    if (B.rows() != n || B.cols() < 1) {
        throw ValidationError("B must be " + shape(n, 1) + ", found " + shape(B.rows(), B.cols()));
    }
    if (!A.allFinite() || !B.allFinite()) throw ValidationError("model matrices contain non-finite entries");
    if (!(sample_period > 0.0) || !std::isfinite(sample_period)) {
        throw ValidationError("model sample period must be positive");
    }
}

Eigen::MatrixXd KoopmanModel::stacked() const {
    Eigen::MatrixXd theta(A.rows(), A.cols() + B.cols());
    theta << A, B;
    return theta;
}

KoopmanModel KoopmanModel::from_stacked(LiftedBasis basis, const Eigen::MatrixXd& theta, double sample_period,
                                        std::string provenance) {
    const auto n = basis.lifted_dim();
    if (theta.rows() != n || theta.cols() <= n) {
        throw ValidationError("stacked [A B] must be " + std::to_string(n) + " x (" + std::to_string(n) +
                              " + m), found " + shape(theta.rows(), theta.cols()));
    }
    KoopmanModel m{std::move(basis), theta.leftCols(n), theta.rightCols(theta.cols() - n), sample_period,
                   std::move(provenance)};
    return m;
}

Eigen::VectorXd step(const KoopmanModel& model, const Eigen::Ref<const Eigen::VectorXd>& z, double u) {
    if (z.size() != model.lifted_dim()) {
        throw ValidationError("step: expected lifted vector of length " + std::to_string(model.lifted_dim()) +
                              ", got " + std::to_string(z.size()));
    }
    if (model.input_dim() != 1) throw ValidationError("step: model must have a scalar input");
    if (!std::isfinite(u)) throw ValidationError("step: non-finite input");
    return model.A * z + model.B.col(0) * u;
}

std::string_view to_string(RolloutMode mode) { return mode == RolloutMode::Lifted ? "lifted" : "relift"; }

RolloutMode parse_rollout_mode(std::string_view text) {
    if (text == "lifted") return RolloutMode::Lifted;
    if (text == "relift") return RolloutMode::Relift;
    throw ValidationError("unknown rollout mode '" + std::string(text) + "' (expected lifted or relift)");
}

std::vector<PhysicalState> rollout(const KoopmanModel& model, const PhysicalState& x0, std::span<const double> inputs,
                                   RolloutMode mode, const LiftFunction& lift_override) {
    if (inputs.empty()) throw ValidationError("rollout: input sequence is empty");
    const auto& basis = model.basis;
    auto lift = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return lift_override ? lift_override(x) : basis.lift(x);
    };
    auto diverged = [](std::size_t k) {
        return DivergenceError(k, "rollout diverged: non-finite prediction at step " + std::to_string(k));
    };

    std::vector<PhysicalState> out;
    out.reserve(inputs.size() + 1);

    Eigen::VectorXd z = lift(to_vector(x0));
    out.push_back(basis.project(z));
    Eigen::VectorXd next(z.size());
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (mode == RolloutMode::Relift && k > 0) z = lift(to_vector(out.back()));
        next.noalias() = model.A * z;
        next += model.B.col(0) * inputs[k];
        if (!next.allFinite()) throw diverged(k + 1);
        z.swap(next);
        const auto x = basis.project(z);
        if (!std::isfinite(x.v) || !std::isfinite(x.f_tr)) throw diverged(k + 1);
        out.push_back(x);
    }
    return out;
}

// Model file ---------------------------------------------------------------

namespace {

Json matrix_rows(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json vector_json(const Eigen::VectorXd& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

const Json& require(const Json& doc, const char* key) {
    if (!doc.contains(key)) {
        throw ModelFileError(ModelFileError::Kind::MissingField, std::string("model file: missing field '") + key + "'");
    }
    return doc.at(key);
}

double finite_number(const Json& value, const std::string& where) {
    if (value.is_null()) {
        throw ModelFileError(ModelFileError::Kind::NonFinite, "model file: non-finite entry at " + where);
    }
    if (!value.is_number()) {
        throw ModelFileError(ModelFileError::Kind::Parse, "model file: expected a number at " + where);
    }
    const double x = value.get<double>();
    if (!std::isfinite(x)) {
        throw ModelFileError(ModelFileError::Kind::NonFinite, "model file: non-finite entry at " + where);
    }
    return x;
}

Eigen::MatrixXd read_matrix(const Json& doc, const char* key, Eigen::Index rows, Eigen::Index cols) {
    const Json& m = require(doc, key);
    if (!m.is_array()) throw ModelFileError(ModelFileError::Kind::Parse, std::string("model file: ") + key + " must be an array of rows");
    const auto found_rows = static_cast<Eigen::Index>(m.size());
    Eigen::Index found_cols = found_rows > 0 && m[0].is_array() ? static_cast<Eigen::Index>(m[0].size()) : 0;
    for (const auto& row : m) {
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != found_cols) {
            throw ModelFileError(ModelFileError::Kind::DimensionMismatch,
                                 std::string("model file: ") + key + " has ragged rows");
        }
    }
    if (found_rows != rows || found_cols != cols) {
        throw ModelFileError(ModelFileError::Kind::DimensionMismatch,
                             std::string("model file: ") + key + " expected " + shape(rows, cols) + ", found " +
                                 shape(found_rows, found_cols));
    }
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            out(i, j) = finite_number(m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                                      std::string(key) + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
    return out;
}

Eigen::VectorXd read_vector(const Json& v, const std::string& where) {
    if (!v.is_array()) throw ModelFileError(ModelFileError::Kind::Parse, "model file: " + where + " must be an array");
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = finite_number(v[i], where);
    return out;
}

int read_int(const Json& doc, const char* key) {
    const Json& v = require(doc, key);
    if (!v.is_number_integer()) {
        throw ModelFileError(ModelFileError::Kind::Parse, std::string("model file: ") + key + " must be an integer");
    }
    return v.get<int>();
}

}  // namespace

std::string model_to_json(const KoopmanModel& model) {
    model.validate();
    Json doc;
    doc["format"] = "koopdrive-model";
    doc["schema_version"] = kModelSchemaVersion;
    doc["state_dim"] = model.basis.state_dim();
    doc["input_dim"] = model.input_dim();
    doc["max_degree"] = model.basis.max_degree();
    doc["lifted_dim"] = model.lifted_dim();
    Json monomials = Json::array();
    for (const auto& e : model.basis.monomials()) monomials.push_back(e);
    doc["monomials"] = std::move(monomials);
    if (const auto& s = model.basis.scaler()) {
        doc["scaler"] = {{"offset", vector_json(s->offset)}, {"scale", vector_json(s->scale)}};
    } else {
        doc["scaler"] = nullptr;
    }
    doc["sample_period_s"] = model.sample_period;
    doc["A"] = matrix_rows(model.A);
    doc["B"] = matrix_rows(model.B);
    doc["provenance"] = model.provenance;
    return doc.dump(2) + "\n";
}

KoopmanModel model_from_json(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ModelFileError(ModelFileError::Kind::Parse, std::string("model file: malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ModelFileError(ModelFileError::Kind::Parse, "model file: top level must be an object");

    const int version = read_int(doc, "schema_version");
    if (version != kModelSchemaVersion) {
        throw ModelFileError(ModelFileError::Kind::UnsupportedVersion,
                             "model file: unsupported schema_version " + std::to_string(version) + " (this build reads " +
                                 std::to_string(kModelSchemaVersion) + ")");
    }
    const int state_dim = read_int(doc, "state_dim");
    const int input_dim = read_int(doc, "input_dim");
    const int max_degree = read_int(doc, "max_degree");
    const int lifted_dim = read_int(doc, "lifted_dim");
    if (input_dim != 1) {
        throw ModelFileError(ModelFileError::Kind::DimensionMismatch,
                             "model file: input_dim must be 1, found " + std::to_string(input_dim));
    }

    std::vector<Exponents> monomials;
    const Json& mono = require(doc, "monomials");
    if (!mono.is_array()) throw ModelFileError(ModelFileError::Kind::Parse, "model file: monomials must be an array");
    try {
        for (const auto& e : mono) monomials.push_back(e.get<Exponents>());
    } catch (const nlohmann::json::exception&) {
        throw ModelFileError(ModelFileError::Kind::Parse, "model file: monomials must be integer arrays");
    }
    if (static_cast<int>(monomials.size()) != lifted_dim) {
        throw ModelFileError(ModelFileError::Kind::DimensionMismatch,
                             "model file: lifted_dim " + std::to_string(lifted_dim) + " but " +
                                 std::to_string(monomials.size()) + " monomials listed");
    }

    std::optional<AffineScaler> scaler;
    const Json& s = require(doc, "scaler");
    if (!s.is_null()) {
        scaler = AffineScaler{read_vector(require(s, "offset"), "scaler.offset"),
                              read_vector(require(s, "scale"), "scaler.scale")};
        if (scaler->offset.size() != state_dim || scaler->scale.size() != state_dim) {
            throw ModelFileError(ModelFileError::Kind::DimensionMismatch,
                                 "model file: scaler expected " + std::to_string(state_dim) + " entries");
        }
    }

    LiftedBasis basis = [&] {
        try {
            return LiftedBasis::from_monomials(state_dim, max_degree, std::move(monomials), std::move(scaler));
        } catch (const ValidationError& e) {
            throw ModelFileError(ModelFileError::Kind::DimensionMismatch, std::string("model file: ") + e.what());
        }
    }();

    const double period = finite_number(require(doc, "sample_period_s"), "sample_period_s");
    Eigen::MatrixXd a = read_matrix(doc, "A", lifted_dim, lifted_dim);
    Eigen::MatrixXd b = read_matrix(doc, "B", lifted_dim, input_dim);
    std::string provenance;
    if (doc.contains("provenance") && doc["provenance"].is_string()) provenance = doc["provenance"].get<std::string>();

    KoopmanModel model{std::move(basis), std::move(a), std::move(b), period, std::move(provenance)};
    model.validate();
    return model;
}

void save_model(const KoopmanModel& model, const std::filesystem::path& destination) {
    io::write_text_file_atomic(destination, model_to_json(model));
}

KoopmanModel load_model(const std::filesystem::path& source) { return model_from_json(io::read_text_file(source)); }

}  // namespace koopdrive
