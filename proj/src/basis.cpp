#include "koopdrive/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "koopdrive/error.hpp"

namespace koopdrive {

Eigen::VectorXd to_vector(const PhysicalState& x) {
    Eigen::VectorXd out(2);
    out << x.v, x.f_tr;
    return out;
}

PhysicalState to_physical(const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != 2) {
        throw ValidationError("physical state needs 2 entries, got " + std::to_string(x.size()));
    }
    return {x(0), x(1)};
}

void AffineScaler::validate(int state_dim) const {
    if (offset.size() != state_dim || scale.size() != state_dim) {
        throw ValidationError("scaler dimension mismatch: expected " + std::to_string(state_dim) +
                              " offsets and scales");
    }
    for (int i = 0; i < state_dim; ++i) {
        if (!std::isfinite(offset(i)) || !std::isfinite(scale(i)) || !(scale(i) > 0.0)) {
            throw ValidationError("scaler entries must be finite with positive scale");
        }
    }
}

namespace {

int total_degree(const Exponents& e) { return std::accumulate(e.begin(), e.end(), 0); }

// All exponent vectors of length n with total degree exactly k, in descending
// lexicographic order.
void compositions(int n, int k, Exponents& current, int pos, std::vector<Exponents>& out) {
    if (pos == n - 1) {
        current[pos] = k;
        out.push_back(current);
        return;
    }
    for (int e = k; e >= 0; --e) {
        current[pos] = e;
        compositions(n, k - e, current, pos + 1, out);
    }
}

bool is_pure_power(const Exponents& e) {
    return std::count_if(e.begin(), e.end(), [](int x) { return x != 0; }) == 1;
}

}  // namespace

LiftedBasis::LiftedBasis(int state_dim, int max_degree, std::vector<Exponents> monomials,
                         std::optional<AffineScaler> scaler)
    : state_dim_(state_dim), max_degree_(max_degree), monomials_(std::move(monomials)), scaler_(std::move(scaler)) {}

LiftedBasis LiftedBasis::enumerate(int state_dim, int max_degree) {
    if (state_dim < 1) throw ValidationError("state_dim must be >= 1");
    if (max_degree < 1) throw ValidationError("max_degree must be >= 1");

    std::vector<Exponents> monomials;
    for (int k = 1; k <= max_degree; ++k) {
        std::vector<Exponents> all;
        Exponents current(static_cast<std::size_t>(state_dim), 0);
        compositions(state_dim, k, current, 0, all);
        for (const auto& e : all)
            if (!is_pure_power(e)) monomials.push_back(e);
        for (int i = 0; i < state_dim; ++i) {
            Exponents pure(static_cast<std::size_t>(state_dim), 0);
            pure[static_cast<std::size_t>(i)] = k;
            monomials.push_back(pure);
        }
    }
    return LiftedBasis(state_dim, max_degree, std::move(monomials), std::nullopt);
}

LiftedBasis LiftedBasis::from_monomials(int state_dim, int max_degree, std::vector<Exponents> monomials,
                                        std::optional<AffineScaler> scaler) {
    if (state_dim < 1) throw ValidationError("state_dim must be >= 1");
    if (max_degree < 1) throw ValidationError("max_degree must be >= 1");
    if (monomials.size() < static_cast<std::size_t>(state_dim)) {
        throw ValidationError("basis has fewer monomials than states");
    }
    std::set<Exponents> seen;
    for (std::size_t j = 0; j < monomials.size(); ++j) {
        const auto& e = monomials[j];
        if (e.size() != static_cast<std::size_t>(state_dim)) {
            throw ValidationError("monomial " + std::to_string(j) + " has wrong exponent count");
        }
        if (std::any_of(e.begin(), e.end(), [](int x) { return x < 0; })) {
            throw ValidationError("monomial " + std::to_string(j) + " has a negative exponent");
        }
        const int deg = total_degree(e);
        if (deg < 1) throw ValidationError("constant monomial is not allowed");
        if (deg > max_degree) {
            throw ValidationError("monomial " + std::to_string(j) + " exceeds max_degree");
        }
        if (!seen.insert(e).second) {
            throw ValidationError("duplicate monomial at index " + std::to_string(j));
        }
        if (j < static_cast<std::size_t>(state_dim)) {
            for (int i = 0; i < state_dim; ++i) {
                if (e[static_cast<std::size_t>(i)] != (i == static_cast<int>(j) ? 1 : 0)) {
                    throw ValidationError("first monomials must be the identity observables");
                }
            }
        }
    }
    if (scaler) scaler->validate(state_dim);
    return LiftedBasis(state_dim, max_degree, std::move(monomials), std::move(scaler));
}

LiftedBasis LiftedBasis::with_scaler(AffineScaler scaler) const {
    scaler.validate(state_dim_);
    return LiftedBasis(state_dim_, max_degree_, monomials_, std::move(scaler));
}

int LiftedBasis::monomial_degree(int index) const {
    return total_degree(monomials_.at(static_cast<std::size_t>(index)));
}

Eigen::VectorXd LiftedBasis::lift(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != state_dim_) {
        throw ValidationError("lift: expected state of length " + std::to_string(state_dim_) + ", got " +
                              std::to_string(x.size()));
    }
    if (!x.allFinite()) throw ValidationError("lift: non-finite state");

    Eigen::VectorXd s = x;
    if (scaler_) s = (x - scaler_->offset).cwiseQuotient(scaler_->scale);

    // powers(i, p) = s_i^p
    Eigen::MatrixXd powers(state_dim_, max_degree_ + 1);
    for (int i = 0; i < state_dim_; ++i) {
        powers(i, 0) = 1.0;
        for (int p = 1; p <= max_degree_; ++p) powers(i, p) = powers(i, p - 1) * s(i);
    }
    Eigen::VectorXd z(lifted_dim());
    for (int j = 0; j < lifted_dim(); ++j) {
        const auto& e = monomials_[static_cast<std::size_t>(j)];
        double value = 1.0;
        for (int i = 0; i < state_dim_; ++i) {
            const int p = e[static_cast<std::size_t>(i)];
            if (p != 0) value *= powers(i, p);
        }
        z(j) = value;
    }
    return z;
}

Eigen::VectorXd LiftedBasis::lift(const PhysicalState& x) const {
    if (state_dim_ != 2) throw ValidationError("lift(PhysicalState) needs a 2-state basis");
    return lift(to_vector(x));
}

Eigen::VectorXd LiftedBasis::project_vector(const Eigen::Ref<const Eigen::VectorXd>& z) const {
    if (z.size() != lifted_dim()) {
        throw ValidationError("project: expected lifted vector of length " + std::to_string(lifted_dim()) +
                              ", got " + std::to_string(z.size()));
    }
    Eigen::VectorXd x = z.head(state_dim_);
    if (scaler_) x = x.cwiseProduct(scaler_->scale) + scaler_->offset;
    return x;
}

PhysicalState LiftedBasis::project(const Eigen::Ref<const Eigen::VectorXd>& z) const {
    if (state_dim_ != 2) throw ValidationError("project to PhysicalState needs a 2-state basis");
    return to_physical(project_vector(z));
}

Eigen::MatrixXd LiftedBasis::projection_matrix() const {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(state_dim_, lifted_dim());
    c.leftCols(state_dim_).setIdentity();
    return c;
}

bool operator==(const LiftedBasis& a, const LiftedBasis& b) {
    if (a.state_dim_ != b.state_dim_ || a.max_degree_ != b.max_degree_ || a.monomials_ != b.monomials_) return false;
    if (a.scaler_.has_value() != b.scaler_.has_value()) return false;
    if (a.scaler_) {
        return a.scaler_->offset == b.scaler_->offset && a.scaler_->scale == b.scaler_->scale;
    }
    return true;
}

}  // namespace koopdrive
