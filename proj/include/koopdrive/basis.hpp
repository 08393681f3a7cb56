#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace koopdrive {

// Longitudinal state of the vehicle: speed [m/s] and signed traction force [N].
struct PhysicalState {
    double v = 0.0;
    double f_tr = 0.0;

    friend bool operator==(const PhysicalState&, const PhysicalState&) = default;
};

Eigen::VectorXd to_vector(const PhysicalState& x);
PhysicalState to_physical(const Eigen::Ref<const Eigen::VectorXd>& x);

// Per-state affine map applied before lifting: s = (x - offset) / scale.
struct AffineScaler {
    Eigen::VectorXd offset;
    Eigen::VectorXd scale;

    void validate(int state_dim) const;
};

using Exponents = std::vector<int>;

// Polynomial observables of total degree 1..max_degree.
//
// Ordering: the state_dim identity monomials come first, so the projection
// back to physical states is C = [I 0]. Each higher degree k then lists the
// mixed monomials in descending lexicographic order of their exponent vectors
// followed by the pure powers x_1^k .. x_n^k. For two states and degree 3:
//   v, F, vF, v^2, F^2, v^2 F, v F^2, v^3, F^3
//
// Immutable once built; every member is const.
class LiftedBasis {
public:
    // Throws ValidationError for state_dim < 1 or max_degree < 1.
    static LiftedBasis enumerate(int state_dim, int max_degree);

    // Rebuilds a basis from stored metadata, checking the structural invariants
    // (identity monomials first, no constant, no duplicates, degrees in range).
    static LiftedBasis from_monomials(int state_dim, int max_degree, std::vector<Exponents> monomials,
                                      std::optional<AffineScaler> scaler = std::nullopt);

    LiftedBasis with_scaler(AffineScaler scaler) const;

    int state_dim() const { return state_dim_; }
    int max_degree() const { return max_degree_; }
    int lifted_dim() const { return static_cast<int>(monomials_.size()); }
    const std::vector<Exponents>& monomials() const { return monomials_; }
    const std::optional<AffineScaler>& scaler() const { return scaler_; }
    int monomial_degree(int index) const;

    // psi(x). Throws ValidationError on wrong length or non-finite entries.
    Eigen::VectorXd lift(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    Eigen::VectorXd lift(const PhysicalState& x) const;

    // First state_dim entries of z, mapped back through the scaler if present.
    Eigen::VectorXd project_vector(const Eigen::Ref<const Eigen::VectorXd>& z) const;
    PhysicalState project(const Eigen::Ref<const Eigen::VectorXd>& z) const;

    // C = [I_n 0], n x N, acting in (scaled) lifted coordinates.
    Eigen::MatrixXd projection_matrix() const;

    friend bool operator==(const LiftedBasis& a, const LiftedBasis& b);

private:
    LiftedBasis(int state_dim, int max_degree, std::vector<Exponents> monomials,
                std::optional<AffineScaler> scaler);

    int state_dim_;
    int max_degree_;
    std::vector<Exponents> monomials_;
    std::optional<AffineScaler> scaler_;
};

inline LiftedBasis enumerate_basis(int state_dim, int max_degree) {
    return LiftedBasis::enumerate(state_dim, max_degree);
}

}  // namespace koopdrive
