#pragma once

// Gaussian random-field prior on the unit square via a truncated
// Karhunen-Loeve expansion of sigma^2 (-Laplace + tau^2)^(-d) with
// homogeneous Neumann boundary conditions.

#include "auki/common.hpp"

#include <span>
#include <vector>

namespace auki {

/// Uniform node grid on [0,1]^2. Node (i,j) sits at (i/(nx-1), j/(ny-1)).
struct Grid2D {
    std::size_t nx = 2;
    std::size_t ny = 2;

    Grid2D() = default;
    Grid2D(std::size_t nx_, std::size_t ny_);

    std::size_t size() const noexcept { return nx * ny; }
    std::size_t index(std::size_t i, std::size_t j) const noexcept { return i + nx * j; }
    double hx() const noexcept { return 1.0 / static_cast<double>(nx - 1); }
    double hy() const noexcept { return 1.0 / static_cast<double>(ny - 1); }
    double x(std::size_t i) const noexcept { return static_cast<double>(i) * hx(); }
    double y(std::size_t j) const noexcept { return static_cast<double>(j) * hy(); }

    /// Trapezoidal quadrature weight of node (i,j); weights sum to 1.
    double trapezoid_weight(std::size_t i, std::size_t j) const noexcept;

    friend bool operator==(const Grid2D&, const Grid2D&) = default;
};

/// Nodal values on a Grid2D, x-fastest.
struct Field {
    Grid2D grid;
    Vector values;

    Field() = default;
    explicit Field(const Grid2D& g) : grid(g), values(Vector::Zero(static_cast<Eigen::Index>(g.size()))) {}
    Field(const Grid2D& g, Vector v);

    double& at(std::size_t i, std::size_t j) { return values[static_cast<Eigen::Index>(grid.index(i, j))]; }
    double at(std::size_t i, std::size_t j) const { return values[static_cast<Eigen::Index>(grid.index(i, j))]; }
};

/// Field whose values are f(x, y) at every node.
template <class F>
Field make_field(const Grid2D& g, F&& f) {
    Field out(g);
    for (std::size_t j = 0; j < g.ny; ++j)
        for (std::size_t i = 0; i < g.nx; ++i) out.at(i, j) = f(g.x(i), g.y(j));
    return out;
}

struct KLMode {
    int k1 = 0;
    int k2 = 0;
    double eigenvalue = 0.0;
    Vector values; // eigenfunction at grid nodes, continuum L2-normalized
};

struct PriorParams {
    double tau = 3.0;
    double d = 2.0;
    double sigma = 1.0;
};

/// Ordered Karhunen-Loeve eigenpairs on a grid. Immutable after construction.
class KLBasis {
public:
    KLBasis(const Grid2D& grid, std::vector<KLMode> modes, PriorParams params);

    const Grid2D& grid() const noexcept { return grid_; }
    const PriorParams& params() const noexcept { return params_; }
    std::size_t size() const noexcept { return modes_.size(); }
    const KLMode& mode(std::size_t k) const { return modes_.at(k); }
    const std::vector<KLMode>& modes() const noexcept { return modes_; }

    /// Columns are sqrt(lambda_k) psi_k at the nodes; field = synthesis() * zeta.
    const Matrix& synthesis() const noexcept { return synthesis_; }

private:
    Grid2D grid_;
    std::vector<KLMode> modes_;
    PriorParams params_;
    Matrix synthesis_;
};

/// Eigenvalue of the covariance operator for wave pair (k1, k2).
double kl_eigenvalue(int k1, int k2, const PriorParams& p);

/// The n_modes largest-eigenvalue modes; ties broken lexicographically by (k1, k2).
KLBasis build_kl_basis(const Grid2D& grid, std::size_t n_modes, const PriorParams& params);

/// m(x) = sum_k zeta_k sqrt(lambda_k) psi_k(x) over the first zeta.size() modes.
Field sample_field(const KLBasis& basis, const Vector& zeta);

/// i.i.d. N(0,1) coefficients.
Vector draw_prior(std::size_t n_modes, Rng& rng);
Vector draw_prior(std::size_t n_modes, std::uint64_t seed);

/// i.i.d. U[lo, hi] coefficients (out-of-distribution truths).
Vector draw_uniform(std::size_t n_modes, double lo, double hi, Rng& rng);

} // namespace auki
