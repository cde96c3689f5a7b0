#include "auki/grf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

namespace auki {

Grid2D::Grid2D(std::size_t nx_, std::size_t ny_) : nx(nx_), ny(ny_) {
    if (nx < 2 || ny < 2) throw Error("Grid2D: need at least 2 nodes per axis");
}

double Grid2D::trapezoid_weight(std::size_t i, std::size_t j) const noexcept {
    double wx = (i == 0 || i + 1 == nx) ? 0.5 : 1.0;
    double wy = (j == 0 || j + 1 == ny) ? 0.5 : 1.0;
    return wx * hx() * wy * hy();
}

Field::Field(const Grid2D& g, Vector v) : grid(g), values(std::move(v)) {
    if (static_cast<std::size_t>(values.size()) != grid.size())
        throw Error("Field: value count does not match grid");
}

double kl_eigenvalue(int k1, int k2, const PriorParams& p) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double k2sum = static_cast<double>(k1 * k1 + k2 * k2);
    return p.sigma * p.sigma * std::pow(pi2 * k2sum + p.tau * p.tau, -p.d);
}

KLBasis::KLBasis(const Grid2D& grid, std::vector<KLMode> modes, PriorParams params)
    : grid_(grid), modes_(std::move(modes)), params_(params) {
    synthesis_.resize(static_cast<Eigen::Index>(grid_.size()), static_cast<Eigen::Index>(modes_.size()));
    for (std::size_t k = 0; k < modes_.size(); ++k)
        synthesis_.col(static_cast<Eigen::Index>(k)) = std::sqrt(modes_[k].eigenvalue) * modes_[k].values;
}

KLBasis build_kl_basis(const Grid2D& grid, std::size_t n_modes, const PriorParams& params) {
    if (n_modes < 1) throw Error("build_kl_basis: n_modes must be >= 1");
    if (!(params.tau > 0.0) || !(params.d > 0.0) || !(params.sigma > 0.0))
        throw Error("build_kl_basis: tau, d and sigma must be positive");

    const int bound = 4 * static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_modes))));
    struct Pair {
        int k1, k2;
    };
    std::vector<Pair> pairs;
    pairs.reserve(static_cast<std::size_t>((bound + 1) * (bound + 1)));
    for (int k1 = 0; k1 <= bound; ++k1)
        for (int k2 = 0; k2 <= bound; ++k2) pairs.push_back({k1, k2});
    if (pairs.size() < n_modes) throw Error("build_kl_basis: n_modes exceeds the wave-number search bound");

    // lambda is strictly decreasing in k1^2 + k2^2, so ordering on the integer
    // wave-number magnitude is exact and avoids floating-point ties.
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        const int ma = a.k1 * a.k1 + a.k2 * a.k2;
        const int mb = b.k1 * b.k1 + b.k2 * b.k2;
        if (ma != mb) return ma < mb;
        return std::tie(a.k1, a.k2) < std::tie(b.k1, b.k2);
    });

    std::vector<KLMode> modes;
    modes.reserve(n_modes);
    const double pi = std::numbers::pi;
    for (std::size_t m = 0; m < n_modes; ++m) {
        const auto [k1, k2] = pairs[m];
        KLMode mode;
        mode.k1 = k1;
        mode.k2 = k2;
        mode.eigenvalue = kl_eigenvalue(k1, k2, params);
        const double norm = (k1 > 0 ? std::sqrt(2.0) : 1.0) * (k2 > 0 ? std::sqrt(2.0) : 1.0);
        mode.values = make_field(grid, [&](double x, double y) {
                          return norm * std::cos(k1 * pi * x) * std::cos(k2 * pi * y);
                      }).values;
        modes.push_back(std::move(mode));
    }
    return KLBasis(grid, std::move(modes), params);
}

Field sample_field(const KLBasis& basis, const Vector& zeta) {
    if (static_cast<std::size_t>(zeta.size()) > basis.size())
        throw Error("sample_field: more coefficients than basis modes");
    Field out(basis.grid());
    if (zeta.size() > 0) out.values = basis.synthesis().leftCols(zeta.size()) * zeta;
    return out;
}

Vector draw_prior(std::size_t n_modes, Rng& rng) {
    return standard_normal(rng, static_cast<Eigen::Index>(n_modes));
}

Vector draw_prior(std::size_t n_modes, std::uint64_t seed) {
    Rng rng(seed);
    return draw_prior(n_modes, rng);
}

Vector draw_uniform(std::size_t n_modes, double lo, double hi, Rng& rng) {
    std::uniform_real_distribution<double> unif(lo, hi);
    Vector v(static_cast<Eigen::Index>(n_modes));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = unif(rng);
    return v;
}

} // namespace auki
