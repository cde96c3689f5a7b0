#pragma once

// Fixed points of the UKI map for linear forward models, and a numerical
// check that a surrogate within eps of the true linear map moves the fixed
// point by O(eps).

#include "auki/uki.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace auki {

struct LinearModel {
    Matrix G;           // Ny x Nm
    Matrix sigma_eta;   // Ny x Ny
    Matrix sigma_omega; // Nm x Nm
    double alpha = 1.0;
    Vector r0;
    Vector y;

    Eigen::Index parameter_dim() const noexcept { return G.cols(); }
    /// Throws unless G^T Sigma_eta^{-1} G and Sigma_omega are SPD and shapes agree.
    void validate() const;
    UKIConfig uki_config(std::size_t T) const;
};

/// Residuals of the equilibrium equations, relative to the size of C^{-1}
/// and C^{-1} r:
///   C^{-1}   = G^T S_eta^{-1} G + (alpha^2 C + S_omega)^{-1}
///   C^{-1} r = G^T S_eta^{-1} y + (alpha^2 C + S_omega)^{-1} (alpha r + (1 - alpha) r0)
struct FixedPointResiduals {
    double covariance = 0.0;
    double mean = 0.0;
};
FixedPointResiduals fixed_point_residuals(const LinearModel& model, const Vector& r, const Matrix& C);

struct FixedPoint {
    Vector r_inf;
    Matrix C_inf;
    FixedPointResiduals residuals;
    std::size_t iterations = 0;
};

/// Closed-form prediction + Gaussian conditioning for linear G.
GaussianState exact_linear_update(const LinearModel& model, const GaussianState& state);

/// Iterates exact_linear_update from (r0, Sigma_omega) until successive
/// iterates change by less than tol (relative). Throws after max_iter.
FixedPoint solve_fixed_point(const LinearModel& model, double tol = 1e-13, std::size_t max_iter = 200000);

struct ErrorBoundRow {
    double eps = 0.0;
    double mean_error = 0.0;       // ||r_inf - r_hat_inf||_2
    double precision_error = 0.0;  // ||C_inf^{-1} - C_hat_inf^{-1}||_2
    double surrogate_gram = 0.0;   // ||G_hat^T S_eta^{-1} G_hat||_2
};

struct ErrorBoundReport {
    std::vector<ErrorBoundRow> rows;
    double mean_slope = 0.0;
    double precision_slope = 0.0;
    double slope_lo = 0.8;
    double slope_hi = 1.2;
    bool gram_bounded_below = true;
    std::uint64_t direction_seed = 0;

    bool mean_slope_ok() const { return mean_slope >= slope_lo && mean_slope <= slope_hi; }
    bool precision_slope_ok() const { return precision_slope >= slope_lo && precision_slope <= slope_hi; }
    bool pass() const { return mean_slope_ok() && precision_slope_ok() && gram_bounded_below; }
    std::string to_json() const;
};

/// Unit-spectral-norm perturbation direction drawn from a seed.
Matrix unit_direction(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

/// For each eps, G_hat = G + eps * E; compares both fixed points and fits the
/// log-log slope of each error over the positive eps values.
ErrorBoundReport verify_error_bound(const LinearModel& model, const std::vector<double>& eps_list,
                                    const Matrix& direction);
ErrorBoundReport verify_error_bound(const LinearModel& model, const std::vector<double>& eps_list,
                                    std::uint64_t direction_seed);

/// Well-conditioned random model: G = I + 0.3 N(0,1) entries, S_eta = 0.1 I,
/// S_omega = I, r0 and y standard normal.
LinearModel random_linear_model(Eigen::Index ny, Eigen::Index nm, double alpha, std::uint64_t seed);

/// Least-squares slope of log(err) against log(eps).
double loglog_slope(const std::vector<double>& eps, const std::vector<double>& err);

} // namespace auki
