#include "auki/linear_theory.hpp"

#include <json.hpp>

#include <cmath>

namespace auki {
namespace {

double spectral_norm(const Matrix& A) {
    if (A.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(A);
    return svd.singularValues()(0);
}

Matrix spd_inverse(const Matrix& A, const char* who) {
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success) throw Error(std::string(who) + ": matrix is not positive definite");
    return llt.solve(Matrix::Identity(A.rows(), A.cols()));
}

} // namespace

void LinearModel::validate() const {
    const Eigen::Index ny = G.rows(), nm = G.cols();
    if (sigma_eta.rows() != ny || sigma_eta.cols() != ny || sigma_omega.rows() != nm || sigma_omega.cols() != nm ||
        r0.size() != nm || y.size() != ny)
        throw Error("LinearModel: inconsistent dimensions");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("LinearModel: alpha must lie in (0, 1]");
    const Matrix gram = G.transpose() * spd_inverse(sigma_eta, "LinearModel") * G;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success || spectral_norm(gram) <= 0.0)
        throw Error("LinearModel: G^T Sigma_eta^{-1} G is not positive definite");
    spd_inverse(sigma_omega, "LinearModel");
}

UKIConfig LinearModel::uki_config(std::size_t T) const {
    UKIConfig cfg;
    cfg.alpha = alpha;
    cfg.sigma_omega = sigma_omega;
    cfg.sigma_eta = sigma_eta;
    cfg.r0 = r0;
    cfg.T = T;
    return cfg;
}

FixedPointResiduals fixed_point_residuals(const LinearModel& model, const Vector& r, const Matrix& C) {
    const Matrix Cinv = spd_inverse(C, "fixed_point_residuals");
    const Matrix eta_inv = spd_inverse(model.sigma_eta, "fixed_point_residuals");
    const Matrix pred_inv =
        spd_inverse(model.alpha * model.alpha * C + model.sigma_omega, "fixed_point_residuals");
    const Matrix cov_rhs = model.G.transpose() * eta_inv * model.G + pred_inv;
    const Vector mean_lhs = Cinv * r;
    const Vector mean_rhs = model.G.transpose() * eta_inv * model.y +
                            pred_inv * (model.alpha * r + (1.0 - model.alpha) * model.r0);
    FixedPointResiduals res;
    res.covariance = (Cinv - cov_rhs).norm() / std::max(Cinv.norm(), 1e-300);
    res.mean = (mean_lhs - mean_rhs).norm() / std::max(mean_lhs.norm(), 1.0);
    return res;
}

GaussianState exact_linear_update(const LinearModel& model, const GaussianState& state) {
    const Vector r_hat = model.alpha * state.r + (1.0 - model.alpha) * model.r0;
    const Matrix C_hat = model.alpha * model.alpha * state.C + model.sigma_omega;
    const Matrix Cmy = C_hat * model.G.transpose();
    const Matrix Cyy = model.G * Cmy + model.sigma_eta;
    Eigen::LLT<Matrix> llt(Cyy);
    if (llt.info() != Eigen::Success) throw Error("exact_linear_update: singular observation covariance");
    GaussianState next;
    next.r = r_hat + Cmy * llt.solve(model.y - model.G * r_hat);
    next.C = C_hat - Cmy * llt.solve(Cmy.transpose());
    next.C = (0.5 * (next.C + next.C.transpose())).eval();
    return next;
}

FixedPoint solve_fixed_point(const LinearModel& model, double tol, std::size_t max_iter) {
    model.validate();
    GaussianState cur{model.r0, model.sigma_omega};
    for (std::size_t it = 1; it <= max_iter; ++it) {
        GaussianState next = exact_linear_update(model, cur);
        const double dr = (next.r - cur.r).norm() / std::max(1.0, next.r.norm());
        const double dC = (next.C - cur.C).norm() / std::max(1e-300, next.C.norm());
        cur = std::move(next);
        if (dr < tol && dC < tol) {
            FixedPoint fp;
            fp.r_inf = cur.r;
            fp.C_inf = cur.C;
            fp.residuals = fixed_point_residuals(model, cur.r, cur.C);
            fp.iterations = it;
            return fp;
        }
    }
    throw Error("solve_fixed_point: no convergence after " + std::to_string(max_iter) + " iterations");
}

Matrix unit_direction(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix E(rows, cols);
    std::normal_distribution<double> normal;
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) E(i, j) = normal(rng);
    return E / spectral_norm(E);
}

double loglog_slope(const std::vector<double>& eps, const std::vector<double>& err) {
    if (eps.size() != err.size() || eps.size() < 2) throw Error("loglog_slope: need at least two points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(eps.size());
    for (std::size_t k = 0; k < eps.size(); ++k) {
        const double x = std::log(eps[k]), y = std::log(err[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ErrorBoundReport verify_error_bound(const LinearModel& model, const std::vector<double>& eps_list,
                                    const Matrix& direction) {
    if (direction.rows() != model.G.rows() || direction.cols() != model.G.cols())
        throw Error("verify_error_bound: direction shape mismatch");
    const FixedPoint truth = solve_fixed_point(model);
    const Matrix truth_prec = spd_inverse(truth.C_inf, "verify_error_bound");
    const Matrix eta_inv = spd_inverse(model.sigma_eta, "verify_error_bound");

    ErrorBoundReport report;
    std::vector<double> eps_pos, mean_err, prec_err;
    for (double eps : eps_list) {
        if (!(eps >= 0.0)) throw Error("verify_error_bound: eps must be non-negative");
        LinearModel pert = model;
        pert.G = model.G + eps * direction;
        ErrorBoundRow row;
        row.eps = eps;
        row.surrogate_gram = spectral_norm(pert.G.transpose() * eta_inv * pert.G);
        if (!(row.surrogate_gram > 0.0)) report.gram_bounded_below = false;
        const FixedPoint fp = solve_fixed_point(pert);
        row.mean_error = (truth.r_inf - fp.r_inf).norm();
        row.precision_error = spectral_norm(truth_prec - spd_inverse(fp.C_inf, "verify_error_bound"));
        report.rows.push_back(row);
        if (eps > 0.0) {
            eps_pos.push_back(eps);
            mean_err.push_back(row.mean_error);
            prec_err.push_back(row.precision_error);
        }
    }
    if (eps_pos.size() >= 2) {
        report.mean_slope = loglog_slope(eps_pos, mean_err);
        report.precision_slope = loglog_slope(eps_pos, prec_err);
    }
    return report;
}

ErrorBoundReport verify_error_bound(const LinearModel& model, const std::vector<double>& eps_list,
                                    std::uint64_t direction_seed) {
    auto report =
        verify_error_bound(model, eps_list, unit_direction(model.G.rows(), model.G.cols(), direction_seed));
    report.direction_seed = direction_seed;
    return report;
}

LinearModel random_linear_model(Eigen::Index ny, Eigen::Index nm, double alpha, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal;
    LinearModel m;
    m.G = Matrix::Identity(ny, nm);
    for (Eigen::Index j = 0; j < nm; ++j)
        for (Eigen::Index i = 0; i < ny; ++i) m.G(i, j) += 0.3 * normal(rng);
    m.sigma_eta = 0.1 * Matrix::Identity(ny, ny);
    m.sigma_omega = Matrix::Identity(nm, nm);
    m.alpha = alpha;
    m.r0 = standard_normal(rng, nm);
    m.y = standard_normal(rng, ny);
    return m;
}

std::string ErrorBoundReport::to_json() const {
    nlohmann::json j;
    j["direction_seed"] = direction_seed;
    j["slope_bounds"] = {slope_lo, slope_hi};
    j["mean_slope"] = mean_slope;
    j["precision_slope"] = precision_slope;
    j["mean_slope_ok"] = mean_slope_ok();
    j["precision_slope_ok"] = precision_slope_ok();
    j["surrogate_gram_bounded_below"] = gram_bounded_below;
    j["pass"] = pass();
    auto& rs = j["rows"] = nlohmann::json::array();
    for (const auto& r : rows)
        rs.push_back({{"eps", r.eps},
                      {"mean_error", r.mean_error},
                      {"precision_error", r.precision_error},
                      {"surrogate_gram_norm", r.surrogate_gram}});
    // Existence-level constants of the a-priori estimate are reported by
    // name only; the check is on the eps-scaling they imply.
    j["bound_constants"] = {"K1", "K2", "H", "H_eta", "H_y", "C1", "C2", "beta"};
    return j.dump(2);
}

} // namespace auki
