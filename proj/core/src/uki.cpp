#include "auki/uki.hpp"

#include <algorithm>
#include <cmath>

namespace auki {

Matrix default_sigma_omega(double alpha, const Matrix& C0) { return (2.0 - alpha * alpha) * C0; }

UKIConfig make_uki_config(double alpha, const GaussianState& initial, const ObservationData& data, std::size_t T) {
    UKIConfig cfg;
    cfg.alpha = alpha;
    cfg.sigma_omega = default_sigma_omega(alpha, initial.C);
    cfg.sigma_eta = data.noise_covariance();
    cfg.r0 = initial.r;
    cfg.T = T;
    return cfg;
}

UnscentedWeights unscented_weights(std::size_t n) {
    if (n == 0) throw Error("unscented_weights: dimension must be positive");
    const double dn = static_cast<double>(n);
    UnscentedWeights w;
    w.a = std::min(std::sqrt(4.0 / dn), 1.0);
    w.lambda = w.a * w.a * dn - dn;
    w.c = std::sqrt(dn + w.lambda);
    w.Wc = 1.0 / (2.0 * (dn + w.lambda));
    return w;
}

SigmaEnsemble sigma_points(const GaussianState& state) {
    const Eigen::Index n = state.r.size();
    if (state.C.rows() != n || state.C.cols() != n) throw Error("sigma_points: covariance shape mismatch");
    Eigen::LLT<Matrix> llt(state.C);
    if (llt.info() != Eigen::Success) throw Error("sigma_points: covariance is not symmetric positive definite");
    const Matrix L = llt.matrixL();
    SigmaEnsemble ens;
    ens.weights = unscented_weights(static_cast<std::size_t>(n));
    ens.points.resize(n, 2 * n + 1);
    ens.points.col(0) = state.r;
    for (Eigen::Index j = 0; j < n; ++j) {
        ens.points.col(1 + j) = state.r + ens.weights.c * L.col(j);
        ens.points.col(1 + n + j) = state.r - ens.weights.c * L.col(j);
    }
    return ens;
}

BatchForward pointwise(PointForward f, int workers) {
    return [f = std::move(f), workers](const Matrix& params) {
        std::vector<Vector> outs(static_cast<std::size_t>(params.cols()));
        parallel_for(outs.size(), workers, [&](std::size_t k) { outs[k] = f(params.col(static_cast<Eigen::Index>(k))); });
        if (outs.empty()) return Matrix();
        Matrix out(outs.front().size(), params.cols());
        for (std::size_t k = 0; k < outs.size(); ++k) {
            if (outs[k].size() != out.rows()) throw Error("pointwise: inconsistent output length");
            out.col(static_cast<Eigen::Index>(k)) = outs[k];
        }
        return out;
    };
}

GaussianState uki_step(const GaussianState& state, const BatchForward& forward, const Vector& y, const UKIConfig& cfg,
                       StepDiagnostics* diag) {
    const Eigen::Index n = state.r.size();
    if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw Error("uki_step: alpha must lie in (0, 1]");
    if (cfg.sigma_omega.rows() != n || cfg.r0.size() != n) throw Error("uki_step: config dimension mismatch");
    if (cfg.sigma_eta.rows() != y.size()) throw Error("uki_step: noise covariance does not match data");

    GaussianState pred;
    pred.r = cfg.alpha * state.r + (1.0 - cfg.alpha) * cfg.r0;
    pred.C = cfg.alpha * cfg.alpha * state.C + cfg.sigma_omega;

    const SigmaEnsemble ens = sigma_points(pred);
    const Matrix ys = forward(ens.points);
    if (ys.cols() != ens.points.cols() || ys.rows() != y.size())
        throw Error("uki_step: forward map returned the wrong shape");
    if (!ys.allFinite()) throw Error("uki_step: non-finite forward output");

    const Vector y_hat = ys.col(0);
    const double W = ens.weights.Wc;
    Matrix Cmy = Matrix::Zero(n, y.size());
    Matrix Cyy = cfg.sigma_eta;
    // Fixed index order keeps the reduction reproducible.
    for (Eigen::Index j = 1; j <= 2 * n; ++j) {
        const Vector dm = ens.points.col(j) - pred.r;
        const Vector dy = ys.col(j) - y_hat;
        Cmy.noalias() += W * dm * dy.transpose();
        Cyy.noalias() += W * dy * dy.transpose();
    }
    Eigen::LLT<Matrix> llt(Cyy);
    if (llt.info() != Eigen::Success) throw Error("uki_step: predicted observation covariance is singular");

    const Vector innovation = y - y_hat;
    GaussianState next;
    next.r = pred.r + Cmy * llt.solve(innovation);
    next.C = pred.C - Cmy * llt.solve(Cmy.transpose());
    const double asym = (next.C - next.C.transpose()).cwiseAbs().maxCoeff();
    next.C = (0.5 * (next.C + next.C.transpose())).eval();
    if (!next.r.allFinite() || !next.C.allFinite()) throw Error("uki_step: non-finite update");
    if (diag) {
        diag->asymmetry = asym;
        diag->innovation_norm = innovation.norm();
    }
    return next;
}

UkiRun run_uki(const GaussianState& initial, const BatchForward& forward, const Vector& y, const UKIConfig& cfg) {
    if (cfg.T < 1) throw Error("run_uki: T must be at least 1");
    UkiRun run;
    run.states.reserve(cfg.T);
    GaussianState cur = initial;
    for (std::size_t n = 0; n < cfg.T; ++n) {
        try {
            cur = uki_step(cur, forward, y, cfg);
        } catch (const Error& e) {
            run.failure = "step " + std::to_string(n + 1) + ": " + e.what();
            break;
        }
        run.states.push_back(cur);
    }
    return run;
}

} // namespace auki
