#pragma once

// Unscented Kalman Inversion over an arbitrary parameter-to-observation map.

#include "auki/common.hpp"
#include "auki/observe.hpp"

#include <functional>
#include <string>
#include <vector>

namespace auki {

/// N(r, C) approximation of the current iterate.
struct GaussianState {
    Vector r;
    Matrix C;
};

struct UKIConfig {
    double alpha = 1.0;
    Matrix sigma_omega; // artificial evolution covariance
    Matrix sigma_eta;   // observation noise covariance
    Vector r0;          // regularization anchor in the prediction step
    std::size_t T = 20;
};

/// Sigma_omega = (2 - alpha^2) C0.
Matrix default_sigma_omega(double alpha, const Matrix& C0);

/// Config for a run starting at (r0, C0) against `data`.
UKIConfig make_uki_config(double alpha, const GaussianState& initial, const ObservationData& data, std::size_t T);

/// Modified unscented transform constants for dimension n (kappa = 0):
/// a = min(sqrt(4/n), 1), lambda = a^2 n - n, c = sqrt(n + lambda), Wc = 1/(2(n + lambda)).
struct UnscentedWeights {
    double a = 0, lambda = 0, c = 0, Wc = 0;
};
UnscentedWeights unscented_weights(std::size_t n);

struct SigmaEnsemble {
    Matrix points; // n x (2n+1); column 0 is the mean
    UnscentedWeights weights;
};

/// Symmetric sigma points from the Cholesky factor of C. Throws on non-SPD C.
SigmaEnsemble sigma_points(const GaussianState& state);

/// Parameter columns in, observation columns out.
using BatchForward = std::function<Matrix(const Matrix&)>;
using PointForward = std::function<Vector(const Vector&)>;

/// Adapts a single-point map; columns are evaluated independently (possibly
/// on several workers) and assembled in column order.
BatchForward pointwise(PointForward f, int workers = 1);

struct StepDiagnostics {
    double asymmetry = 0.0; // max |C - C^T| before symmetrization
    double innovation_norm = 0.0;
};

/// One prediction-analysis-update cycle. The forward map is called once
/// with all 2n+1 sigma points.
GaussianState uki_step(const GaussianState& state, const BatchForward& forward, const Vector& y, const UKIConfig& cfg,
                       StepDiagnostics* diag = nullptr);

struct UkiRun {
    std::vector<GaussianState> states; // states after each completed step
    std::string failure;               // empty when all T steps succeeded

    bool ok() const noexcept { return failure.empty(); }
};

/// T steps; a failing step truncates the trajectory and records why.
UkiRun run_uki(const GaussianState& initial, const BatchForward& forward, const Vector& y, const UKIConfig& cfg);

} // namespace auki
