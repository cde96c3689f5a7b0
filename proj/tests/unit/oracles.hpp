#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the code paths they check.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Exact Gaussian conditioning for y = G m + b + eta after the prediction step.
struct KalmanResult {
    Vec r;
    Mat C;
};

inline KalmanResult linear_kalman(const Vec& r, const Mat& C, const Mat& G, const Vec& b, const Vec& y,
                                  double alpha, const Mat& sigma_omega, const Mat& sigma_eta, const Vec& r0) {
    const Vec rh = alpha * r + (1.0 - alpha) * r0;
    const Mat Ch = alpha * alpha * C + sigma_omega;
    const Mat S = G * Ch * G.transpose() + sigma_eta;
    const Mat K = Ch * G.transpose() * S.inverse();
    KalmanResult out;
    out.r = rh + K * (y - G * rh - b);
    out.C = Ch - K * S * K.transpose();
    return out;
}

/// Sequential greedy selection written directly from its definition: each
/// step scores every unselected candidate from scratch.
template <class Map>
std::vector<std::size_t> greedy_brute_force(const std::vector<Vec>& pool, Map&& G, const Vec& anchor, std::size_t Q,
                                            double lambda) {
    std::vector<std::size_t> chosen;
    std::vector<bool> used(pool.size(), false);
    for (std::size_t q = 0; q < Q; ++q) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = pool.size();
        for (std::size_t k = 0; k < pool.size(); ++k) {
            if (used[k]) continue;
            double d = 0.0;
            for (std::size_t s : chosen) d = std::max(d, (G(pool[k]) - G(pool[s])).norm());
            const double score = d - lambda * (pool[k] - anchor).norm();
            if (score > best) {
                best = score;
                arg = k;
            }
        }
        used[arg] = true;
        chosen.push_back(arg);
    }
    return chosen;
}

/// Node-grid Neumann Laplacian (-Delta) with mirror ghost nodes on an n x n
/// grid over [0,1]^2, x-fastest. Not symmetric; similar to a symmetric matrix
/// through the trapezoid weights.
inline Mat neumann_laplacian(int n) {
    const double h = 1.0 / (n - 1);
    const int N = n * n;
    Mat A = Mat::Zero(N, N);
    auto id = [n](int i, int j) { return i + n * j; };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const int c = id(i, j);
            auto add = [&](int ii, int jj) {
                // Mirror across the boundary.
                if (ii < 0) ii = 1;
                if (ii >= n) ii = n - 2;
                if (jj < 0) jj = 1;
                if (jj >= n) jj = n - 2;
                A(c, id(ii, jj)) -= 1.0 / (h * h);
                A(c, c) += 1.0 / (h * h);
            };
            add(i - 1, j);
            add(i + 1, j);
            add(i, j - 1);
            add(i, j + 1);
        }
    return A;
}

/// Least-squares slope of log(err) against log(h).
inline double observed_order(const std::vector<double>& h, const std::vector<double>& err) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(h.size());
    for (std::size_t k = 0; k < h.size(); ++k) {
        const double x = std::log(h[k]), y = std::log(err[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline Mat random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> nd;
    Mat M(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) M(i, j) = nd(rng);
    return M;
}

inline Mat random_spd(std::mt19937_64& rng, Eigen::Index n, double shift = 0.5) {
    const Mat A = random_matrix(rng, n, n);
    return A * A.transpose() / static_cast<double>(n) + shift * Mat::Identity(n, n);
}

} // namespace oracle
