#include "auki/linear_theory.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace auki;

namespace {

LinearModel scalar_model(double y) {
    LinearModel m;
    m.G = Matrix::Ones(1, 1);
    m.sigma_eta = Matrix::Ones(1, 1);
    m.sigma_omega = Matrix::Ones(1, 1);
    m.alpha = 1.0;
    m.r0 = Vector::Zero(1);
    m.y = Vector::Constant(1, y);
    return m;
}

BatchForward linear_forward(const Matrix& G) {
    return [G](const Matrix& p) { return Matrix(G * p); };
}

} // namespace

TEST_CASE("scalar identity model has the golden-ratio fixed point") {
    const FixedPoint fp = solve_fixed_point(scalar_model(1.3));
    const double c = (std::sqrt(5.0) - 1.0) / 2.0;
    CHECK(fp.C_inf(0, 0) == doctest::Approx(c).epsilon(1e-12));
    CHECK(fp.r_inf[0] == doctest::Approx(1.3).epsilon(1e-12));
    CHECK(fp.residuals.covariance < 1e-12);
    CHECK(fp.residuals.mean < 1e-12);

    const auto res = fixed_point_residuals(scalar_model(1.3), Vector::Constant(1, 1.3), Matrix::Constant(1, 1, c));
    CHECK(res.covariance < 1e-14);
    CHECK(res.mean < 1e-14);
    const auto off = fixed_point_residuals(scalar_model(1.3), Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 1.0));
    CHECK(off.covariance > 0.1);
}

TEST_CASE("exact linear update matches the independent Kalman oracle") {
    std::mt19937_64 g(7);
    const LinearModel m = random_linear_model(5, 3, 0.6, 4);
    const GaussianState s{oracle::random_matrix(g, 3, 1).col(0), oracle::random_spd(g, 3)};
    const GaussianState got = exact_linear_update(m, s);
    const auto want = oracle::linear_kalman(s.r, s.C, m.G, Vector::Zero(5), m.y, m.alpha, m.sigma_omega,
                                            m.sigma_eta, m.r0);
    CHECK((got.r - want.r).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((got.C - want.C).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("UKI on a linear map converges to the fixed point") {
    for (double alpha : {1.0, 0.5}) {
        const LinearModel m = random_linear_model(6, 4, alpha, 12);
        const FixedPoint fp = solve_fixed_point(m);
        const UkiRun run =
            run_uki({m.r0, m.sigma_omega}, linear_forward(m.G), m.y, m.uki_config(100));
        REQUIRE(run.ok());
        CHECK((run.states.back().r - fp.r_inf).norm() / fp.r_inf.norm() < 1e-8);
        CHECK((run.states.back().C - fp.C_inf).norm() / fp.C_inf.norm() < 1e-8);
        Eigen::SelfAdjointEigenSolver<Matrix> es(fp.C_inf);
        CHECK(es.eigenvalues().minCoeff() > 0.0);
        CHECK(fp.residuals.covariance < 1e-10);
        CHECK(fp.residuals.mean < 1e-10);
    }
}

TEST_CASE("model validation") {
    LinearModel m = scalar_model(1.0);
    CHECK_NOTHROW(m.validate());
    m.G.setZero();
    CHECK_THROWS_AS(m.validate(), Error);
    m = scalar_model(1.0);
    m.alpha = 0.0;
    CHECK_THROWS_AS(m.validate(), Error);
    m = scalar_model(1.0);
    m.sigma_omega = -Matrix::Ones(1, 1);
    CHECK_THROWS_AS(m.validate(), Error);
    m = scalar_model(1.0);
    m.y = Vector::Zero(2);
    CHECK_THROWS_AS(m.validate(), Error);
}

TEST_CASE("fixed-point errors scale linearly with the surrogate error") {
    const LinearModel m = random_linear_model(4, 4, 1.0, 1);
    const std::vector<double> eps{0.0, 1e-1, 1e-2, 1e-3, 1e-4};
    const ErrorBoundReport r = verify_error_bound(m, eps, 9);
    CHECK(r.rows.size() == eps.size());
    CHECK(r.rows[0].mean_error < 1e-12);
    CHECK(r.rows[0].precision_error < 1e-10);
    CHECK(r.mean_slope_ok());
    CHECK(r.precision_slope_ok());
    CHECK(r.gram_bounded_below);
    CHECK(r.pass());

    // Halving eps roughly halves both errors.
    const std::vector<double> pair{1e-3, 5e-4};
    const ErrorBoundReport h = verify_error_bound(m, pair, 9);
    const double ratio_m = h.rows[0].mean_error / h.rows[1].mean_error;
    const double ratio_p = h.rows[0].precision_error / h.rows[1].precision_error;
    CHECK(ratio_m >= 1.5);
    CHECK(ratio_m <= 2.5);
    CHECK(ratio_p >= 1.5);
    CHECK(ratio_p <= 2.5);

    const std::string js = r.to_json();
    CHECK(js.find("\"mean_slope\"") != std::string::npos);
    CHECK(js.find("\"rows\"") != std::string::npos);
}

TEST_CASE("fixed point is invariant under an orthogonal change of observation basis") {
    std::mt19937_64 g(21);
    const LinearModel m = random_linear_model(4, 3, 0.8, 5);
    const Eigen::HouseholderQR<Matrix> qr(oracle::random_matrix(g, 4, 4));
    const Matrix Q = qr.householderQ();
    LinearModel q = m;
    q.G = Q * m.G;
    q.y = Q * m.y;
    q.sigma_eta = Q * m.sigma_eta * Q.transpose();
    const FixedPoint a = solve_fixed_point(m), b = solve_fixed_point(q);
    CHECK((a.r_inf - b.r_inf).norm() < 1e-9);
    CHECK((a.C_inf - b.C_inf).norm() < 1e-9);
}

TEST_CASE("unit perturbation directions and slopes") {
    const Matrix E = unit_direction(3, 5, 2);
    Eigen::JacobiSVD<Matrix> svd(E);
    CHECK(svd.singularValues()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(unit_direction(3, 5, 2) == E);
    CHECK(loglog_slope({1e-1, 1e-2, 1e-3}, {2e-2, 2e-4, 2e-6}) == doctest::Approx(2.0));
    CHECK_THROWS_AS(loglog_slope({1.0}, {1.0}), Error);
}
