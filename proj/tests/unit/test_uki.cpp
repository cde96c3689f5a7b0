#include "auki/uki.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <atomic>

using namespace auki;

namespace {

BatchForward affine(const Matrix& G, const Vector& b, std::size_t* calls = nullptr) {
    return [G, b, calls](const Matrix& p) {
        if (calls) ++*calls;
        return Matrix((G * p).colwise() + b);
    };
}

UKIConfig config(double alpha, const Matrix& so, const Matrix& se, const Vector& r0, std::size_t T) {
    UKIConfig c;
    c.alpha = alpha;
    c.sigma_omega = so;
    c.sigma_eta = se;
    c.r0 = r0;
    c.T = T;
    return c;
}

} // namespace

TEST_CASE("unscented weights") {
    const auto w1 = unscented_weights(1);
    CHECK(w1.a == 1.0);
    CHECK(w1.lambda == 0.0);
    CHECK(w1.c == doctest::Approx(1.0));
    CHECK(w1.Wc == doctest::Approx(0.5));

    const auto w4 = unscented_weights(4);
    CHECK(w4.a == 1.0);
    CHECK(w4.c == doctest::Approx(2.0));
    CHECK(w4.Wc == doctest::Approx(1.0 / 8.0));

    const auto w128 = unscented_weights(128);
    CHECK(w128.a == doctest::Approx(std::sqrt(4.0 / 128.0)));
    CHECK(w128.lambda == doctest::Approx(4.0 - 128.0));
    CHECK(w128.c == doctest::Approx(2.0));
    CHECK(w128.Wc == doctest::Approx(1.0 / 8.0));
    CHECK_THROWS_AS(unscented_weights(0), Error);
}

TEST_CASE("sigma points reproduce the mean and covariance") {
    std::mt19937_64 g(3);
    const Eigen::Index n = 6;
    GaussianState s{oracle::random_matrix(g, n, 1).col(0), oracle::random_spd(g, n)};
    const SigmaEnsemble e = sigma_points(s);
    REQUIRE(e.points.cols() == 2 * n + 1);
    CHECK(e.points.col(0) == s.r);
    Vector mean = Vector::Zero(n);
    Matrix cov = Matrix::Zero(n, n);
    for (Eigen::Index j = 1; j <= 2 * n; ++j) {
        mean += e.points.col(j);
        const Vector d = e.points.col(j) - s.r;
        cov += e.weights.Wc * d * d.transpose();
    }
    CHECK((mean / (2.0 * n) - s.r).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((cov - s.C).cwiseAbs().maxCoeff() < 1e-12);

    GaussianState bad{Vector::Zero(2), -Matrix::Identity(2, 2)};
    CHECK_THROWS_AS(sigma_points(bad), Error);
}

TEST_CASE("scalar identity model: one step gives 2/3, 2/3") {
    const Matrix one = Matrix::Ones(1, 1);
    const auto cfg = config(1.0, one, one, Vector::Zero(1), 1);
    const GaussianState next = uki_step({Vector::Zero(1), one}, affine(one, Vector::Zero(1)), Vector::Ones(1), cfg);
    CHECK(next.r[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(next.C(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("affine maps: one step equals exact Kalman conditioning") {
    std::mt19937_64 g(17);
    for (int trial = 0; trial < 25; ++trial) {
        const Eigen::Index nm = 1 + trial % 6, ny = 1 + (trial * 7) % 9;
        const double alpha = 0.3 + 0.7 * (trial % 4) / 3.0;
        const Matrix G = oracle::random_matrix(g, ny, nm);
        const Vector b = oracle::random_matrix(g, ny, 1).col(0);
        const Vector y = oracle::random_matrix(g, ny, 1).col(0);
        const Vector r = oracle::random_matrix(g, nm, 1).col(0), r0 = oracle::random_matrix(g, nm, 1).col(0);
        const Matrix C = oracle::random_spd(g, nm), so = oracle::random_spd(g, nm), se = oracle::random_spd(g, ny);

        std::size_t calls = 0;
        StepDiagnostics d;
        const GaussianState got = uki_step({r, C}, affine(G, b, &calls), y, config(alpha, so, se, r0, 1), &d);
        const auto want = oracle::linear_kalman(r, C, G, b, y, alpha, so, se, r0);
        const double scale = 1.0 + want.r.cwiseAbs().maxCoeff() + want.C.cwiseAbs().maxCoeff();
        CHECK((got.r - want.r).cwiseAbs().maxCoeff() / scale < 1e-10);
        CHECK((got.C - want.C).cwiseAbs().maxCoeff() / scale < 1e-10);
        CHECK(calls == 1);
        CHECK(d.asymmetry < 1e-10);
        CHECK(got.C == got.C.transpose());
    }
}

TEST_CASE("batch forward is called once per step with 2n+1 columns") {
    const Eigen::Index n = 5;
    std::size_t calls = 0;
    Eigen::Index width = 0;
    BatchForward f = [&](const Matrix& p) {
        ++calls;
        width = p.cols();
        return Matrix(p.topRows(3));
    };
    const GaussianState s{Vector::Zero(n), Matrix::Identity(n, n)};
    const auto cfg = config(1.0, Matrix::Identity(n, n), Matrix::Identity(3, 3), Vector::Zero(n), 4);
    const UkiRun run = run_uki(s, f, Vector::Ones(3), cfg);
    CHECK(run.ok());
    CHECK(run.states.size() == 4);
    CHECK(calls == 4);
    CHECK(width == 2 * n + 1);

    std::atomic<int> point_calls{0};
    const BatchForward pw = pointwise(
        [&](const Vector& m) {
            ++point_calls;
            return Vector(m.head(2));
        },
        2);
    const Matrix out = pw(Matrix::Identity(4, 4));
    CHECK(point_calls == 4);
    CHECK(out == Matrix::Identity(4, 4).topRows(2));
}

TEST_CASE("zero innovation leaves the mean at the prediction") {
    const Matrix G = (Matrix(2, 2) << 1.0, 0.5, -0.2, 2.0).finished();
    const Vector r = (Vector(2) << 0.3, -0.7).finished();
    const auto cfg = config(1.0, Matrix::Identity(2, 2), 0.1 * Matrix::Identity(2, 2), Vector::Zero(2), 1);
    const GaussianState next = uki_step({r, Matrix::Identity(2, 2)}, affine(G, Vector::Zero(2)), G * r, cfg);
    CHECK((next.r - r).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("long linear runs reach the equilibrium of the update") {
    std::mt19937_64 g(5);
    const Eigen::Index n = 3;
    const Matrix G = Matrix::Identity(n, n) + 0.3 * oracle::random_matrix(g, n, n);
    const Vector y = oracle::random_matrix(g, n, 1).col(0);
    const Matrix so = Matrix::Identity(n, n), se = 0.1 * Matrix::Identity(n, n);
    const auto cfg = config(0.5, so, se, Vector::Zero(n), 60);
    const UkiRun run = run_uki({Vector::Zero(n), so}, affine(G, Vector::Zero(n)), y, cfg);
    REQUIRE(run.ok());
    const GaussianState& last = run.states.back();
    const auto again = oracle::linear_kalman(last.r, last.C, G, Vector::Zero(n), y, 0.5, so, se, Vector::Zero(n));
    CHECK((again.r - last.r).norm() < 1e-10);
    CHECK((again.C - last.C).norm() < 1e-10);
}

TEST_CASE("a failing step truncates the run and records the failure") {
    int calls = 0;
    BatchForward f = [&](const Matrix& p) {
        if (++calls == 3) return Matrix(Matrix::Constant(1, p.cols(), std::nan("")));
        return Matrix(p.topRows(1));
    };
    const auto cfg = config(1.0, Matrix::Identity(2, 2), Matrix::Identity(1, 1), Vector::Zero(2), 5);
    const UkiRun run = run_uki({Vector::Zero(2), Matrix::Identity(2, 2)}, f, Vector::Ones(1), cfg);
    CHECK_FALSE(run.ok());
    CHECK(run.states.size() == 2);
    CHECK(run.failure.find("step 3") != std::string::npos);
}

TEST_CASE("configuration checks") {
    const auto cfg0 = config(1.2, Matrix::Identity(1, 1), Matrix::Identity(1, 1), Vector::Zero(1), 1);
    const auto f = affine(Matrix::Ones(1, 1), Vector::Zero(1));
    CHECK_THROWS_AS(uki_step({Vector::Zero(1), Matrix::Identity(1, 1)}, f, Vector::Ones(1), cfg0), Error);
    auto cfg = cfg0;
    cfg.alpha = 1.0;
    CHECK_THROWS_AS(uki_step({Vector::Zero(1), Matrix::Identity(1, 1)}, f, Vector::Ones(2), cfg), Error);
    cfg.T = 0;
    CHECK_THROWS_AS(run_uki({Vector::Zero(1), Matrix::Identity(1, 1)}, f, Vector::Ones(1), cfg), Error);

    ObservationData d;
    d.y_obs = Vector::Ones(3);
    d.noise_variance = 0.25;
    const UKIConfig m = make_uki_config(0.5, {Vector::Ones(2), 2.0 * Matrix::Identity(2, 2)}, d, 7);
    CHECK(m.sigma_omega.isApprox(1.75 * 2.0 * Matrix::Identity(2, 2)));
    CHECK(m.sigma_eta.isApprox(0.25 * Matrix::Identity(3, 3)));
    CHECK(m.r0 == Vector::Ones(2));
    CHECK(m.T == 7);
}
