#include "auki/field_io.hpp"
#include "auki/grf.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace auki;
using std::numbers::pi;

TEST_CASE("eigenvalues follow the shifted-Laplacian spectrum") {
    const PriorParams p{3.0, 2.0, 1.0};
    CHECK(kl_eigenvalue(0, 0, p) == doctest::Approx(1.0 / 81.0).epsilon(1e-14));
    CHECK(kl_eigenvalue(1, 0, p) == doctest::Approx(std::pow(pi * pi + 9.0, -2.0)).epsilon(1e-14));
    CHECK(kl_eigenvalue(1, 0, p) == doctest::Approx(2.8087e-3).epsilon(1e-4));
}

TEST_CASE("leading eigenvalues agree with a brute-force discrete Neumann operator") {
    const int n = 8;
    const Grid2D grid(n, n);
    const PriorParams p{};
    const oracle::Mat A = oracle::neumann_laplacian(n);
    // Symmetrize with the trapezoid weights: D^{1/2} A D^{-1/2}.
    oracle::Vec w(n * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) w[i + n * j] = grid.trapezoid_weight(i, j);
    const oracle::Mat S = w.cwiseSqrt().asDiagonal() * A * w.cwiseSqrt().cwiseInverse().asDiagonal();
    CHECK((S - S.transpose()).cwiseAbs().maxCoeff() < 1e-8);
    Eigen::SelfAdjointEigenSolver<oracle::Mat> es(0.5 * (S + S.transpose()));
    std::vector<double> discrete;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
        discrete.push_back(std::pow(std::max(es.eigenvalues()[k], 0.0) + p.tau * p.tau, -p.d));
    std::sort(discrete.rbegin(), discrete.rend());

    const KLBasis basis = build_kl_basis(grid, 6, p);
    for (std::size_t k = 0; k < basis.size(); ++k)
        CHECK(basis.mode(k).eigenvalue == doctest::Approx(discrete[k]).epsilon(0.05));
}

TEST_CASE("modes are ordered by eigenvalue with lexicographic ties") {
    const KLBasis b = build_kl_basis(Grid2D(9, 9), 40, PriorParams{});
    for (std::size_t k = 1; k < b.size(); ++k) {
        CHECK(b.mode(k).eigenvalue <= b.mode(k - 1).eigenvalue);
        if (b.mode(k).eigenvalue == b.mode(k - 1).eigenvalue)
            CHECK(std::pair(b.mode(k - 1).k1, b.mode(k - 1).k2) < std::pair(b.mode(k).k1, b.mode(k).k2));
    }
    CHECK(b.mode(0).k1 == 0);
    CHECK(b.mode(0).k2 == 0);
    CHECK(b.mode(1).k1 == 0);
    CHECK(b.mode(1).k2 == 1);
    CHECK(b.mode(2).k1 == 1);
    CHECK(b.mode(2).k2 == 0);
}

TEST_CASE("eigenfunctions carry the continuum normalization") {
    const Grid2D g(11, 11);
    const KLBasis b = build_kl_basis(g, 10, PriorParams{});
    for (const auto& m : b.modes()) {
        const double f1 = m.k1 == 0 ? 1.0 : std::sqrt(2.0), f2 = m.k2 == 0 ? 1.0 : std::sqrt(2.0);
        for (std::size_t j = 0; j < g.ny; ++j)
            for (std::size_t i = 0; i < g.nx; ++i)
                CHECK(m.values[static_cast<Eigen::Index>(g.index(i, j))] ==
                      doctest::Approx(f1 * f2 * std::cos(m.k1 * pi * g.x(i)) * std::cos(m.k2 * pi * g.y(j))));
    }
}

TEST_CASE("trapezoid inner products of modes are orthonormal") {
    for (std::size_t n : {9u, 17u, 33u}) {
        const Grid2D g(n, n);
        const KLBasis b = build_kl_basis(g, 12, PriorParams{});
        for (std::size_t a = 0; a < b.size(); ++a)
            for (std::size_t c = 0; c < b.size(); ++c) {
                double ip = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t i = 0; i < n; ++i) {
                        const auto k = static_cast<Eigen::Index>(g.index(i, j));
                        ip += g.trapezoid_weight(i, j) * b.mode(a).values[k] * b.mode(c).values[k];
                    }
                CHECK(std::abs(ip - (a == c ? 1.0 : 0.0)) < 1e-10);
            }
    }
}

TEST_CASE("sigma scales every mode amplitude") {
    const Grid2D g(9, 9);
    const KLBasis b1 = build_kl_basis(g, 8, PriorParams{3, 2, 1});
    const KLBasis b2 = build_kl_basis(g, 8, PriorParams{3, 2, 2});
    for (std::size_t k = 0; k < 8; ++k) {
        CHECK(b1.mode(k).k1 == b2.mode(k).k1);
        CHECK(b1.mode(k).k2 == b2.mode(k).k2);
        CHECK(std::sqrt(b2.mode(k).eigenvalue) == doctest::Approx(2.0 * std::sqrt(b1.mode(k).eigenvalue)));
    }
}

TEST_CASE("invalid prior parameters are rejected") {
    const Grid2D g(5, 5);
    CHECK_THROWS_AS(build_kl_basis(g, 0, PriorParams{}), Error);
    CHECK_THROWS_AS(build_kl_basis(g, 3, PriorParams{0.0, 2, 1}), Error);
    CHECK_THROWS_AS(build_kl_basis(g, 3, PriorParams{3, -1, 1}), Error);
    CHECK_THROWS_AS(build_kl_basis(g, 3, PriorParams{3, 2, 0}), Error);
    CHECK_THROWS_AS(Grid2D(1, 5), Error);
}

TEST_CASE("sample_field basics") {
    const Grid2D g(7, 7);
    const KLBasis b = build_kl_basis(g, 6, PriorParams{});
    CHECK(sample_field(b, Vector::Zero(6)).values.cwiseAbs().maxCoeff() == 0.0);

    Vector e1 = Vector::Zero(1);
    e1[0] = 1.0;
    const Field f = sample_field(b, e1);
    for (Eigen::Index k = 0; k < f.values.size(); ++k)
        CHECK(f.values[k] == doctest::Approx(std::sqrt(b.mode(0).eigenvalue)));

    CHECK_THROWS_AS(sample_field(b, Vector::Zero(7)), Error);

    Rng rng(3);
    const Vector z1 = draw_prior(6, rng), z2 = draw_prior(6, rng);
    const Field lhs = sample_field(b, 2.5 * z1 - 0.7 * z2);
    const Vector rhs = 2.5 * sample_field(b, z1).values - 0.7 * sample_field(b, z2).values;
    CHECK((lhs.values - rhs).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("pointwise variance matches the truncated covariance") {
    const Grid2D g(21, 21);
    const std::size_t n = 20;
    const KLBasis b = build_kl_basis(g, n, PriorParams{});
    const auto center = static_cast<Eigen::Index>(g.index(10, 10));
    double expected = 0.0;
    for (const auto& m : b.modes()) expected += m.eigenvalue * m.values[center] * m.values[center];

    Rng rng(11);
    const int draws = 10000;
    double s = 0.0, s2 = 0.0;
    for (int k = 0; k < draws; ++k) {
        const double v = sample_field(b, draw_prior(n, rng)).values[center];
        s += v;
        s2 += v * v;
    }
    const double var = s2 / draws - (s / draws) * (s / draws);
    CHECK(var == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("prior draws are reproducible and standard normal") {
    CHECK(draw_prior(16, 42) == draw_prior(16, 42));
    CHECK(draw_prior(16, 42) != draw_prior(16, 43));

    Rng rng(5);
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const double z = draw_prior(1, rng)[0];
        s += z;
        s2 += z * z;
    }
    CHECK(std::abs(s / n) < 0.02);
    CHECK(std::abs(s2 / n - (s / n) * (s / n) - 1.0) < 0.02);
}

TEST_CASE("uniform out-of-distribution law has variance bound^2/3") {
    Rng rng(9);
    const Vector z = draw_uniform(200000, -20.0, 20.0, rng);
    const double mean = z.mean();
    const double var = (z.array() - mean).square().mean();
    CHECK(var == doctest::Approx(400.0 / 3.0).epsilon(0.02));
    CHECK(z.maxCoeff() <= 20.0);
    CHECK(z.minCoeff() >= -20.0);
}

TEST_CASE("field serialization round-trips") {
    const Grid2D g(5, 4);
    const Field f = make_field(g, [](double x, double y) { return std::sin(3 * x) + y * y - 0.1; });

    std::stringstream bin;
    write_field_binary(bin, f);
    CHECK(bin.str().size() == 16 + 8 * 20);
    const Field back = read_field_binary(bin);
    CHECK(back.grid == g);
    CHECK(back.values == f.values);

    std::stringstream csv;
    write_field_csv(csv, f);
    const Field back_csv = read_field_csv(csv);
    CHECK(back_csv.grid == g);
    CHECK((back_csv.values - f.values).cwiseAbs().maxCoeff() < 1e-15);

    const auto dir = std::filesystem::temp_directory_path() / "auki_test_field_io";
    std::filesystem::create_directories(dir);
    save_field(dir / "f.bin", f);
    save_field(dir / "f.csv", f);
    CHECK(load_field(dir / "f.bin").values == f.values);
    CHECK((load_field(dir / "f.csv").values - f.values).cwiseAbs().maxCoeff() < 1e-15);
    std::filesystem::remove_all(dir);
}
