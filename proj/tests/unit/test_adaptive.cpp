#include "auki/adaptive.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace auki;

namespace {

// Linear full-order map y = G m with a ledger.
class LinearFull final : public FullOrderMap {
public:
    explicit LinearFull(Matrix G) : G_(std::move(G)) {}
    std::size_t parameter_dim() const override { return static_cast<std::size_t>(G_.cols()); }
    Matrix observe(const Matrix& p, EvalCategory c) override {
        ledger_.record(c, static_cast<std::size_t>(p.cols()));
        return G_ * p;
    }
    std::vector<TrainingEntry> training_entries(const Matrix& p, SampleTag tag, EvalCategory c) override {
        const Matrix y = observe(p, c);
        std::vector<TrainingEntry> out;
        for (Eigen::Index k = 0; k < p.cols(); ++k) out.push_back({p.col(k), p.col(k), y.col(k), tag});
        return out;
    }
    const EvaluationLedger& ledger() const override { return ledger_; }
    const Matrix& G() const { return G_; }

private:
    Matrix G_;
    EvaluationLedger ledger_;
};

// Surrogate G + E; each refinement scales E by `shrink`.
class PerturbedSurrogate final : public AdaptiveSurrogate {
public:
    PerturbedSurrogate(Matrix G, Matrix E, double shrink) : G_(std::move(G)), E_(std::move(E)), shrink_(shrink) {}
    Matrix observe(const Matrix& p) const override { return (G_ + E_) * p; }
    void refine(std::vector<TrainingEntry> entries) override {
        if (fail_on_refine) throw Error("fine-tuning diverged");
        received += entries.size();
        for (const auto& e : entries) CHECK(e.tag == SampleTag::adaptive);
        E_ *= shrink_;
        ++refinements;
    }
    bool fail_on_refine = false;
    std::size_t received = 0;
    std::size_t refinements = 0;

private:
    Matrix G_, E_;
    double shrink_;
};

struct Setup {
    Matrix G;
    ObservationData data;
    GaussianState initial;
    UKIConfig uki;
};

Setup make_setup(std::uint64_t seed, Eigen::Index nm = 3, Eigen::Index ny = 5) {
    std::mt19937_64 g(seed);
    Setup s;
    s.G = oracle::random_matrix(g, ny, nm);
    const Vector truth = oracle::random_matrix(g, nm, 1).col(0);
    s.data = synthesize_data(s.G * truth, 0.01, seed);
    s.initial = {Vector::Zero(nm), Matrix::Identity(nm, nm)};
    s.uki = make_uki_config(1.0, s.initial, s.data, 0);
    return s;
}

RefinePolicy small_policy() {
    RefinePolicy p;
    p.epsilon = 0.01;
    p.max_refinements = 4;
    p.uki_steps = 5;
    p.samples = 4;
    p.pool = 40;
    p.lambda = 1.0;
    p.diag_samples = 6;
    return p;
}

} // namespace

TEST_CASE("anchor is the trajectory mean with the smallest full-order misfit") {
    ObservationData d;
    d.y_obs = Vector::Zero(1);
    d.noise_variance = 1.0;
    const BatchForward id = [](const Matrix& p) { return p; };
    std::vector<GaussianState> traj;
    for (double v : {3.0, -1.0, 2.0, 1.0}) traj.push_back({Vector::Constant(1, v), Matrix::Identity(1, 1)});
    const AnchorRecord a = select_anchor(traj, id, d);
    CHECK(a.index == 2);
    CHECK(a.e == doctest::Approx(0.5));
    CHECK(a.r[0] == -1.0);
    CHECK(a.misfits == std::vector<double>{4.5, 0.5, 2.0, 0.5});

    // Non-finite misfits are skipped.
    const BatchForward nan_first = [](const Matrix& p) {
        Matrix o = p;
        o(0, 0) = std::nan("");
        return o;
    };
    CHECK(select_anchor(traj, nan_first, d).index == 2);
}

TEST_CASE("refinement test on relative change") {
    CHECK(should_refine(2.0, 1.0, 0.01));
    CHECK_FALSE(should_refine(1.0, 1.0, 0.01));
    CHECK_FALSE(should_refine(1.005, 1.0, 0.01));
    CHECK(should_refine(1.02, 1.0, 0.01));
    CHECK(should_refine(0.5, 1.0, 0.01));
    CHECK_FALSE(should_refine(1.0, 0.0, 0.01));
}

TEST_CASE("greedy selection: worked example and edge cases") {
    Matrix pool(1, 3);
    pool << -1.0, 0.0, 2.0;
    const BatchForward sq = [](const Matrix& p) { return Matrix(p.array().square()); };
    CHECK(greedy_select(pool, sq, Vector::Zero(1), 2, 1.0) == std::vector<std::size_t>{1, 2});
    CHECK(greedy_select(pool, sq, Vector::Zero(1), 1, 1.0) == std::vector<std::size_t>{1});
    CHECK(greedy_select(pool, sq, Vector::Constant(1, 2.0), 1, 1.0) == std::vector<std::size_t>{2});
    CHECK_THROWS_AS(greedy_select(Matrix(1, 0), sq, Vector::Zero(1), 1, 1.0), Error);
    CHECK_THROWS_AS(greedy_select(pool, sq, Vector::Zero(1), 4, 1.0), Error);

    // Equal scores go to the smallest index.
    Matrix tie(1, 2);
    tie << 1.0, -1.0;
    CHECK(greedy_select(tie, sq, Vector::Zero(1), 1, 1.0) == std::vector<std::size_t>{0});
}

TEST_CASE("greedy selection agrees with brute-force re-scoring") {
    std::mt19937_64 g(99);
    for (int inst = 0; inst < 50; ++inst) {
        const Eigen::Index n = 2 + inst % 3;
        const std::size_t K = 20 + static_cast<std::size_t>(inst % 7), Q = 1 + static_cast<std::size_t>(inst % 6);
        const double lambda = 0.25 * (inst % 5);
        const Matrix A = oracle::random_matrix(g, 4, n);
        auto G = [&](const Vector& m) { return Vector((A * m).array().sin()); };
        const Matrix pool = oracle::random_matrix(g, n, static_cast<Eigen::Index>(K));
        const Vector anchor = oracle::random_matrix(g, n, 1).col(0);
        std::vector<Vector> cols;
        Matrix outs(4, pool.cols());
        for (Eigen::Index k = 0; k < pool.cols(); ++k) {
            cols.push_back(pool.col(k));
            outs.col(k) = G(pool.col(k));
        }
        const auto got = greedy_select(pool, outs, anchor, Q, lambda);
        CHECK(got == oracle::greedy_brute_force(cols, G, anchor, Q, lambda));
        CHECK(std::set<std::size_t>(got.begin(), got.end()).size() == Q);
        CHECK(*std::max_element(got.begin(), got.end()) < K);
    }
}

TEST_CASE("model and inversion error measures") {
    const BatchForward a = [](const Matrix& p) { return Matrix(p); };
    const BatchForward b = [](const Matrix& p) { return Matrix(2.0 * p); };
    Matrix s(2, 2);
    s << 3.0, 0.0, 4.0, 1.0;
    CHECK(local_model_error(a, b, s) == doctest::Approx((5.0 + 1.0) / 2.0));
    CHECK(local_model_error(a, a, s) == 0.0);
    CHECK_THROWS_AS(local_model_error(a, b, Matrix(2, 0)), Error);

    const Grid2D g(3, 3);
    const Field ref(g, Vector::Ones(9));
    CHECK(relative_inversion_error(ref, ref) == 0.0);
    CHECK(relative_inversion_error(Field(g, Vector::Constant(9, 1.5)), ref) == doctest::Approx(0.5));
    CHECK_THROWS_AS(relative_inversion_error(ref, Field(g)), Error);
    CHECK_THROWS_AS(relative_inversion_error(Field(Grid2D(4, 4)), ref), Error);
}

TEST_CASE("speedup formula") {
    CHECK(speedup(128, 20, 50, 10, 1) == doctest::Approx(5140.0 / 60.0));
    CHECK(speedup(128, 20, 50, 10, 10) == doctest::Approx(5140.0 / 600.0));
    CHECK_THROWS_AS(speedup(0, 20, 50, 10, 1), Error);
}

TEST_CASE("gaussian sampling statistics and degenerate covariances") {
    const GaussianState g{(Vector(2) << 1.0, -2.0).finished(), (Matrix(2, 2) << 2.0, 0.6, 0.6, 0.5).finished()};
    Rng rng(4);
    const Matrix s = sample_gaussian(g, 40000, rng);
    const Vector mean = s.rowwise().mean();
    const Matrix c = s.colwise() - mean;
    CHECK((mean - g.r).cwiseAbs().maxCoeff() < 0.03);
    CHECK(((c * c.transpose()) / 40000.0 - g.C).cwiseAbs().maxCoeff() < 0.05);

    const GaussianState flat{Vector::Zero(2), (Matrix(2, 2) << 1.0, 1.0, 1.0, 1.0).finished()};
    const Matrix f = sample_gaussian(flat, 10, rng);
    CHECK(f.allFinite());
    CHECK((f.row(0) - f.row(1)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("refinement loop: single cycle without refinement scans T+1 means") {
    Setup s = make_setup(1);
    LinearFull full(s.G);
    PerturbedSurrogate sur(s.G, Matrix::Zero(s.G.rows(), s.G.cols()), 0.5);
    RefinePolicy p = small_policy();
    p.max_refinements = 1;
    p.epsilon = std::numeric_limits<double>::infinity();
    const AdaptiveResult r = run_adaptive(full, sur, s.data, s.initial, s.uki, p, {});
    CHECK(full.ledger().count(EvalCategory::anchor_scan) == p.uki_steps + 1);
    CHECK(full.ledger().count(EvalCategory::adaptive_sample) == 0);
    CHECK(sur.refinements == 0);
    CHECK(r.cycles.size() == 1);
    CHECK(r.iterations.size() == p.uki_steps);
    CHECK(r.termination == "relative change below epsilon");
}

TEST_CASE("refinement loop with an exact surrogate reduces to plain UKI plus anchoring") {
    Setup s = make_setup(2);
    LinearFull full(s.G);
    PerturbedSurrogate sur(s.G, Matrix::Zero(s.G.rows(), s.G.cols()), 0.5);
    RefinePolicy p = small_policy();
    p.max_refinements = 1;
    const AdaptiveResult r = run_adaptive(full, sur, s.data, s.initial, s.uki, p, {});

    UKIConfig cfg = s.uki;
    cfg.T = p.uki_steps;
    const BatchForward lin = [&](const Matrix& m) { return Matrix(s.G * m); };
    const UkiRun plain = run_uki(s.initial, lin, s.data.y_obs, cfg);
    REQUIRE(r.trajectory.size() == plain.states.size());
    for (std::size_t n = 0; n < plain.states.size(); ++n) {
        CHECK((r.trajectory[n].r - plain.states[n].r).norm() < 1e-12);
        CHECK(r.iterations[n].e_D == doctest::Approx(misfit(s.G * plain.states[n].r, s.data)));
        CHECK(r.iterations[n].e_M == 0.0);
    }
    const auto best = std::min_element(r.iterations.begin(), r.iterations.end(),
                                       [](const auto& a, const auto& b) { return a.e_D < b.e_D; });
    CHECK(r.final_misfit == best->e_D);
    CHECK(r.cycles.at(0).anchor_index == best->step);
}

TEST_CASE("refinement loop: stopping rule, ledger and model-error bookkeeping") {
    for (std::uint64_t seed = 3; seed < 9; ++seed) {
        Setup s = make_setup(seed);
        std::mt19937_64 g(seed);
        LinearFull full(s.G);
        PerturbedSurrogate sur(s.G, 0.3 * oracle::random_matrix(g, s.G.rows(), s.G.cols()), 0.3);
        const RefinePolicy p = small_policy();
        int e_I_calls = 0;
        RunInstrumentation instr;
        instr.inversion_error = [&](const Vector&) {
            ++e_I_calls;
            return 0.0;
        };
        const AdaptiveResult r = run_adaptive(full, sur, s.data, s.initial, s.uki, p, {seed, seed + 1}, instr);

        REQUIRE_FALSE(r.cycles.empty());
        CHECK(r.cycles.size() <= p.max_refinements);
        double e_prev = r.e0;
        std::size_t steps = 0;
        for (std::size_t t = 0; t < r.cycles.size(); ++t) {
            const CycleRecord& c = r.cycles[t];
            CHECK(c.e_previous == e_prev);
            const bool last = t + 1 == r.cycles.size();
            if (!last) {
                CHECK(should_refine(c.e_previous, c.e_anchor, p.epsilon));
                CHECK(c.refined);
                CHECK(c.new_samples == p.samples);
                CHECK(c.e_M_after <= c.e_M_before);
            } else {
                CHECK_FALSE(c.refined);
                if (should_refine(c.e_previous, c.e_anchor, p.epsilon))
                    CHECK(r.termination == "refinement budget exhausted");
                else
                    CHECK(r.termination == "relative change below epsilon");
            }
            e_prev = c.e_anchor;
            steps += c.uki_steps;
        }
        const auto& L = full.ledger();
        CHECK(L.count(EvalCategory::anchor_scan) == steps + 1);
        CHECK(L.count(EvalCategory::adaptive_sample) == sur.received);
        CHECK(L.count(EvalCategory::adaptive_sample) <= p.samples * p.max_refinements);
        CHECK(L.count(EvalCategory::anchor_scan) + L.count(EvalCategory::adaptive_sample) <=
              (p.samples + p.uki_steps) * p.max_refinements + 1);
        CHECK(L.count(EvalCategory::uki) == 0);
        CHECK(L.category_sum() == L.total());
        CHECK(e_I_calls == static_cast<int>(steps + r.cycles.size()));
        CHECK(r.final_misfit == r.cycles.back().e_anchor);
    }
}

TEST_CASE("refinement loop records a stage failure and keeps the partial record") {
    Setup s = make_setup(11);
    LinearFull full(s.G);
    PerturbedSurrogate sur(s.G, Matrix::Constant(s.G.rows(), s.G.cols(), 0.5), 0.5);
    sur.fail_on_refine = true;
    RefinePolicy p = small_policy();
    p.epsilon = 0.0;
    const AdaptiveResult r = run_adaptive(full, sur, s.data, s.initial, s.uki, p, {});
    CHECK(r.termination.rfind("stage failure:", 0) == 0);
    CHECK(r.cycles.size() == 1);
    CHECK_FALSE(r.cycles[0].refined);
    CHECK(r.iterations.size() == p.uki_steps);
    CHECK(std::isfinite(r.final_misfit));
}

TEST_CASE("policy validation") {
    RefinePolicy p;
    CHECK_NOTHROW(p.validate());
    p.samples = p.pool + 1;
    CHECK_THROWS_AS(p.validate(), Error);
    p = RefinePolicy{};
    p.epsilon = -1.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = RefinePolicy{};
    p.max_refinements = 0;
    CHECK_THROWS_AS(p.validate(), Error);
}
