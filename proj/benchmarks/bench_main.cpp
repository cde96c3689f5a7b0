#include "auki/deeponet.hpp"
#include "auki/pde_forward.hpp"
#include "auki/uki.hpp"

#include <benchmark/benchmark.h>

#include <memory>

using namespace auki;

namespace {

void BM_DarcySolve(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    DarcyProblem p;
    p.grid = Grid2D(n, n);
    const KLBasis basis = build_kl_basis(p.grid, 32, PriorParams{});
    const Field m = sample_field(basis, draw_prior(32, 1));
    for (auto _ : state) benchmark::DoNotOptimize(solve_darcy(p, m).values.data());
}
BENCHMARK(BM_DarcySolve)->Arg(24)->Arg(70)->Unit(benchmark::kMillisecond);

void BM_HeatLocSolve(benchmark::State& state) {
    HeatLocProblem p;
    p.grid = Grid2D(24, 24);
    for (auto _ : state) benchmark::DoNotOptimize(solve_heat_loc(p, {0.3, 0.4}).size());
}
BENCHMARK(BM_HeatLocSolve)->Unit(benchmark::kMillisecond);

void BM_ReactionDiffusionSolve(benchmark::State& state) {
    ReactionDiffusionProblem p;
    p.grid = Grid2D(24, 24);
    const KLBasis basis = build_kl_basis(p.grid, 32, PriorParams{});
    const Field m = sample_field(basis, draw_prior(32, 2));
    for (auto _ : state) benchmark::DoNotOptimize(solve_reaction_diffusion(p, m).values.data());
}
BENCHMARK(BM_ReactionDiffusionSolve)->Unit(benchmark::kMillisecond);

void BM_UkiStepLinear(benchmark::State& state) {
    const auto n = static_cast<Eigen::Index>(state.range(0));
    Rng rng(3);
    Matrix G(2 * n, n);
    for (Eigen::Index j = 0; j < n; ++j) G.col(j) = standard_normal(rng, 2 * n);
    UKIConfig cfg;
    cfg.sigma_omega = Matrix::Identity(n, n);
    cfg.sigma_eta = 0.1 * Matrix::Identity(2 * n, 2 * n);
    cfg.r0 = Vector::Zero(n);
    const BatchForward f = [&](const Matrix& p) { return Matrix(G * p); };
    const GaussianState s{Vector::Zero(n), Matrix::Identity(n, n)};
    const Vector y = standard_normal(rng, 2 * n);
    for (auto _ : state) benchmark::DoNotOptimize(uki_step(s, f, y, cfg).r.data());
}
BENCHMARK(BM_UkiStepLinear)->Arg(32)->Arg(128)->Unit(benchmark::kMicrosecond);

struct SurrogateFixture {
    NetArch arch;
    Surrogate net;
    TrainingSet data;

    explicit SurrogateFixture(std::size_t entries, bool heat_loc = false) {
        arch.branch_in = heat_loc ? 2 : 64;
        arch.trunk_in = heat_loc ? 3 : 2;
        arch.branch_hidden = {64, 64, 64};
        arch.trunk_hidden = {64, 64, 64};
        arch.p = 40;
        net = Surrogate(arch, Encoder::identity(), 1);
        data.queries = heat_loc ? grid_queries(Grid2D(24, 24), {0.05, 0.15}, 3)
                                : grid_queries(Grid2D(24, 24), {0.0}, 2);
        Rng rng(4);
        for (std::size_t k = 0; k < entries; ++k) {
            TrainingEntry e;
            e.encoded = standard_normal(rng, static_cast<Eigen::Index>(arch.branch_in));
            e.target = standard_normal(rng, data.queries.cols());
            data.entries.push_back(e);
        }
        net.set_normalization(fit_normalization(arch, data));
    }
};

void BM_SurrogateEvaluate(benchmark::State& state) {
    SurrogateFixture fx(static_cast<std::size_t>(state.range(0)));
    const Matrix enc = fx.data.encoded_matrix();
    for (auto _ : state) benchmark::DoNotOptimize(fx.net.evaluate(enc, fx.data.queries).data());
}
BENCHMARK(BM_SurrogateEvaluate)->Arg(65)->Unit(benchmark::kMicrosecond);

void BM_TrainingStep(benchmark::State& state) {
    SurrogateFixture fx(static_cast<std::size_t>(state.range(0)));
    const Matrix enc = fx.data.encoded_matrix(), tgt = fx.data.target_matrix();
    Vector grad;
    for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(fx.net, enc, fx.data.queries, tgt, &grad));
}
BENCHMARK(BM_TrainingStep)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_TrainingStepHeatLoc(benchmark::State& state) {
    SurrogateFixture fx(static_cast<std::size_t>(state.range(0)), true);
    const Matrix enc = fx.data.encoded_matrix(), tgt = fx.data.target_matrix();
    Vector grad;
    for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(fx.net, enc, fx.data.queries, tgt, &grad));
}
BENCHMARK(BM_TrainingStepHeatLoc)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
