#include "auki/experiment.hpp"

#include "auki/field_io.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>

namespace auki {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::uint64_t stream_seed(std::uint64_t master, std::string_view name) { return make_stream(master, name)(); }

std::vector<Field> solve_with_field(const Problem& problem, const Field& m) {
    return std::visit(
        [&](const auto& p) -> std::vector<Field> {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, DarcyProblem>) return {solve_darcy(p, m)};
            else if constexpr (std::is_same_v<P, HeatFieldProblem>) return {solve_heat_field(p, m)};
            else if constexpr (std::is_same_v<P, ReactionDiffusionProblem>) return {solve_reaction_diffusion(p, m)};
            else throw Error("heat localization is not driven by a field");
        },
        problem);
}

Matrix columns(const std::vector<GaussianState>& states) {
    Matrix out(states.front().r.size(), static_cast<Eigen::Index>(states.size()));
    for (std::size_t n = 0; n < states.size(); ++n) out.col(static_cast<Eigen::Index>(n)) = states[n].r;
    return out;
}

std::string signature(const Experiment& ex) {
    json j;
    j["problem"] = to_string(ex.config.problem);
    j["grid"] = ex.config.grid;
    j["parameter_dim"] = ex.parameter_dim();
    j["frames"] = ex.model->frames();
    return j.dump();
}

} // namespace

Problem make_problem(const RunConfig& cfg) {
    const Grid2D g(cfg.grid, cfg.grid);
    switch (cfg.problem) {
    case ProblemKind::darcy: {
        DarcyProblem p;
        p.grid = g;
        return p;
    }
    case ProblemKind::heat_loc: {
        HeatLocProblem p;
        p.grid = g;
        p.dt = cfg.heat_loc_dt;
        return p;
    }
    case ProblemKind::heat_field: {
        HeatFieldProblem p;
        p.grid = g;
        p.steps = cfg.heat_field_steps;
        return p;
    }
    case ProblemKind::reaction_diffusion: {
        ReactionDiffusionProblem p;
        p.grid = g;
        p.dt = cfg.rd_dt;
        return p;
    }
    }
    throw Error("make_problem: unknown problem");
}

double Experiment::inversion_error(const Vector& r) const {
    if (config.problem == ProblemKind::heat_loc) {
        const double ref = truth_params.norm();
        if (ref == 0.0) throw Error("inversion_error: zero reference location");
        return (r - truth_params).norm() / ref;
    }
    return relative_inversion_error(estimate_field(r), truth_field);
}

Field Experiment::estimate_field(const Vector& r) const {
    if (config.problem == ProblemKind::heat_loc) return Field{};
    return sample_field(*basis, r);
}

Experiment make_experiment(const RunConfig& cfg_in) {
    Experiment ex;
    ex.config = cfg_in;
    ex.config.resolve();
    const RunConfig& c = ex.config;
    const Problem problem = make_problem(c);
    const Grid2D grid(c.grid, c.grid);
    const bool loc = c.problem == ProblemKind::heat_loc;

    std::shared_ptr<const KLBasis> truth_basis;
    if (!loc) {
        truth_basis = std::make_shared<const KLBasis>(build_kl_basis(grid, c.truth_modes, PriorParams{}));
        ex.basis = std::make_shared<const KLBasis>(build_kl_basis(grid, c.n_modes, PriorParams{}));
    }
    ex.model = std::make_shared<const ForwardModel>(problem, ex.basis);
    ex.sensors = SensorArray::interior_lattice(c.sensors_value());
    ex.encoder = loc ? Encoder::identity() : Encoder::lattice(grid, c.encoder_lattice);
    ex.arch = c.arch(ex.parameter_dim());

    std::vector<Field> truth_state;
    if (loc) {
        ex.truth_params = Eigen::Map<const Vector>(c.heat_loc_truth.data(), 2);
        truth_state = ex.model->solve(ex.truth_params);
    } else {
        if (c.problem == ProblemKind::heat_field) {
            ex.truth_field = make_field(grid, [](double x, double y) {
                return std::sin(std::numbers::pi * x) * std::cos(std::numbers::pi * y);
            });
        } else {
            Rng rng = make_stream(c.seed, "truth");
            ex.truth_params = c.truth == TruthKind::idd ? draw_prior(c.truth_modes, rng)
                                                        : draw_uniform(c.truth_modes, -c.ood_bound, c.ood_bound, rng);
            ex.truth_field = sample_field(*truth_basis, ex.truth_params);
        }
        truth_state = solve_with_field(problem, ex.truth_field);
    }
    ex.y_ref = observe_frames(truth_state, ex.sensors);
    ex.data = synthesize_data(ex.y_ref, c.delta, stream_seed(c.seed, "noise"), c.noise_floor);

    const auto n = static_cast<Eigen::Index>(ex.parameter_dim());
    if (!c.init_mean.empty()) {
        if (static_cast<Eigen::Index>(c.init_mean.size()) != n)
            throw Error("init_mean has " + std::to_string(c.init_mean.size()) + " entries, expected " +
                        std::to_string(n));
        ex.initial.r = Eigen::Map<const Vector>(c.init_mean.data(), n);
    } else {
        Rng rng = make_stream(c.seed, "init");
        ex.initial.r = standard_normal(rng, n);
    }
    ex.initial.C = c.init_cov_value() * Matrix::Identity(n, n);

    const auto times = ex.model->frame_times();
    ex.train_queries = grid_queries(grid, times, ex.arch.trunk_in);
    ex.obs_queries = sensor_queries(ex.sensors, times, ex.arch.trunk_in);
    return ex;
}

OfflineArtifacts train_offline(const Experiment& ex) {
    const RunConfig& c = ex.config;
    OfflineArtifacts off;
    EvaluationLedger ledger;
    PdeFullOrderMap full(*ex.model, ex.sensors, ex.encoder, ledger, c.workers_value());

    Rng rng = make_stream(c.seed, "prior");
    const auto n = static_cast<Eigen::Index>(ex.parameter_dim());
    Matrix draws(n, static_cast<Eigen::Index>(c.n_prior));
    for (std::size_t k = 0; k < c.n_prior; ++k)
        draws.col(static_cast<Eigen::Index>(k)) = c.problem == ProblemKind::heat_loc
                                                      ? draw_uniform(2, c.train_lo, c.train_hi, rng)
                                                      : draw_prior(c.n_modes, rng);
    Stopwatch solve_clock;
    off.data.queries = ex.train_queries;
    off.data.entries = full.training_entries(draws, SampleTag::prior, EvalCategory::offline);
    off.solve_seconds = solve_clock.seconds();
    off.offline_evaluations = ledger.count(EvalCategory::offline);

    off.surrogate = Surrogate(ex.arch, ex.encoder, stream_seed(c.seed, "init-weights"));
    off.surrogate.set_normalization(fit_normalization(ex.arch, off.data));
    TrainOptions opt;
    opt.iterations = c.offline_iters;
    opt.schedule.learning_rate = c.lr;
    opt.schedule.decay_rate = c.lr_decay;
    opt.schedule.decay_steps = c.lr_decay_steps;
    opt.batch_size = c.batch;
    opt.seed = stream_seed(c.seed, "train");
    Stopwatch train_clock;
    off.fit = train(off.surrogate, off.data, opt);
    off.train_seconds = train_clock.seconds();
    return off;
}

void save_training_set(const TrainingSet& data, const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    const std::uint64_t n = data.size();
    const std::uint64_t np = n ? static_cast<std::uint64_t>(data.entries[0].params.size()) : 0;
    const std::uint64_t ne = n ? static_cast<std::uint64_t>(data.entries[0].encoded.size()) : 0;
    const std::uint64_t nt = n ? static_cast<std::uint64_t>(data.entries[0].target.size()) : 0;
    const double header[] = {static_cast<double>(n),
                             static_cast<double>(np),
                             static_cast<double>(ne),
                             static_cast<double>(nt),
                             static_cast<double>(data.queries.rows()),
                             static_cast<double>(data.queries.cols())};
    os.write("AUKIDATA", 8);
    write_f64_le(os, header, 6);
    write_f64_le(os, data.queries.data(), static_cast<std::size_t>(data.queries.size()));
    for (const auto& e : data.entries) {
        if (static_cast<std::uint64_t>(e.params.size()) != np || static_cast<std::uint64_t>(e.encoded.size()) != ne ||
            static_cast<std::uint64_t>(e.target.size()) != nt)
            throw Error("save_training_set: ragged entries");
        const double tag = e.tag == SampleTag::adaptive ? 1.0 : 0.0;
        write_f64_le(os, &tag, 1);
        write_f64_le(os, e.params.data(), np);
        write_f64_le(os, e.encoded.data(), ne);
        write_f64_le(os, e.target.data(), nt);
    }
    if (!os) throw Error("write failed: " + path.string());
}

TrainingSet load_training_set(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != "AUKIDATA") throw Error("not a training set: " + path.string());
    double header[6];
    read_f64_le(is, header, 6);
    const auto n = static_cast<std::size_t>(header[0]);
    const auto np = static_cast<Eigen::Index>(header[1]);
    const auto ne = static_cast<Eigen::Index>(header[2]);
    const auto nt = static_cast<Eigen::Index>(header[3]);
    TrainingSet data;
    data.queries.resize(static_cast<Eigen::Index>(header[4]), static_cast<Eigen::Index>(header[5]));
    read_f64_le(is, data.queries.data(), static_cast<std::size_t>(data.queries.size()));
    data.entries.resize(n);
    for (auto& e : data.entries) {
        double tag = 0.0;
        read_f64_le(is, &tag, 1);
        e.tag = tag != 0.0 ? SampleTag::adaptive : SampleTag::prior;
        e.params.resize(np);
        e.encoded.resize(ne);
        e.target.resize(nt);
        read_f64_le(is, e.params.data(), static_cast<std::size_t>(np));
        read_f64_le(is, e.encoded.data(), static_cast<std::size_t>(ne));
        read_f64_le(is, e.target.data(), static_cast<std::size_t>(nt));
    }
    if (!is) throw Error("truncated training set: " + path.string());
    return data;
}

namespace {

fs::path with_suffix(fs::path prefix, const char* suffix) {
    prefix += suffix;
    return prefix;
}

} // namespace

void save_offline(const OfflineArtifacts& off, const Experiment& ex, const fs::path& prefix) {
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    save_checkpoint(off.surrogate, prefix);
    save_training_set(off.data, with_suffix(prefix, ".data.bin"));
    write_loss_csv(with_suffix(prefix, ".loss.csv"), off.fit.history);
    json meta;
    meta["signature"] = json::parse(signature(ex));
    meta["offline_evaluations"] = off.offline_evaluations;
    meta["initial_loss"] = off.fit.initial_loss;
    meta["final_loss"] = off.fit.final_loss;
    meta["solve_seconds"] = off.solve_seconds;
    meta["train_seconds"] = off.train_seconds;
    write_text(with_suffix(prefix, ".meta.json"), meta.dump(2) + "\n");
}

OfflineArtifacts load_offline(const fs::path& prefix, const Experiment& ex) {
    OfflineArtifacts off;
    json meta;
    try {
        meta = json::parse(read_text(with_suffix(prefix, ".meta.json")));
    } catch (const json::exception& e) {
        throw Error("checkpoint metadata: " + std::string(e.what()));
    }
    if (meta.at("signature") != json::parse(signature(ex)))
        throw Error("checkpoint " + prefix.string() + " was built for " + meta.at("signature").dump() +
                    ", the config describes " + signature(ex));
    off.surrogate = load_checkpoint(prefix);
    off.data = load_training_set(with_suffix(prefix, ".data.bin"));
    off.offline_evaluations = meta.at("offline_evaluations").get<std::size_t>();
    off.fit.initial_loss = meta.at("initial_loss").get<double>();
    off.fit.final_loss = meta.at("final_loss").get<double>();
    off.solve_seconds = meta.at("solve_seconds").get<double>();
    off.train_seconds = meta.at("train_seconds").get<double>();
    if (off.surrogate.arch().branch_in != ex.encoder.width(ex.parameter_dim()))
        throw Error("checkpoint encoder width does not match the config");
    return off;
}

namespace {

// Single-sweep modes: per-step e_D and optional e_M are diagnostics.
void finish_sweep(RunRecord& rec, const Experiment& ex, const UkiRun& run, PdeFullOrderMap& full,
                  const BatchForward* approx) {
    const RunConfig& c = ex.config;
    rec.e0 = misfit(full.observe(Matrix(ex.initial.r), EvalCategory::diagnostic).col(0), ex.data);
    rec.termination = run.ok() ? "completed " + std::to_string(run.states.size()) + " steps" : run.failure;
    if (run.states.empty()) {
        rec.final_r = ex.initial.r;
        rec.final_diag_C = ex.initial.C.diagonal();
        rec.final_e_D = rec.e0;
        rec.final_e_I = ex.inversion_error(ex.initial.r);
        return;
    }
    const Matrix obs = full.observe(columns(run.states), EvalCategory::diagnostic);
    const BatchForward diag_map = full.as_forward(EvalCategory::diagnostic);
    Rng diag_rng = make_stream(c.seed, "diagnostics");
    for (std::size_t n = 0; n < run.states.size(); ++n) {
        SeriesRow row;
        row.step = n + 1;
        row.iteration = n + 1;
        row.e_D = misfit(obs.col(static_cast<Eigen::Index>(n)), ex.data);
        row.e_I = ex.inversion_error(run.states[n].r);
        if (approx && c.per_iteration_model_error && c.M > 0)
            row.e_M = local_model_error(*approx, diag_map, sample_gaussian(run.states[n], c.M, diag_rng));
        rec.series.push_back(row);
    }
    rec.final_r = run.states.back().r;
    rec.final_diag_C = run.states.back().C.diagonal();
    rec.final_e_D = rec.series.back().e_D;
    rec.final_e_I = rec.series.back().e_I;
}

} // namespace

RunRecord run_inversion(const Experiment& ex, const OfflineArtifacts* offline) {
    const RunConfig& c = ex.config;
    RunRecord rec;
    rec.mode = to_string(c.mode);
    rec.problem = to_string(c.problem);
    rec.config_json = c.to_json();
    rec.seed = c.seed;
    rec.n_m = ex.parameter_dim();
    rec.T_fem = c.T_fem;
    rec.Q = c.Q_value();
    rec.I_max = c.I_max;
    rec.T = c.mode == RunMode::deeponet_adaptive ? c.T : c.T_fem;
    if (c.problem == ProblemKind::heat_loc) rec.truth = ex.truth_params;

    if (c.mode != RunMode::fem_uki && !offline)
        throw Error("mode " + to_string(c.mode) + " needs an offline checkpoint");
    if (offline) rec.offline_evaluations = offline->offline_evaluations;

    EvaluationLedger ledger;
    PdeFullOrderMap full(*ex.model, ex.sensors, ex.encoder, ledger, c.workers_value());
    const double alpha = c.alpha_value();
    Stopwatch clock;

    if (c.mode == RunMode::fem_uki) {
        const UKIConfig ucfg = make_uki_config(alpha, ex.initial, ex.data, c.T_fem);
        const UkiRun run = run_uki(ex.initial, full.as_forward(EvalCategory::uki), ex.data.y_obs, ucfg);
        rec.timings.push_back({"inversion", clock.seconds()});
        finish_sweep(rec, ex, run, full, nullptr);
    } else if (c.mode == RunMode::deeponet_direct) {
        const SurrogateMap map(offline->surrogate, ex.basis.get(), ex.obs_queries);
        const BatchForward approx = [&map](const Matrix& p) { return map.evaluate(p); };
        const UKIConfig ucfg = make_uki_config(alpha, ex.initial, ex.data, c.T_fem);
        const UkiRun run = run_uki(ex.initial, approx, ex.data.y_obs, ucfg);
        rec.timings.push_back({"inversion", clock.seconds()});
        finish_sweep(rec, ex, run, full, &approx);
    } else {
        FineTuneOptions ft;
        ft.iterations = c.online_iters;
        ft.learning_rate = c.online_lr;
        ft.seed = stream_seed(c.seed, "fine-tune");
        DeepONetSurrogate sur(offline->surrogate, offline->data, ex.basis, ex.obs_queries, ft);
        const UKIConfig ucfg = make_uki_config(alpha, ex.initial, ex.data, c.T);
        AdaptiveSeeds seeds;
        seeds.pool = stream_seed(c.seed, "pool");
        seeds.diagnostics = stream_seed(c.seed, "diagnostics");
        RunInstrumentation instr;
        instr.inversion_error = [&ex](const Vector& r) { return ex.inversion_error(r); };
        instr.per_iteration_model_error = c.per_iteration_model_error;
        const AdaptiveResult res = run_adaptive(full, sur, ex.data, ex.initial, ucfg, c.policy(), seeds, instr);

        double fine_tune = 0.0;
        for (const auto& cy : res.cycles) fine_tune += cy.fine_tune_seconds;
        rec.timings.push_back({"inversion", clock.seconds()});
        rec.timings.push_back({"fine_tune", fine_tune});
        for (const auto& it : res.iterations)
            rec.series.push_back({it.cycle, it.step, it.iteration, it.e_D, it.e_M, it.e_I});
        rec.cycles = res.cycles;
        rec.e0 = res.e0;
        rec.final_r = res.final_state.r;
        rec.final_diag_C = res.final_state.C.diagonal();
        rec.final_e_D = res.final_misfit;
        rec.final_e_I = ex.inversion_error(res.final_state.r);
        rec.termination = res.termination;
    }
    rec.timings.push_back({"total", clock.seconds()});
    rec.set_counts(ledger);
    return rec;
}

void write_run(const fs::path& dir, const Experiment& ex, const RunRecord& record) {
    fs::create_directories(dir);
    write_text(dir / "config.json", ex.config.to_json() + "\n");
    write_text(dir / "record.json", record.to_json() + "\n");
    write_text(dir / "series.csv", record.series_csv());
    if (ex.config.save_fields && ex.config.problem != ProblemKind::heat_loc) {
        fs::create_directories(dir / "fields");
        save_field(dir / "fields" / "truth.bin", ex.truth_field);
        save_field(dir / "fields" / "estimate.bin", ex.estimate_field(record.final_r));
    }
}

} // namespace auki
