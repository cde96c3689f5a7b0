// auki: command-line harness for surrogate-accelerated unscented Kalman inversion.

#include "auki/experiment.hpp"
#include "auki/field_io.hpp"
#include "auki/linear_theory.hpp"
#include "auki/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace auki;

namespace {

std::string flag_name(const std::string& key) {
    std::string out = key;
    for (auto& ch : out)
        if (ch == '_') ch = '-';
    return "--" + out;
}

/// Config file option plus one flag per config key.
struct ConfigFlags {
    std::string file;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", file, "JSON run config");
        for (const auto& [key, def] : config_keys()) {
            options[key] = app->add_option(flag_name(key), values[key], "config key " + key + " (default " + def + ")")
                               ->group("Config overrides");
        }
    }

    RunConfig load() const {
        std::vector<std::pair<std::string, std::string>> overrides;
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) overrides.emplace_back(key, values.at(key));
        const fs::path path(file);
        return load_config(file.empty() ? nullptr : &path, overrides);
    }
};

void log(const std::string& msg) { std::cerr << "[auki] " << msg << '\n'; }

int cmd_train_offline(const ConfigFlags& flags) {
    const RunConfig cfg = flags.load();
    const Experiment ex = make_experiment(cfg);
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_text(dir / "config.json", ex.config.to_json() + "\n");
    log("solving " + std::to_string(cfg.n_prior) + " offline samples and training for " +
        std::to_string(cfg.offline_iters) + " iterations");
    const OfflineArtifacts off = train_offline(ex);
    const fs::path prefix = dir / "checkpoint";
    save_offline(off, ex, prefix);
    std::ostringstream msg;
    msg << "offline evaluations " << off.offline_evaluations << ", loss " << off.fit.initial_loss << " -> "
        << off.fit.final_loss << ", train " << off.train_seconds << " s";
    log(msg.str());
    std::cout << prefix.string() << '\n';
    return 0;
}

int cmd_invert(const ConfigFlags& flags) {
    const RunConfig cfg = flags.load();
    const Experiment ex = make_experiment(cfg);
    std::optional<OfflineArtifacts> off;
    if (cfg.mode != RunMode::fem_uki) {
        if (cfg.checkpoint.empty()) throw Error("mode " + to_string(cfg.mode) + " needs --checkpoint");
        off = load_offline(cfg.checkpoint, ex);
    }
    log("running " + to_string(cfg.mode) + " on " + to_string(cfg.problem));
    const RunRecord rec = run_inversion(ex, off ? &*off : nullptr);
    const fs::path dir(cfg.out_dir);
    write_run(dir, ex, rec);
    std::ostringstream msg;
    msg << "e_I " << rec.final_e_I << ", e_D " << rec.final_e_D << ", charged evaluations "
        << rec.charged_evaluations() << ", " << rec.termination;
    log(msg.str());
    std::cout << (dir / "record.json").string() << '\n';
    return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out) {
    std::vector<std::pair<std::string, RunRecord>> records;
    for (const auto& r : runs) {
        fs::path p(r);
        if (fs::is_directory(p)) p /= "record.json";
        const std::string label = fs::path(r).filename().empty() ? r : fs::path(r).filename().string();
        records.emplace_back(label, RunRecord::from_json(read_text(p)));
    }
    const Report rep = make_report(std::move(records));
    if (out.empty()) {
        std::cout << rep.to_csv();
        return 0;
    }
    const fs::path dir(out);
    write_text(dir / "summary.json", rep.to_json() + "\n");
    write_text(dir / "summary.csv", rep.to_csv());
    write_text(dir / "curves.csv", rep.curves_csv());
    std::cout << rep.to_csv();
    return 0;
}

int cmd_verify_linear(long ny, long nm, double alpha, std::uint64_t seed, std::uint64_t direction_seed,
                      const std::vector<double>& eps, const std::string& out) {
    const LinearModel model = random_linear_model(ny, nm, alpha, seed);
    const ErrorBoundReport report = verify_error_bound(model, eps, direction_seed);
    const std::string text = report.to_json();
    if (!out.empty()) write_text(out, text + "\n");
    std::cout << text << '\n';
    return report.pass() ? 0 : 1;
}

int cmd_solve_forward(const ConfigFlags& flags, const std::string& field_path, const std::vector<double>& params) {
    const RunConfig cfg = flags.load();
    const Experiment ex = make_experiment(cfg);
    std::vector<Field> states;
    Vector p;
    EvaluationLedger ledger;
    if (!field_path.empty()) {
        const Field m = load_field(field_path);
        if (!(m.grid == ex.model->grid())) throw Error("input field grid does not match the config grid");
        const Problem problem = make_problem(ex.config);
        states = std::visit(
            [&](const auto& pr) -> std::vector<Field> {
                using P = std::decay_t<decltype(pr)>;
                if constexpr (std::is_same_v<P, DarcyProblem>) return {solve_darcy(pr, m)};
                else if constexpr (std::is_same_v<P, HeatFieldProblem>) return {solve_heat_field(pr, m)};
                else if constexpr (std::is_same_v<P, ReactionDiffusionProblem>) return {solve_reaction_diffusion(pr, m)};
                else throw Error("heat-loc takes --params, not --field");
            },
            problem);
        ledger.record(EvalCategory::other);
    } else {
        if (params.empty()) {
            Rng rng = make_stream(cfg.seed, "prior");
            p = cfg.problem == ProblemKind::heat_loc ? draw_uniform(2, cfg.train_lo, cfg.train_hi, rng)
                                                     : draw_prior(cfg.n_modes, rng);
        } else {
            p = Eigen::Map<const Vector>(params.data(), static_cast<Eigen::Index>(params.size()));
        }
        states = forward_map(*ex.model, p, ledger, EvalCategory::other);
    }
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir / "fields");
    write_text(dir / "config.json", ex.config.to_json() + "\n");
    for (std::size_t k = 0; k < states.size(); ++k)
        save_field(dir / "fields" / ("state_" + std::to_string(k) + ".bin"), states[k]);
    nlohmann::json j;
    const Vector y = observe_frames(states, ex.sensors);
    j["observations"] = std::vector<double>(y.data(), y.data() + y.size());
    j["parameters"] = std::vector<double>(p.data(), p.data() + p.size());
    j["frame_times"] = ex.model->frame_times();
    j["evaluations"] = ledger.total();
    write_text(dir / "forward.json", j.dump(2) + "\n");
    std::cout << (dir / "fields").string() << '\n';
    return 0;
}

int cmd_sample_prior(std::size_t grid, std::size_t modes, std::size_t count, const std::string& law, double bound,
                     std::uint64_t seed, const std::string& out, const std::string& ext) {
    const Grid2D g(grid, grid);
    const KLBasis basis = build_kl_basis(g, modes, PriorParams{});
    Rng rng = make_stream(seed, "prior");
    const fs::path dir = fs::path(out) / "fields";
    fs::create_directories(dir);
    nlohmann::json coeffs = nlohmann::json::array();
    for (std::size_t k = 0; k < count; ++k) {
        Vector z;
        if (law == "normal") z = draw_prior(modes, rng);
        else if (law == "uniform") z = draw_uniform(modes, -bound, bound, rng);
        else throw Error("unknown law '" + law + "' (normal, uniform)");
        save_field(dir / ("sample_" + std::to_string(k) + ext), sample_field(basis, z));
        coeffs.push_back(std::vector<double>(z.data(), z.data() + z.size()));
    }
    nlohmann::json modes_json = nlohmann::json::array();
    for (const auto& m : basis.modes()) modes_json.push_back({{"k1", m.k1}, {"k2", m.k2}, {"eigenvalue", m.eigenvalue}});
    write_text(fs::path(out) / "samples.json",
               nlohmann::json{{"seed", seed}, {"law", law}, {"modes", modes_json}, {"coefficients", coeffs}}.dump(2) +
                   "\n");
    std::cout << dir.string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Surrogate-accelerated unscented Kalman inversion"};
    app.require_subcommand(1);

    ConfigFlags train_flags, invert_flags, forward_flags;
    auto* train = app.add_subcommand("train-offline", "solve prior samples and train the DeepONet surrogate");
    train_flags.attach(train);

    auto* invert = app.add_subcommand("invert", "run fem-uki, deeponet-direct or deeponet-adaptive");
    invert_flags.attach(invert);

    auto* report = app.add_subcommand("report", "summarize run records");
    std::vector<std::string> report_runs;
    std::string report_out;
    report->add_option("runs", report_runs, "run directories or record.json files")->required();
    report->add_option("-o,--out", report_out, "directory for summary.json, summary.csv and curves.csv");

    auto* linear = app.add_subcommand("verify-linear", "check first-order fixed-point sensitivity for linear models");
    long ny = 4, nm = 4;
    double alpha = 1.0;
    std::uint64_t lin_seed = 1, dir_seed = 2;
    std::vector<double> eps{1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4};
    std::string lin_out;
    linear->add_option("--ny", ny, "observation dimension")->capture_default_str();
    linear->add_option("--nm", nm, "parameter dimension")->capture_default_str();
    linear->add_option("--alpha", alpha, "regularization parameter")->capture_default_str();
    linear->add_option("--seed", lin_seed, "model seed")->capture_default_str();
    linear->add_option("--direction-seed", dir_seed, "perturbation direction seed")->capture_default_str();
    linear->add_option("--eps", eps, "perturbation sizes");
    linear->add_option("-o,--out", lin_out, "write the JSON report here");

    auto* forward = app.add_subcommand("solve-forward", "one full-order solve");
    forward_flags.attach(forward);
    std::string field_path;
    std::vector<double> fwd_params;
    forward->add_option("--field", field_path, "input field (.bin or .csv)");
    forward->add_option("--params", fwd_params, "parameter vector (KL coefficients or source location)");

    auto* sample = app.add_subcommand("sample-prior", "draw KL prior fields");
    std::size_t s_grid = 24, s_modes = 32, s_count = 1;
    std::string s_law = "normal", s_out = "runs/samples", s_ext = ".bin";
    double s_bound = 20.0;
    std::uint64_t s_seed = 1;
    sample->add_option("--grid", s_grid, "nodes per axis")->capture_default_str();
    sample->add_option("--n-modes", s_modes, "KL modes")->capture_default_str();
    sample->add_option("--count", s_count, "number of draws")->capture_default_str();
    sample->add_option("--law", s_law, "normal or uniform")->capture_default_str();
    sample->add_option("--bound", s_bound, "uniform law half-width")->capture_default_str();
    sample->add_option("--seed", s_seed, "master seed")->capture_default_str();
    sample->add_option("-o,--out", s_out, "output directory")->capture_default_str();
    sample->add_option("--format", s_ext, "file extension: .bin or .csv")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train_offline(train_flags);
        if (invert->parsed()) return cmd_invert(invert_flags);
        if (report->parsed()) return cmd_report(report_runs, report_out);
        if (linear->parsed()) return cmd_verify_linear(ny, nm, alpha, lin_seed, dir_seed, eps, lin_out);
        if (forward->parsed()) return cmd_solve_forward(forward_flags, field_path, fwd_params);
        if (sample->parsed()) return cmd_sample_prior(s_grid, s_modes, s_count, s_law, s_bound, s_seed, s_out, s_ext);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
