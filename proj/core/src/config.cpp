#include "auki/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace auki {

using nlohmann::json;

std::string to_string(RunMode m) {
    switch (m) {
    case RunMode::fem_uki: return "fem-uki";
    case RunMode::deeponet_direct: return "deeponet-direct";
    case RunMode::deeponet_adaptive: return "deeponet-adaptive";
    }
    return "?";
}

RunMode mode_from_string(const std::string& s) {
    if (s == "fem-uki") return RunMode::fem_uki;
    if (s == "deeponet-direct") return RunMode::deeponet_direct;
    if (s == "deeponet-adaptive") return RunMode::deeponet_adaptive;
    throw Error("unknown mode '" + s + "' (fem-uki, deeponet-direct, deeponet-adaptive)");
}

std::string to_string(TruthKind t) { return t == TruthKind::idd ? "idd" : "ood"; }

TruthKind truth_from_string(const std::string& s) {
    if (s == "idd") return TruthKind::idd;
    if (s == "ood") return TruthKind::ood;
    throw Error("unknown truth '" + s + "' (idd, ood)");
}

namespace {

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <class T>
void get_opt(const json& j, std::optional<T>& v) {
    if (j.is_null()) v.reset();
    else v = j.get<T>();
}

json to_json_obj(const RunConfig& c) {
    json j;
    j["preset"] = c.preset;
    j["problem"] = to_string(c.problem);
    j["mode"] = to_string(c.mode);
    j["truth"] = to_string(c.truth);
    j["grid"] = c.grid;
    j["n_modes"] = c.n_modes;
    j["truth_modes"] = c.truth_modes;
    j["ood_bound"] = c.ood_bound;
    j["sensors"] = opt(c.sensors);
    j["heat_loc_truth"] = c.heat_loc_truth;
    j["delta"] = c.delta;
    j["noise_floor"] = c.noise_floor;
    j["alpha"] = opt(c.alpha);
    j["T_fem"] = c.T_fem;
    j["T"] = c.T;
    j["init_cov"] = opt(c.init_cov);
    j["init_mean"] = c.init_mean;
    j["epsilon"] = c.epsilon;
    j["I_max"] = c.I_max;
    j["Q"] = opt(c.Q);
    j["K"] = c.K;
    j["lambda"] = c.lambda;
    j["M"] = c.M;
    j["refine_last_cycle"] = c.refine_last_cycle;
    j["per_iteration_model_error"] = c.per_iteration_model_error;
    j["n_prior"] = c.n_prior;
    j["train_lo"] = c.train_lo;
    j["train_hi"] = c.train_hi;
    j["encoder_lattice"] = c.encoder_lattice;
    j["branch_hidden"] = c.branch_hidden;
    j["trunk_hidden"] = c.trunk_hidden;
    j["p"] = c.p;
    j["offline_iters"] = c.offline_iters;
    j["lr"] = c.lr;
    j["lr_decay"] = c.lr_decay;
    j["lr_decay_steps"] = c.lr_decay_steps;
    j["batch"] = c.batch;
    j["online_iters"] = c.online_iters;
    j["online_lr"] = c.online_lr;
    j["heat_loc_dt"] = c.heat_loc_dt;
    j["heat_field_steps"] = c.heat_field_steps;
    j["rd_dt"] = c.rd_dt;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    j["checkpoint"] = c.checkpoint;
    j["workers"] = c.workers;
    j["save_fields"] = c.save_fields;
    return j;
}

void apply_object(RunConfig& c, const json& j) {
    if (!j.is_object()) throw Error("config: expected a JSON object");
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "preset") c.preset = v.get<std::string>();
            else if (key == "problem") c.problem = problem_from_string(v.get<std::string>());
            else if (key == "mode") c.mode = mode_from_string(v.get<std::string>());
            else if (key == "truth") c.truth = truth_from_string(v.get<std::string>());
            else if (key == "grid") c.grid = v.get<std::size_t>();
            else if (key == "n_modes") c.n_modes = v.get<std::size_t>();
            else if (key == "truth_modes") c.truth_modes = v.get<std::size_t>();
            else if (key == "ood_bound") c.ood_bound = v.get<double>();
            else if (key == "sensors") get_opt(v, c.sensors);
            else if (key == "heat_loc_truth") c.heat_loc_truth = v.get<std::vector<double>>();
            else if (key == "delta") c.delta = v.get<double>();
            else if (key == "noise_floor") c.noise_floor = v.get<double>();
            else if (key == "alpha") get_opt(v, c.alpha);
            else if (key == "T_fem") c.T_fem = v.get<std::size_t>();
            else if (key == "T") c.T = v.get<std::size_t>();
            else if (key == "init_cov") get_opt(v, c.init_cov);
            else if (key == "init_mean") c.init_mean = v.get<std::vector<double>>();
            else if (key == "epsilon") c.epsilon = v.get<double>();
            else if (key == "I_max") c.I_max = v.get<std::size_t>();
            else if (key == "Q") get_opt(v, c.Q);
            else if (key == "K") c.K = v.get<std::size_t>();
            else if (key == "lambda") c.lambda = v.get<double>();
            else if (key == "M") c.M = v.get<std::size_t>();
            else if (key == "refine_last_cycle") c.refine_last_cycle = v.get<bool>();
            else if (key == "per_iteration_model_error") c.per_iteration_model_error = v.get<bool>();
            else if (key == "n_prior") c.n_prior = v.get<std::size_t>();
            else if (key == "train_lo") c.train_lo = v.get<double>();
            else if (key == "train_hi") c.train_hi = v.get<double>();
            else if (key == "encoder_lattice") c.encoder_lattice = v.get<std::size_t>();
            else if (key == "branch_hidden") c.branch_hidden = v.get<std::vector<std::size_t>>();
            else if (key == "trunk_hidden") c.trunk_hidden = v.get<std::vector<std::size_t>>();
            else if (key == "p") c.p = v.get<std::size_t>();
            else if (key == "offline_iters") c.offline_iters = v.get<std::size_t>();
            else if (key == "lr") c.lr = v.get<double>();
            else if (key == "lr_decay") c.lr_decay = v.get<double>();
            else if (key == "lr_decay_steps") c.lr_decay_steps = v.get<std::size_t>();
            else if (key == "batch") c.batch = v.get<std::size_t>();
            else if (key == "online_iters") c.online_iters = v.get<std::size_t>();
            else if (key == "online_lr") c.online_lr = v.get<double>();
            else if (key == "heat_loc_dt") c.heat_loc_dt = v.get<double>();
            else if (key == "heat_field_steps") c.heat_field_steps = v.get<std::size_t>();
            else if (key == "rd_dt") c.rd_dt = v.get<double>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "out_dir") c.out_dir = v.get<std::string>();
            else if (key == "checkpoint") c.checkpoint = v.get<std::string>();
            else if (key == "workers") c.workers = v.get<int>();
            else if (key == "save_fields") c.save_fields = v.get<bool>();
            else throw Error("unknown key");
        } catch (const json::exception& e) {
            throw Error("config key '" + key + "': " + e.what());
        } catch (const Error& e) {
            throw Error("config key '" + key + "': " + e.what());
        }
    }
}

json parse_literal(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text); // bare string
    }
}

} // namespace

RunConfig preset_config(const std::string& name) {
    RunConfig c;
    c.preset = name;
    if (name == "desk") return c;
    if (name == "paper") {
        c.grid = 70;
        c.n_modes = 128;
        c.n_prior = 1000;
        c.encoder_lattice = 16;
        c.branch_hidden.assign(5, 100);
        c.trunk_hidden.assign(5, 100);
        c.p = 100;
        c.offline_iters = 100000;
        c.M = 100;
        return c;
    }
    throw Error("unknown preset '" + name + "' (desk, paper)");
}

void RunConfig::resolve() {
    if (!alpha) alpha = alpha_value();
    if (!Q) Q = Q_value();
    if (!sensors) sensors = sensors_value();
    if (!init_cov) init_cov = init_cov_value();
    if (problem == ProblemKind::heat_loc) {
        if (init_mean.empty()) init_mean = {0.6, 0.6};
        if (preset == "paper" && n_prior == 1000) n_prior = 500;
    }
    validate();
}

double RunConfig::alpha_value() const {
    if (alpha) return *alpha;
    return std::abs(delta - 0.01) < 1e-12 ? 1.0 : 0.5;
}

std::size_t RunConfig::Q_value() const {
    if (Q) return *Q;
    return std::abs(delta - 0.01) < 1e-12 ? 50 : 20;
}

std::size_t RunConfig::sensors_value() const {
    if (sensors) return *sensors;
    return problem == ProblemKind::heat_loc ? 3 : 6;
}

double RunConfig::init_cov_value() const {
    if (init_cov) return *init_cov;
    return problem == ProblemKind::heat_loc ? 0.01 : 1.0;
}

int RunConfig::workers_value() const { return workers > 0 ? workers : default_workers(); }

void RunConfig::validate() const {
    if (grid < 3) throw Error("config: grid must be at least 3");
    if (n_modes == 0) throw Error("config: n_modes must be positive");
    if (truth_modes < n_modes) throw Error("config: truth_modes must be at least n_modes");
    if (!(delta >= 0.0)) throw Error("config: delta must be non-negative");
    const double a = alpha_value();
    if (!(a > 0.0 && a <= 1.0)) throw Error("config: alpha must lie in (0, 1]");
    if (T == 0 || T_fem == 0 || I_max == 0) throw Error("config: T, T_fem and I_max must be positive");
    if (Q_value() > K) throw Error("config: Q must not exceed K");
    if (!(init_cov_value() > 0.0)) throw Error("config: init_cov must be positive");
    if (heat_loc_truth.size() != 2) throw Error("config: heat_loc_truth needs two entries");
    if (encoder_lattice < 2 || encoder_lattice > grid) throw Error("config: encoder_lattice must be in [2, grid]");
    if (p == 0) throw Error("config: p must be positive");
    if (!(train_lo < train_hi)) throw Error("config: train_lo must be below train_hi");
    if (n_prior == 0) throw Error("config: n_prior must be positive");
}

NetArch RunConfig::arch(std::size_t parameter_dim) const {
    NetArch a;
    a.branch_in = problem == ProblemKind::heat_loc ? parameter_dim : encoder_lattice * encoder_lattice;
    a.branch_hidden = branch_hidden;
    a.trunk_in = problem == ProblemKind::heat_loc ? 3 : 2;
    a.trunk_hidden = trunk_hidden;
    a.p = p;
    return a;
}

RefinePolicy RunConfig::policy() const {
    RefinePolicy r;
    r.epsilon = epsilon;
    r.max_refinements = I_max;
    r.uki_steps = T;
    r.samples = Q_value();
    r.pool = K;
    r.lambda = lambda;
    r.diag_samples = M;
    r.refine_last_cycle = refine_last_cycle;
    return r;
}

std::string RunConfig::to_json() const { return to_json_obj(*this).dump(2); }

void apply_json(RunConfig& cfg, const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    apply_object(cfg, j);
}

std::vector<std::pair<std::string, std::string>> config_keys() {
    std::vector<std::pair<std::string, std::string>> out;
    const json j = to_json_obj(RunConfig{});
    // json objects iterate in sorted order; keep that for stable --help output.
    for (const auto& [k, v] : j.items()) out.emplace_back(k, v.dump());
    return out;
}

RunConfig load_config(const std::filesystem::path* file,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
    json from_file = json::object();
    if (file) {
        try {
            from_file = json::parse(read_text(*file));
        } catch (const json::exception& e) {
            throw Error("config file " + file->string() + ": " + e.what());
        }
    }
    json from_flags = json::object();
    for (const auto& [k, v] : overrides) from_flags[k] = parse_literal(v);

    std::string preset = "desk";
    if (from_file.contains("preset")) preset = from_file["preset"].get<std::string>();
    if (from_flags.contains("preset")) preset = from_flags["preset"].get<std::string>();
    RunConfig cfg = preset_config(preset);
    apply_object(cfg, from_file);
    apply_object(cfg, from_flags);
    cfg.resolve();
    return cfg;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

} // namespace auki
