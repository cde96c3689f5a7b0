#pragma once

// Run configuration. A config is a flat JSON object; every key can also be
// set from the command line. Keys that hold `null` are resolved from the
// problem and noise level by resolve().

#include "auki/adaptive.hpp"
#include "auki/deeponet.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace auki {

enum class RunMode { fem_uki, deeponet_direct, deeponet_adaptive };
std::string to_string(RunMode m);
RunMode mode_from_string(const std::string& s);

enum class TruthKind { idd, ood };
std::string to_string(TruthKind t);
TruthKind truth_from_string(const std::string& s);

struct RunConfig {
    std::string preset = "desk";
    ProblemKind problem = ProblemKind::darcy;
    RunMode mode = RunMode::deeponet_adaptive;
    TruthKind truth = TruthKind::idd;

    std::size_t grid = 24;
    std::size_t n_modes = 32;
    std::size_t truth_modes = 256;
    double ood_bound = 20.0;
    std::optional<std::size_t> sensors; // lattice side; 6 for field problems, 3 for heat-loc
    std::vector<double> heat_loc_truth{0.2, 0.2};

    double delta = 0.01;
    double noise_floor = kDefaultNoiseFloor;

    std::optional<double> alpha; // 1 for delta = 0.01, otherwise 0.5
    std::size_t T_fem = 20;
    std::size_t T = 10;
    std::optional<double> init_cov;  // C0 = init_cov * I
    std::vector<double> init_mean;   // empty: draw r0 ~ N(0, I)

    double epsilon = 0.01;
    std::size_t I_max = 10;
    std::optional<std::size_t> Q; // 50 for delta = 0.01, otherwise 20
    std::size_t K = 2000;
    double lambda = 1.0;
    std::size_t M = 20;
    bool refine_last_cycle = false;
    bool per_iteration_model_error = true;

    std::size_t n_prior = 200;
    double train_lo = 0.5; // heat-loc offline box
    double train_hi = 1.0;
    std::size_t encoder_lattice = 8;
    std::vector<std::size_t> branch_hidden{64, 64, 64};
    std::vector<std::size_t> trunk_hidden{64, 64, 64};
    std::size_t p = 40;
    std::size_t offline_iters = 20000;
    double lr = 1e-3;
    double lr_decay = 1.0;
    std::size_t lr_decay_steps = 1000;
    std::size_t batch = 0;
    std::size_t online_iters = 2000;
    double online_lr = 5e-4;

    double heat_loc_dt = 0.01;
    std::size_t heat_field_steps = 50;
    double rd_dt = 0.02;

    std::uint64_t seed = 1;
    std::string out_dir = "runs/default";
    std::string checkpoint; // prefix of an offline checkpoint
    int workers = 0;        // 0: AUKI_WORKERS or 1
    bool save_fields = true;

    /// Fills every optional from the problem and noise level and checks ranges.
    void resolve();
    void validate() const;

    double alpha_value() const;
    std::size_t Q_value() const;
    std::size_t sensors_value() const;
    double init_cov_value() const;
    int workers_value() const;

    NetArch arch(std::size_t parameter_dim) const;
    RefinePolicy policy() const;

    std::string to_json() const;
};

/// Preset defaults: "desk" (24x24, N_m = 32) or "paper" (70x70, N_m = 128).
RunConfig preset_config(const std::string& name);

/// Applies the keys of a JSON object to cfg; unknown keys are an error.
void apply_json(RunConfig& cfg, const std::string& json_text);

/// Config keys in canonical order with their JSON-encoded default values.
std::vector<std::pair<std::string, std::string>> config_keys();

/// preset(file/overrides) <- file <- overrides. Overrides are (key, value)
/// pairs whose values are JSON literals or bare strings.
RunConfig load_config(const std::filesystem::path* file,
                      const std::vector<std::pair<std::string, std::string>>& overrides);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace auki
