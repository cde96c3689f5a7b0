#pragma once

// Benchmark setup and the three inversion modes, shared by the CLI and the
// acceptance suite.

#include "auki/config.hpp"
#include "auki/run_record.hpp"

#include <filesystem>
#include <memory>

namespace auki {

/// Problem constants for the configured benchmark and grid.
Problem make_problem(const RunConfig& cfg);

/// Everything fixed before an inversion starts: models, sensors, truth,
/// synthetic data and the initial Gaussian.
struct Experiment {
    RunConfig config;
    std::shared_ptr<const KLBasis> basis; // inversion basis; null for heat-loc
    std::shared_ptr<const ForwardModel> model;
    SensorArray sensors;
    Encoder encoder;
    NetArch arch;

    Vector truth_params; // source location (heat-loc) or truth KL coefficients
    Field truth_field;   // empty for heat-loc
    Vector y_ref;
    ObservationData data;
    GaussianState initial;

    Matrix train_queries; // every grid node of every frame
    Matrix obs_queries;   // sensor locations of every frame

    std::size_t parameter_dim() const { return model->parameter_dim(); }
    /// Relative error of the estimate: field norm for KL problems, location norm for heat-loc.
    double inversion_error(const Vector& r) const;
    /// Physical field of a parameter vector (heat-loc: empty field).
    Field estimate_field(const Vector& r) const;
};

Experiment make_experiment(const RunConfig& cfg);

/// Offline surrogate plus the data it was fitted on.
struct OfflineArtifacts {
    Surrogate surrogate;
    TrainingSet data;
    TrainResult fit;
    std::size_t offline_evaluations = 0;
    double solve_seconds = 0.0;
    double train_seconds = 0.0;
};

/// Draws n_prior inputs, solves each (ledger category: offline) and trains.
OfflineArtifacts train_offline(const Experiment& ex);

/// <prefix>.json/.bin (weights), <prefix>.data.bin (training set),
/// <prefix>.meta.json (problem signature and offline statistics).
void save_offline(const OfflineArtifacts& off, const Experiment& ex, const std::filesystem::path& prefix);
/// Throws when the checkpoint was built for a different problem, grid or basis.
OfflineArtifacts load_offline(const std::filesystem::path& prefix, const Experiment& ex);

void save_training_set(const TrainingSet& data, const std::filesystem::path& path);
TrainingSet load_training_set(const std::filesystem::path& path);

/// Runs the configured mode. DeepONet modes need `offline`; adaptive mode
/// fine-tunes a private copy.
RunRecord run_inversion(const Experiment& ex, const OfflineArtifacts* offline);

/// config.json, record.json, series.csv and fields/*.bin under dir.
void write_run(const std::filesystem::path& dir, const Experiment& ex, const RunRecord& record);

} // namespace auki
