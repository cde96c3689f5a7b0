#pragma once

// Outer refinement loop: UKI on the surrogate, anchor selection with the
// full-order misfit, a relative-change stopping test, greedy selection of
// refinement samples near the anchor, and warm-started fine-tuning.

#include "auki/deeponet.hpp"
#include "auki/observe.hpp"
#include "auki/pde_forward.hpp"
#include "auki/uki.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace auki {

/// Full-order side of an inversion. Every column passed in is one ledgered solve.
class FullOrderMap {
public:
    virtual ~FullOrderMap() = default;
    virtual std::size_t parameter_dim() const = 0;
    virtual Matrix observe(const Matrix& params, EvalCategory category) = 0;
    virtual std::vector<TrainingEntry> training_entries(const Matrix& params, SampleTag tag,
                                                        EvalCategory category) = 0;
    virtual const EvaluationLedger& ledger() const = 0;

    BatchForward as_forward(EvalCategory category) {
        return [this, category](const Matrix& p) { return observe(p, category); };
    }
};

/// Cheap approximate map that can absorb new training samples.
class AdaptiveSurrogate {
public:
    virtual ~AdaptiveSurrogate() = default;
    virtual Matrix observe(const Matrix& params) const = 0;
    virtual void refine(std::vector<TrainingEntry> entries) = 0;

    BatchForward as_forward() const {
        return [this](const Matrix& p) { return observe(p); };
    }
};

/// FullOrderMap over a PDE ForwardModel observed at sensors. Training targets
/// are every grid node of every frame.
class PdeFullOrderMap final : public FullOrderMap {
public:
    PdeFullOrderMap(const ForwardModel& model, SensorArray sensors, Encoder encoder, EvaluationLedger& ledger,
                    int workers = 1);

    std::size_t parameter_dim() const override { return model_->parameter_dim(); }
    Matrix observe(const Matrix& params, EvalCategory category) override;
    std::vector<TrainingEntry> training_entries(const Matrix& params, SampleTag tag, EvalCategory category) override;
    const EvaluationLedger& ledger() const override { return *ledger_; }

    /// Entry for an already-computed solution (no ledger effect).
    TrainingEntry make_entry(const Vector& params, const std::vector<Field>& solution, SampleTag tag) const;

private:
    std::vector<std::vector<Field>> solve_all(const Matrix& params, EvalCategory category);

    const ForwardModel* model_;
    SensorArray sensors_;
    Encoder encoder_;
    EvaluationLedger* ledger_;
    int workers_;
};

struct FineTuneOptions {
    std::size_t iterations = 2000;
    double learning_rate = 5e-4;
    std::uint64_t seed = 0;
};

/// DeepONet surrogate that owns its training set; refine() appends the new
/// samples and fine-tunes on the union.
class DeepONetSurrogate final : public AdaptiveSurrogate {
public:
    DeepONetSurrogate(Surrogate surrogate, TrainingSet data, std::shared_ptr<const KLBasis> basis,
                      Matrix output_queries, FineTuneOptions options);

    Matrix observe(const Matrix& params) const override;
    void refine(std::vector<TrainingEntry> entries) override;

    const Surrogate& surrogate() const noexcept { return surrogate_; }
    const TrainingSet& data() const noexcept { return data_; }
    const std::vector<TrainResult>& fine_tune_log() const noexcept { return log_; }

private:
    Surrogate surrogate_;
    TrainingSet data_;
    std::shared_ptr<const KLBasis> basis_;
    Matrix queries_;
    FineTuneOptions options_;
    std::unique_ptr<SurrogateMap> map_;
    std::vector<TrainResult> log_;
    std::size_t refinements_ = 0;
};

struct AnchorRecord {
    Vector r;
    Matrix C;
    double e = 0.0;
    std::size_t index = 0; // 1-based position in the trajectory
    std::vector<double> misfits;
};

/// Full-order misfit at every trajectory mean; the minimizer (smallest index
/// on ties). Non-finite misfits are skipped.
AnchorRecord select_anchor(const std::vector<GaussianState>& trajectory, const BatchForward& full_forward,
                           const ObservationData& data);

/// |(e_prev - e_next) / e_next| > epsilon; false when e_next == 0.
bool should_refine(double e_prev, double e_next, double epsilon);

/// Sequential greedy choice of Q pool columns maximizing
///   max_{selected} ||G(m) - G(m_sel)||_2 - lambda ||m - anchor||_2,
/// with the distance to the empty set taken as 0. Ties go to the smallest index.
std::vector<std::size_t> greedy_select(const Matrix& pool, const Matrix& pool_outputs, const Vector& anchor,
                                       std::size_t Q, double lambda);
std::vector<std::size_t> greedy_select(const Matrix& pool, const BatchForward& surrogate_map, const Vector& anchor,
                                       std::size_t Q, double lambda);

/// Mean output-space distance between surrogate and full-order predictions.
double local_model_error(const BatchForward& surrogate_map, const BatchForward& full_map, const Matrix& samples);

/// ||m_hat - m_ref|| / ||m_ref|| on node values.
double relative_inversion_error(const Field& m_hat, const Field& m_ref);

/// Columns drawn from N(r, C).
Matrix sample_gaussian(const GaussianState& g, std::size_t count, Rng& rng);

/// Asymptotic speed-up (2 Nm + 1) T_fem / ((Q + T) I_max).
double speedup(std::size_t n_m, std::size_t t_fem, std::size_t Q, std::size_t T, std::size_t i_max);

struct RefinePolicy {
    double epsilon = 0.01;
    std::size_t max_refinements = 10; // I_max
    std::size_t uki_steps = 10;       // T
    std::size_t samples = 50;         // Q
    std::size_t pool = 2000;          // K
    double lambda = 1.0;
    std::size_t diag_samples = 20;    // M; 0 disables e_M
    bool refine_last_cycle = false;

    void validate() const;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct IterationMetrics {
    std::size_t cycle = 0;
    std::size_t step = 0;        // 1-based within the cycle
    std::size_t iteration = 0;   // 1-based across the run
    double e_D = kNaN;           // full-order data misfit at the mean
    double e_M = kNaN;           // local model error around the mean
    double e_I = kNaN;           // relative inversion error of the mean
};

struct CycleRecord {
    std::size_t cycle = 0;
    std::size_t uki_steps = 0;
    std::size_t anchor_index = 0;
    double e_anchor = kNaN;
    double e_previous = kNaN;
    double e_I_anchor = kNaN;
    bool refined = false;
    double e_M_before = kNaN; // around the anchor, surrogate before refinement
    double e_M_after = kNaN;  // same samples, after refinement
    std::size_t new_samples = 0;
    double fine_tune_seconds = 0.0;
    std::string note;
};

struct AdaptiveResult {
    GaussianState final_state;
    double final_misfit = kNaN;
    double e0 = kNaN;
    std::vector<GaussianState> trajectory;
    std::vector<IterationMetrics> iterations;
    std::vector<CycleRecord> cycles;
    std::string termination;
};

struct AdaptiveSeeds {
    std::uint64_t pool = 1;
    std::uint64_t diagnostics = 2;
};

/// Per-iteration instrumentation hooks; either may be empty.
struct RunInstrumentation {
    std::function<double(const Vector&)> inversion_error; // e_I of a mean
    bool per_iteration_model_error = true;
};

/// The refinement loop. Stage failures end the loop and are recorded in
/// `termination`; the partial record is still returned.
AdaptiveResult run_adaptive(FullOrderMap& full, AdaptiveSurrogate& surrogate, const ObservationData& data,
                            const GaussianState& initial, const UKIConfig& uki, const RefinePolicy& policy,
                            const AdaptiveSeeds& seeds, const RunInstrumentation& instr = {});

} // namespace auki
