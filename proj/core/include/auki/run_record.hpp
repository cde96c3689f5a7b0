#pragma once

#include "auki/adaptive.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace auki {

struct SeriesRow {
    std::size_t cycle = 0;
    std::size_t step = 0;
    std::size_t iteration = 0;
    double e_D = kNaN;
    double e_M = kNaN;
    double e_I = kNaN;
};

struct PhaseTiming {
    std::string phase;
    double seconds = 0.0;
};

/// Everything an inversion run reports.
struct RunRecord {
    std::string mode;
    std::string problem;
    std::string config_json; // echo of the resolved config
    std::uint64_t seed = 0;

    std::size_t n_m = 0;
    std::size_t T = 0;       // UKI steps per sweep
    std::size_t T_fem = 0;
    std::size_t Q = 0;
    std::size_t I_max = 0;

    std::vector<SeriesRow> series;
    std::vector<CycleRecord> cycles;

    std::array<std::size_t, kEvalCategoryCount> counts{};
    std::size_t total_evaluations = 0;
    std::size_t offline_evaluations = 0; // carried from the checkpoint, not part of counts

    std::vector<PhaseTiming> timings;
    Vector final_r;
    Vector final_diag_C;
    Vector truth; // ground-truth parameters when they exist (heat-loc)
    double e0 = kNaN;
    double final_e_D = kNaN;
    double final_e_I = kNaN;
    std::string termination;

    std::size_t count(EvalCategory c) const { return counts[static_cast<std::size_t>(c)]; }
    std::size_t category_sum() const;
    /// Full-order calls that the speed-up accounting charges to this run.
    std::size_t charged_evaluations() const;
    std::size_t cycles_used() const noexcept { return cycles.size(); }
    double first_model_error_before() const;
    double last_model_error_after() const;
    double seconds(const std::string& phase) const;

    void set_counts(const EvaluationLedger& ledger);

    std::string to_json() const;
    static RunRecord from_json(const std::string& text);
    std::string series_csv() const;
};

} // namespace auki
