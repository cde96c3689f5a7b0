#pragma once

// Summary tables over finished runs. The output is a pure function of the
// records passed in.

#include "auki/run_record.hpp"

#include <string>
#include <utility>
#include <vector>

namespace auki {

struct ReportRow {
    std::string label;
    std::string mode;
    std::string problem;
    double final_e_I = kNaN;
    double final_e_D = kNaN;
    std::size_t charged_evaluations = 0; // uki + anchor scans + adaptive samples
    std::size_t diagnostic_evaluations = 0;
    std::size_t offline_evaluations = 0;
    std::size_t cycles_used = 0;
    /// (2 N_m + 1) T_fem / ((Q + T) cycles_used); 1 for fem-uki, NaN for direct.
    double speedup = kNaN;
    /// FEM-UKI charged evaluations (measured when a fem-uki record of the same
    /// problem is present) divided by this run's charged evaluations.
    double measured_speedup = kNaN;
    double seconds = 0.0;
};

struct Report {
    std::vector<ReportRow> rows;
    std::vector<std::pair<std::string, RunRecord>> records;

    std::string to_json() const;
    std::string to_csv() const;
    /// Per-iteration error curves of every run, long format.
    std::string curves_csv() const;
};

Report make_report(std::vector<std::pair<std::string, RunRecord>> records);

} // namespace auki
