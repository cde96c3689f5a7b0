#pragma once

#include <Eigen/Dense>

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace auki {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A linear or nonlinear solve that did not reach its tolerance.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

using Rng = std::mt19937_64;

/// Derive an independent generator for a named stream from a master seed.
/// The mapping is stable across platforms: FNV-1a of the name mixed into a seed_seq.
Rng make_stream(std::uint64_t master_seed, std::string_view name);

/// Fill a vector with i.i.d. standard normal draws.
Vector standard_normal(Rng& rng, Eigen::Index n);

/// Category of a full-order model invocation.
enum class EvalCategory : int {
    offline = 0,     // training-set generation
    uki,             // sigma-point evaluations of FEM-UKI
    anchor_scan,     // data-fitting error at trajectory means
    adaptive_sample, // greedy-selected refinement samples
    diagnostic,      // local model error and other instrumentation
    other,
};
inline constexpr std::size_t kEvalCategoryCount = 6;

std::string_view to_string(EvalCategory c);

/// Counts full-order evaluations by category. Increments are atomic so the
/// ledger can be shared by parallel workers.
class EvaluationLedger {
public:
    EvaluationLedger() = default;
    EvaluationLedger(const EvaluationLedger& other);
    EvaluationLedger& operator=(const EvaluationLedger& other);

    void record(EvalCategory c, std::size_t n = 1) noexcept;
    std::size_t count(EvalCategory c) const noexcept;
    std::size_t total() const noexcept { return total_.load(); }
    /// Sum over categories; equals total() whenever all increments went through record().
    std::size_t category_sum() const noexcept;
    void reset() noexcept;

private:
    std::array<std::atomic<std::size_t>, kEvalCategoryCount> counts_{};
    std::atomic<std::size_t> total_{0};
};

/// Number of worker threads used for embarrassingly parallel loops.
/// Reads AUKI_WORKERS; defaults to 1.
int default_workers();

/// Run fn(i) for i in [0, n). Each index is processed exactly once; callers
/// store results by index so reductions stay in fixed order.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

} // namespace auki
