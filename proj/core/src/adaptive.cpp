#include "auki/adaptive.hpp"

#include <chrono>
#include <cmath>

namespace auki {

PdeFullOrderMap::PdeFullOrderMap(const ForwardModel& model, SensorArray sensors, Encoder encoder,
                                 EvaluationLedger& ledger, int workers)
    : model_(&model), sensors_(std::move(sensors)), encoder_(std::move(encoder)), ledger_(&ledger),
      workers_(workers) {}

std::vector<std::vector<Field>> PdeFullOrderMap::solve_all(const Matrix& params, EvalCategory category) {
    std::vector<std::vector<Field>> sols(static_cast<std::size_t>(params.cols()));
    parallel_for(sols.size(), workers_, [&](std::size_t k) {
        sols[k] = forward_map(*model_, params.col(static_cast<Eigen::Index>(k)), *ledger_, category);
    });
    return sols;
}

Matrix PdeFullOrderMap::observe(const Matrix& params, EvalCategory category) {
    const auto sols = solve_all(params, category);
    Matrix out;
    for (std::size_t k = 0; k < sols.size(); ++k) {
        const Vector obs = observe_frames(sols[k], sensors_);
        if (k == 0) out.resize(obs.size(), params.cols());
        out.col(static_cast<Eigen::Index>(k)) = obs;
    }
    return out;
}

TrainingEntry PdeFullOrderMap::make_entry(const Vector& params, const std::vector<Field>& solution,
                                          SampleTag tag) const {
    TrainingEntry e;
    e.params = params;
    e.tag = tag;
    e.encoded = encoder_.kind == Encoder::Kind::parameters ? params : encode(model_->parameter_field(params), encoder_);
    const auto n = static_cast<Eigen::Index>(model_->grid().size());
    e.target.resize(n * static_cast<Eigen::Index>(solution.size()));
    for (std::size_t f = 0; f < solution.size(); ++f) e.target.segment(static_cast<Eigen::Index>(f) * n, n) = solution[f].values;
    return e;
}

std::vector<TrainingEntry> PdeFullOrderMap::training_entries(const Matrix& params, SampleTag tag,
                                                             EvalCategory category) {
    const auto sols = solve_all(params, category);
    std::vector<TrainingEntry> out;
    out.reserve(sols.size());
    for (std::size_t k = 0; k < sols.size(); ++k) out.push_back(make_entry(params.col(static_cast<Eigen::Index>(k)), sols[k], tag));
    return out;
}

DeepONetSurrogate::DeepONetSurrogate(Surrogate surrogate, TrainingSet data, std::shared_ptr<const KLBasis> basis,
                                     Matrix output_queries, FineTuneOptions options)
    : surrogate_(std::move(surrogate)), data_(std::move(data)), basis_(std::move(basis)),
      queries_(std::move(output_queries)), options_(options) {
    map_ = std::make_unique<SurrogateMap>(surrogate_, basis_.get(), queries_);
}

Matrix DeepONetSurrogate::observe(const Matrix& params) const { return map_->evaluate(params); }

void DeepONetSurrogate::refine(std::vector<TrainingEntry> entries) {
    for (auto& e : entries) data_.entries.push_back(std::move(e));
    ++refinements_;
    log_.push_back(fine_tune(surrogate_, data_, options_.iterations, options_.learning_rate,
                             options_.seed + 7919 * refinements_));
    map_ = std::make_unique<SurrogateMap>(surrogate_, basis_.get(), queries_);
}

AnchorRecord select_anchor(const std::vector<GaussianState>& trajectory, const BatchForward& full_forward,
                           const ObservationData& data) {
    if (trajectory.empty()) throw Error("select_anchor: empty trajectory");
    Matrix means(trajectory.front().r.size(), static_cast<Eigen::Index>(trajectory.size()));
    for (std::size_t n = 0; n < trajectory.size(); ++n) means.col(static_cast<Eigen::Index>(n)) = trajectory[n].r;
    const Matrix obs = full_forward(means);
    AnchorRecord rec;
    rec.e = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < trajectory.size(); ++n) {
        const Vector g = obs.col(static_cast<Eigen::Index>(n));
        const double e = g.allFinite() ? misfit(g, data) : kNaN;
        rec.misfits.push_back(e);
        if (std::isfinite(e) && e < rec.e) {
            rec.e = e;
            rec.index = n + 1;
        }
    }
    if (rec.index == 0) throw Error("select_anchor: every full-order misfit is non-finite");
    rec.r = trajectory[rec.index - 1].r;
    rec.C = trajectory[rec.index - 1].C;
    return rec;
}

bool should_refine(double e_prev, double e_next, double epsilon) {
    if (e_next == 0.0) return false;
    return std::abs((e_prev - e_next) / e_next) > epsilon;
}

std::vector<std::size_t> greedy_select(const Matrix& pool, const Matrix& pool_outputs, const Vector& anchor,
                                       std::size_t Q, double lambda) {
    const auto K = static_cast<std::size_t>(pool.cols());
    if (K == 0) throw Error("greedy_select: empty pool");
    if (Q > K) throw Error("greedy_select: Q exceeds the pool size");
    if (static_cast<std::size_t>(pool_outputs.cols()) != K) throw Error("greedy_select: outputs do not match pool");

    Vector anchor_dist(static_cast<Eigen::Index>(K));
    for (std::size_t k = 0; k < K; ++k) anchor_dist[static_cast<Eigen::Index>(k)] = (pool.col(static_cast<Eigen::Index>(k)) - anchor).norm();
    Vector set_dist = Vector::Zero(static_cast<Eigen::Index>(K)); // d(., empty) = 0
    std::vector<bool> taken(K, false);
    std::vector<std::size_t> picked;
    picked.reserve(Q);
    for (std::size_t q = 0; q < Q; ++q) {
        std::size_t best = K;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) {
            if (taken[k]) continue;
            const double score = set_dist[static_cast<Eigen::Index>(k)] - lambda * anchor_dist[static_cast<Eigen::Index>(k)];
            if (score > best_score) {
                best_score = score;
                best = k;
            }
        }
        taken[best] = true;
        picked.push_back(best);
        const Vector g = pool_outputs.col(static_cast<Eigen::Index>(best));
        for (std::size_t k = 0; k < K; ++k) {
            if (taken[k]) continue;
            const double d = (pool_outputs.col(static_cast<Eigen::Index>(k)) - g).norm();
            if (d > set_dist[static_cast<Eigen::Index>(k)]) set_dist[static_cast<Eigen::Index>(k)] = d;
        }
    }
    return picked;
}

std::vector<std::size_t> greedy_select(const Matrix& pool, const BatchForward& surrogate_map, const Vector& anchor,
                                       std::size_t Q, double lambda) {
    if (pool.cols() == 0) throw Error("greedy_select: empty pool");
    return greedy_select(pool, surrogate_map(pool), anchor, Q, lambda);
}

double local_model_error(const BatchForward& surrogate_map, const BatchForward& full_map, const Matrix& samples) {
    if (samples.cols() < 1) throw Error("local_model_error: need at least one sample");
    const Matrix diff = surrogate_map(samples) - full_map(samples);
    return diff.colwise().norm().mean();
}

double relative_inversion_error(const Field& m_hat, const Field& m_ref) {
    if (!(m_hat.grid == m_ref.grid)) throw Error("relative_inversion_error: grid mismatch");
    const double ref = m_ref.values.norm();
    if (ref == 0.0) throw Error("relative_inversion_error: zero reference field");
    return (m_hat.values - m_ref.values).norm() / ref;
}

Matrix sample_gaussian(const GaussianState& g, std::size_t count, Rng& rng) {
    const Eigen::Index n = g.r.size();
    Matrix L;
    Eigen::LLT<Matrix> llt(g.C);
    if (llt.info() == Eigen::Success) {
        L = llt.matrixL();
    } else {
        // Near-singular covariance: square root from the clipped spectrum.
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (g.C + g.C.transpose()));
        L = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    Matrix out(n, static_cast<Eigen::Index>(count));
    for (std::size_t k = 0; k < count; ++k) out.col(static_cast<Eigen::Index>(k)) = g.r + L * standard_normal(rng, n);
    return out;
}

double speedup(std::size_t n_m, std::size_t t_fem, std::size_t Q, std::size_t T, std::size_t i_max) {
    if (n_m == 0 || t_fem == 0 || T == 0 || i_max == 0) throw Error("speedup: arguments must be positive");
    return static_cast<double>((2 * n_m + 1) * t_fem) / static_cast<double>((Q + T) * i_max);
}

void RefinePolicy::validate() const {
    if (!(epsilon >= 0.0)) throw Error("RefinePolicy: epsilon must be non-negative");
    if (max_refinements == 0 || uki_steps == 0 || pool == 0) throw Error("RefinePolicy: counts must be positive");
    if (samples > pool) throw Error("RefinePolicy: Q must not exceed K");
}

AdaptiveResult run_adaptive(FullOrderMap& full, AdaptiveSurrogate& surrogate, const ObservationData& data,
                            const GaussianState& initial, const UKIConfig& uki, const RefinePolicy& policy,
                            const AdaptiveSeeds& seeds, const RunInstrumentation& instr) {
    policy.validate();
    AdaptiveResult res;
    Rng pool_rng(seeds.pool);
    Rng diag_rng(seeds.diagnostics);
    UKIConfig cfg = uki;
    cfg.T = policy.uki_steps;

    const BatchForward anchor_map = full.as_forward(EvalCategory::anchor_scan);
    const BatchForward diag_map = full.as_forward(EvalCategory::diagnostic);
    const BatchForward approx = surrogate.as_forward();

    GaussianState state = initial;
    res.final_state = initial;
    try {
        res.e0 = misfit(anchor_map(Matrix(initial.r)).col(0), data);
    } catch (const std::exception& e) {
        res.termination = std::string("initial misfit failed: ") + e.what();
        return res;
    }
    res.final_misfit = res.e0;
    double e_prev = res.e0;
    std::size_t global_iter = 0;

    for (std::size_t t = 0; t < policy.max_refinements; ++t) {
        CycleRecord cyc;
        cyc.cycle = t;
        cyc.e_previous = e_prev;
        try {
            const UkiRun run = run_uki(state, approx, data.y_obs, cfg);
            cyc.uki_steps = run.states.size();
            if (!run.ok()) cyc.note = run.failure;
            if (run.states.empty()) throw Error("surrogate UKI produced no valid step: " + run.failure);

            const AnchorRecord anchor = select_anchor(run.states, anchor_map, data);
            for (std::size_t n = 0; n < run.states.size(); ++n) {
                IterationMetrics it;
                it.cycle = t;
                it.step = n + 1;
                it.iteration = ++global_iter;
                it.e_D = anchor.misfits[n];
                if (instr.inversion_error) it.e_I = instr.inversion_error(run.states[n].r);
                if (policy.diag_samples > 0 && instr.per_iteration_model_error) {
                    const Matrix s = sample_gaussian(run.states[n], policy.diag_samples, diag_rng);
                    it.e_M = local_model_error(approx, diag_map, s);
                }
                res.iterations.push_back(it);
                res.trajectory.push_back(run.states[n]);
            }
            cyc.anchor_index = anchor.index;
            cyc.e_anchor = anchor.e;
            if (instr.inversion_error) cyc.e_I_anchor = instr.inversion_error(anchor.r);
            state = GaussianState{anchor.r, anchor.C};
            res.final_state = state;
            res.final_misfit = anchor.e;

            const bool refine = should_refine(e_prev, anchor.e, policy.epsilon);
            e_prev = anchor.e;
            if (!refine) {
                res.termination = anchor.e == 0.0 ? "perfect fit" : "relative change below epsilon";
                res.cycles.push_back(cyc);
                break;
            }
            if (t + 1 == policy.max_refinements && !policy.refine_last_cycle) {
                res.termination = "refinement budget exhausted";
                res.cycles.push_back(cyc);
                break;
            }

            Matrix diag_samples;
            Matrix diag_full;
            if (policy.diag_samples > 0) {
                diag_samples = sample_gaussian(state, policy.diag_samples, diag_rng);
                diag_full = diag_map(diag_samples);
                cyc.e_M_before = (approx(diag_samples) - diag_full).colwise().norm().mean();
            }

            const Matrix pool = sample_gaussian(state, policy.pool, pool_rng);
            const auto picked = greedy_select(pool, approx, state.r, policy.samples, policy.lambda);
            Matrix chosen(pool.rows(), static_cast<Eigen::Index>(picked.size()));
            for (std::size_t q = 0; q < picked.size(); ++q) chosen.col(static_cast<Eigen::Index>(q)) = pool.col(static_cast<Eigen::Index>(picked[q]));
            auto entries = full.training_entries(chosen, SampleTag::adaptive, EvalCategory::adaptive_sample);
            cyc.new_samples = entries.size();

            const auto t0 = std::chrono::steady_clock::now();
            surrogate.refine(std::move(entries));
            cyc.fine_tune_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            cyc.refined = true;
            if (policy.diag_samples > 0)
                cyc.e_M_after = (approx(diag_samples) - diag_full).colwise().norm().mean();
        } catch (const std::exception& e) {
            cyc.note = cyc.note.empty() ? e.what() : cyc.note + "; " + e.what();
            res.termination = std::string("stage failure: ") + e.what();
            res.cycles.push_back(cyc);
            return res;
        }
        res.cycles.push_back(cyc);
        if (t + 1 == policy.max_refinements) res.termination = "refinement budget exhausted";
    }
    return res;
}

} // namespace auki
