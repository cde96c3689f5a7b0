#include "auki/run_record.hpp"

#include <json.hpp>

#include <cmath>
#include <iomanip>
#include <sstream>

namespace auki {

using nlohmann::json;

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num_in(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

json vec(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
Vector vec_in(const json& j) {
    const auto s = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
}

std::string csv_num(double v) {
    if (!std::isfinite(v)) return "";
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

} // namespace

std::size_t RunRecord::category_sum() const {
    std::size_t s = 0;
    for (auto c : counts) s += c;
    return s;
}

std::size_t RunRecord::charged_evaluations() const {
    return count(EvalCategory::uki) + count(EvalCategory::anchor_scan) + count(EvalCategory::adaptive_sample);
}

double RunRecord::first_model_error_before() const {
    for (const auto& c : cycles)
        if (c.refined) return c.e_M_before;
    return kNaN;
}

double RunRecord::last_model_error_after() const {
    for (auto it = cycles.rbegin(); it != cycles.rend(); ++it)
        if (it->refined) return it->e_M_after;
    return kNaN;
}

double RunRecord::seconds(const std::string& phase) const {
    for (const auto& t : timings)
        if (t.phase == phase) return t.seconds;
    return 0.0;
}

void RunRecord::set_counts(const EvaluationLedger& ledger) {
    for (std::size_t c = 0; c < kEvalCategoryCount; ++c) counts[c] = ledger.count(static_cast<EvalCategory>(c));
    total_evaluations = ledger.total();
}

std::string RunRecord::to_json() const {
    json j;
    j["format"] = "auki-run-1";
    j["mode"] = mode;
    j["problem"] = problem;
    j["seed"] = seed;
    j["config"] = config_json.empty() ? json(nullptr) : json::parse(config_json);
    j["n_m"] = n_m;
    j["T"] = T;
    j["T_fem"] = T_fem;
    j["Q"] = Q;
    j["I_max"] = I_max;

    json ev;
    for (std::size_t c = 0; c < kEvalCategoryCount; ++c)
        ev[std::string(to_string(static_cast<EvalCategory>(c)))] = counts[c];
    j["evaluations"] = ev;
    j["total_evaluations"] = total_evaluations;
    j["offline_evaluations"] = offline_evaluations;

    json tm = json::object();
    for (const auto& t : timings) tm[t.phase] = t.seconds;
    j["timings"] = tm;

    j["e0"] = num(e0);
    j["final_e_D"] = num(final_e_D);
    j["final_e_I"] = num(final_e_I);
    j["final_r"] = vec(final_r);
    j["final_diag_C"] = vec(final_diag_C);
    j["truth"] = vec(truth);
    j["termination"] = termination;

    auto& cs = j["cycles"] = json::array();
    for (const auto& c : cycles)
        cs.push_back({{"cycle", c.cycle},
                      {"uki_steps", c.uki_steps},
                      {"anchor_index", c.anchor_index},
                      {"e_anchor", num(c.e_anchor)},
                      {"e_previous", num(c.e_previous)},
                      {"e_I_anchor", num(c.e_I_anchor)},
                      {"refined", c.refined},
                      {"e_M_before", num(c.e_M_before)},
                      {"e_M_after", num(c.e_M_after)},
                      {"new_samples", c.new_samples},
                      {"fine_tune_seconds", c.fine_tune_seconds},
                      {"note", c.note}});
    auto& ss = j["series"] = json::array();
    for (const auto& s : series)
        ss.push_back({{"cycle", s.cycle},
                      {"step", s.step},
                      {"iteration", s.iteration},
                      {"e_D", num(s.e_D)},
                      {"e_M", num(s.e_M)},
                      {"e_I", num(s.e_I)}});
    return j.dump(2);
}

RunRecord RunRecord::from_json(const std::string& text) {
    RunRecord r;
    try {
        const json j = json::parse(text);
        if (j.value("format", "") != "auki-run-1") throw Error("not a run record");
        r.mode = j.at("mode").get<std::string>();
        r.problem = j.at("problem").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        if (!j.at("config").is_null()) r.config_json = j.at("config").dump(2);
        r.n_m = j.at("n_m").get<std::size_t>();
        r.T = j.at("T").get<std::size_t>();
        r.T_fem = j.at("T_fem").get<std::size_t>();
        r.Q = j.at("Q").get<std::size_t>();
        r.I_max = j.at("I_max").get<std::size_t>();
        const auto& ev = j.at("evaluations");
        for (std::size_t c = 0; c < kEvalCategoryCount; ++c)
            r.counts[c] = ev.at(std::string(to_string(static_cast<EvalCategory>(c)))).get<std::size_t>();
        r.total_evaluations = j.at("total_evaluations").get<std::size_t>();
        r.offline_evaluations = j.at("offline_evaluations").get<std::size_t>();
        for (const auto& [k, v] : j.at("timings").items()) r.timings.push_back({k, v.get<double>()});
        r.e0 = num_in(j.at("e0"));
        r.final_e_D = num_in(j.at("final_e_D"));
        r.final_e_I = num_in(j.at("final_e_I"));
        r.final_r = vec_in(j.at("final_r"));
        r.final_diag_C = vec_in(j.at("final_diag_C"));
        r.truth = vec_in(j.at("truth"));
        r.termination = j.at("termination").get<std::string>();
        for (const auto& c : j.at("cycles")) {
            CycleRecord cr;
            cr.cycle = c.at("cycle").get<std::size_t>();
            cr.uki_steps = c.at("uki_steps").get<std::size_t>();
            cr.anchor_index = c.at("anchor_index").get<std::size_t>();
            cr.e_anchor = num_in(c.at("e_anchor"));
            cr.e_previous = num_in(c.at("e_previous"));
            cr.e_I_anchor = num_in(c.at("e_I_anchor"));
            cr.refined = c.at("refined").get<bool>();
            cr.e_M_before = num_in(c.at("e_M_before"));
            cr.e_M_after = num_in(c.at("e_M_after"));
            cr.new_samples = c.at("new_samples").get<std::size_t>();
            cr.fine_tune_seconds = c.at("fine_tune_seconds").get<double>();
            cr.note = c.at("note").get<std::string>();
            r.cycles.push_back(cr);
        }
        for (const auto& s : j.at("series")) {
            SeriesRow row;
            row.cycle = s.at("cycle").get<std::size_t>();
            row.step = s.at("step").get<std::size_t>();
            row.iteration = s.at("iteration").get<std::size_t>();
            row.e_D = num_in(s.at("e_D"));
            row.e_M = num_in(s.at("e_M"));
            row.e_I = num_in(s.at("e_I"));
            r.series.push_back(row);
        }
    } catch (const json::exception& e) {
        throw Error(std::string("run record: ") + e.what());
    }
    return r;
}

std::string RunRecord::series_csv() const {
    std::ostringstream out;
    out << "mode,cycle,step,iteration,e_D,e_M,e_I\n";
    for (const auto& s : series)
        out << mode << ',' << s.cycle << ',' << s.step << ',' << s.iteration << ',' << csv_num(s.e_D) << ','
            << csv_num(s.e_M) << ',' << csv_num(s.e_I) << '\n';
    return out.str();
}

} // namespace auki
