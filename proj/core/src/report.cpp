#include "auki/report.hpp"

#include <json.hpp>

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace auki {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    if (!std::isfinite(v)) return "";
    std::ostringstream ss;
    ss << std::setprecision(10) << v;
    return ss.str();
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

} // namespace

Report make_report(std::vector<std::pair<std::string, RunRecord>> records) {
    if (records.empty()) throw Error("report: no run records");
    Report rep;
    std::map<std::string, std::size_t> fem_reference;
    for (const auto& [label, r] : records)
        if (r.mode == "fem-uki" && !fem_reference.count(r.problem)) fem_reference[r.problem] = r.charged_evaluations();

    for (const auto& [label, r] : records) {
        ReportRow row;
        row.label = label;
        row.mode = r.mode;
        row.problem = r.problem;
        row.final_e_I = r.final_e_I;
        row.final_e_D = r.final_e_D;
        row.charged_evaluations = r.charged_evaluations();
        row.diagnostic_evaluations = r.count(EvalCategory::diagnostic);
        row.offline_evaluations = r.offline_evaluations;
        row.cycles_used = r.cycles_used();
        row.seconds = r.seconds("total");
        if (r.mode == "fem-uki") row.speedup = 1.0;
        else if (r.mode == "deeponet-adaptive" && row.cycles_used > 0)
            row.speedup = speedup(r.n_m, r.T_fem, r.Q, r.T, row.cycles_used);

        const auto it = fem_reference.find(r.problem);
        const double reference = it != fem_reference.end()
                                     ? static_cast<double>(it->second)
                                     : static_cast<double>((2 * r.n_m + 1) * r.T_fem);
        if (row.charged_evaluations > 0) row.measured_speedup = reference / static_cast<double>(row.charged_evaluations);
        rep.rows.push_back(row);
    }
    rep.records = std::move(records);
    return rep;
}

std::string Report::to_json() const {
    json j = json::array();
    for (const auto& r : rows)
        j.push_back({{"label", r.label},
                     {"mode", r.mode},
                     {"problem", r.problem},
                     {"final_e_I", num(r.final_e_I)},
                     {"final_e_D", num(r.final_e_D)},
                     {"charged_evaluations", r.charged_evaluations},
                     {"diagnostic_evaluations", r.diagnostic_evaluations},
                     {"offline_evaluations", r.offline_evaluations},
                     {"cycles_used", r.cycles_used},
                     {"speedup", num(r.speedup)},
                     {"measured_speedup", num(r.measured_speedup)},
                     {"seconds", r.seconds}});
    return json{{"runs", j}}.dump(2);
}

std::string Report::to_csv() const {
    std::ostringstream out;
    out << "label,mode,problem,final_e_I,final_e_D,charged_evaluations,diagnostic_evaluations,"
           "offline_evaluations,cycles_used,speedup,measured_speedup,seconds\n";
    for (const auto& r : rows)
        out << r.label << ',' << r.mode << ',' << r.problem << ',' << fmt(r.final_e_I) << ',' << fmt(r.final_e_D)
            << ',' << r.charged_evaluations << ',' << r.diagnostic_evaluations << ',' << r.offline_evaluations << ','
            << r.cycles_used << ',' << fmt(r.speedup) << ',' << fmt(r.measured_speedup) << ',' << fmt(r.seconds)
            << '\n';
    return out.str();
}

std::string Report::curves_csv() const {
    std::ostringstream out;
    out << "label,mode,cycle,step,iteration,e_D,e_M,e_I\n";
    for (const auto& [label, r] : records)
        for (const auto& s : r.series)
            out << label << ',' << r.mode << ',' << s.cycle << ',' << s.step << ',' << s.iteration << ','
                << fmt(s.e_D) << ',' << fmt(s.e_M) << ',' << fmt(s.e_I) << '\n';
    return out.str();
}

} // namespace auki
