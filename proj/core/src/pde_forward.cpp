#include "auki/pde_forward.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <numbers>

namespace auki {
namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kRelResidualTol = 1e-10;

template <class Solver>
Vector solve_checked(const Solver& solver, const SpMat& A, const Vector& b, const char* who) {
    Vector x = solver.solve(b);
    if (solver.info() != Eigen::Success) throw SolverError(std::string(who) + ": linear solve failed", -1.0);
    const double bn = b.norm();
    const double res = (A * x - b).norm();
    if (!std::isfinite(res) || (bn > 0.0 && res > kRelResidualTol * bn) || (bn == 0.0 && res > 0.0))
        throw SolverError(std::string(who) + ": residual above tolerance", bn > 0 ? res / bn : res);
    return x;
}

template <class Solver>
void factor_checked(Solver& solver, const SpMat& A, const char* who) {
    solver.compute(A);
    if (solver.info() != Eigen::Success) throw SolverError(std::string(who) + ": factorization failed", -1.0);
}

void require_finite(const Field& f, const Grid2D& grid, const char* who) {
    if (!(f.grid == grid)) throw Error(std::string(who) + ": field grid does not match problem grid");
    if (!f.values.allFinite()) throw Error(std::string(who) + ": non-finite input field");
}

/// Number of whole steps of size dt that reach t, or throws.
std::size_t steps_to(double t, double dt, const char* who) {
    const double n = t / dt;
    const double r = std::round(n);
    if (r < 0 || std::abs(n - r) > 1e-9 * std::max(1.0, r))
        throw Error(std::string(who) + ": time " + std::to_string(t) + " is not a multiple of dt");
    return static_cast<std::size_t>(r);
}

/// Control-volume diffusion operator with zero-flux walls. Returns the
/// stiffness A (symmetric, A*1 = 0) and the lumped volumes.
void neumann_diffusion(const Grid2D& g, SpMat& A, Vector& volume) {
    const auto n = static_cast<Eigen::Index>(g.size());
    std::vector<Triplet> trips;
    trips.reserve(g.size() * 5);
    volume.resize(n);
    const double hx = g.hx(), hy = g.hy();
    auto half = [](std::size_t k, std::size_t nk) { return (k == 0 || k + 1 == nk) ? 0.5 : 1.0; };
    auto couple = [&](std::size_t p, std::size_t q, double c) {
        const auto ip = static_cast<Eigen::Index>(p), iq = static_cast<Eigen::Index>(q);
        trips.emplace_back(ip, ip, c);
        trips.emplace_back(iq, iq, c);
        trips.emplace_back(ip, iq, -c);
        trips.emplace_back(iq, ip, -c);
    };
    for (std::size_t j = 0; j < g.ny; ++j) {
        for (std::size_t i = 0; i < g.nx; ++i) {
            const std::size_t p = g.index(i, j);
            volume[static_cast<Eigen::Index>(p)] = g.trapezoid_weight(i, j);
            if (i + 1 < g.nx) couple(p, g.index(i + 1, j), half(j, g.ny) * hy / hx);
            if (j + 1 < g.ny) couple(p, g.index(i, j + 1), half(i, g.nx) * hx / hy);
        }
    }
    A.resize(n, n);
    A.setFromTriplets(trips.begin(), trips.end());
}

/// Interior-node index map for Dirichlet problems; -1 on the boundary.
std::vector<Eigen::Index> interior_map(const Grid2D& g, Eigen::Index& count) {
    std::vector<Eigen::Index> map(g.size(), -1);
    count = 0;
    for (std::size_t j = 1; j + 1 < g.ny; ++j)
        for (std::size_t i = 1; i + 1 < g.nx; ++i) map[g.index(i, j)] = count++;
    return map;
}

/// Stream function of the cellular flow: v = (d psi/dy, -d psi/dx).
double stream_function(double x, double y) {
    constexpr double pi = std::numbers::pi;
    return std::sin(pi * x) * std::sin(pi * y) / pi;
}

struct FaceFlux {
    std::size_t from, to;
    double flux; // integral of v.n over the face, n pointing from -> to
};

/// Exact face-integrated velocity fluxes between neighbouring control volumes.
/// Faces on the domain boundary carry no flux (v.n = 0 there).
std::vector<FaceFlux> cellular_face_fluxes(const Grid2D& g) {
    std::vector<FaceFlux> faces;
    faces.reserve(2 * g.size());
    auto xface = [&](std::size_t i) { return 0.5 * (g.x(i) + g.x(i + 1)); };
    auto yface = [&](std::size_t j) { return 0.5 * (g.y(j) + g.y(j + 1)); };
    auto ylo = [&](std::size_t j) { return j == 0 ? g.y(0) : yface(j - 1); };
    auto yhi = [&](std::size_t j) { return j + 1 == g.ny ? g.y(j) : yface(j); };
    auto xlo = [&](std::size_t i) { return i == 0 ? g.x(0) : xface(i - 1); };
    auto xhi = [&](std::size_t i) { return i + 1 == g.nx ? g.x(i) : xface(i); };
    for (std::size_t j = 0; j < g.ny; ++j) {
        for (std::size_t i = 0; i < g.nx; ++i) {
            const std::size_t p = g.index(i, j);
            if (i + 1 < g.nx) {
                const double xf = xface(i);
                faces.push_back({p, g.index(i + 1, j), stream_function(xf, yhi(j)) - stream_function(xf, ylo(j))});
            }
            if (j + 1 < g.ny) {
                const double yf = yface(j);
                faces.push_back({p, g.index(i, j + 1), -(stream_function(xhi(i), yf) - stream_function(xlo(i), yf))});
            }
        }
    }
    return faces;
}

} // namespace

double darcy_band_source(double /*x*/, double y) {
    if (y <= 4.0 / 6.0) return 1000.0;
    if (y <= 5.0 / 6.0) return 2000.0;
    return 3000.0;
}

Field solve_darcy(const DarcyProblem& problem, const Field& m) {
    const Grid2D& g = problem.grid;
    require_finite(m, g, "solve_darcy");
    Eigen::Index n = 0;
    const auto map = interior_map(g, n);
    Field u(g);
    if (n == 0) return u;

    const Vector k = m.values.array().exp();
    auto face = [&](std::size_t p, std::size_t q) {
        const double a = k[static_cast<Eigen::Index>(p)], b = k[static_cast<Eigen::Index>(q)];
        return 2.0 * a * b / (a + b);
    };
    const double ihx2 = 1.0 / (g.hx() * g.hx()), ihy2 = 1.0 / (g.hy() * g.hy());

    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(n) * 5);
    Vector rhs(n);
    for (std::size_t j = 1; j + 1 < g.ny; ++j) {
        for (std::size_t i = 1; i + 1 < g.nx; ++i) {
            const std::size_t p = g.index(i, j);
            const Eigen::Index row = map[p];
            const std::array<std::pair<std::size_t, double>, 4> nbrs{{
                {g.index(i - 1, j), ihx2},
                {g.index(i + 1, j), ihx2},
                {g.index(i, j - 1), ihy2},
                {g.index(i, j + 1), ihy2},
            }};
            double diag = 0.0;
            for (const auto& [q, scale] : nbrs) {
                const double c = face(p, q) * scale;
                diag += c;
                if (map[q] >= 0) trips.emplace_back(row, map[q], -c);
            }
            trips.emplace_back(row, row, diag);
            rhs[row] = problem.source(g.x(i), g.y(j));
        }
    }
    SpMat A(n, n);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<SpMat> solver;
    factor_checked(solver, A, "solve_darcy");
    const Vector x = solve_checked(solver, A, rhs, "solve_darcy");
    for (std::size_t p = 0; p < g.size(); ++p)
        if (map[p] >= 0) u.values[static_cast<Eigen::Index>(p)] = x[map[p]];
    return u;
}

double heat_loc_source(const HeatLocProblem& p, const std::array<double, 2>& chi, double x, double y, double t) {
    if (t > p.cutoff) return 0.0;
    const double dx = chi[0] - x, dy = chi[1] - y;
    const double w2 = p.width * p.width;
    return p.strength / (2.0 * std::numbers::pi * w2) * std::exp(-(dx * dx + dy * dy) / (2.0 * w2));
}

std::vector<Field> solve_heat_neumann(const Field& u0, const SpaceTimeFn& source, double dt,
                                      std::span<const double> snapshot_times) {
    if (!(dt > 0.0)) throw Error("solve_heat_neumann: dt must be positive");
    if (!u0.values.allFinite()) throw Error("solve_heat_neumann: non-finite initial state");
    const Grid2D& g = u0.grid;
    SpMat A;
    Vector vol;
    neumann_diffusion(g, A, vol);
    SpMat lhs = A * dt;
    lhs += SpMat(vol.asDiagonal());
    Eigen::SimplicialLDLT<SpMat> solver;
    factor_checked(solver, lhs, "solve_heat_neumann");

    std::vector<std::size_t> snap_steps;
    for (double t : snapshot_times) snap_steps.push_back(steps_to(t, dt, "solve_heat_neumann"));

    std::vector<Field> out(snapshot_times.size(), Field(g));
    Vector u = u0.values;
    Vector f(u.size());
    const std::size_t last = snap_steps.empty() ? 0 : *std::max_element(snap_steps.begin(), snap_steps.end());
    for (std::size_t s = 0; s < snap_steps.size(); ++s)
        if (snap_steps[s] == 0) out[s].values = u;
    for (std::size_t step = 1; step <= last; ++step) {
        const double t = static_cast<double>(step) * dt;
        for (std::size_t j = 0; j < g.ny; ++j)
            for (std::size_t i = 0; i < g.nx; ++i)
                f[static_cast<Eigen::Index>(g.index(i, j))] = source(g.x(i), g.y(j), t);
        const Vector rhs = vol.cwiseProduct(u + dt * f);
        u = solve_checked(solver, lhs, rhs, "solve_heat_neumann");
        for (std::size_t s = 0; s < snap_steps.size(); ++s)
            if (snap_steps[s] == step) out[s].values = u;
    }
    return out;
}

std::vector<Field> solve_heat_loc(const HeatLocProblem& problem, const std::array<double, 2>& chi) {
    if (!std::isfinite(chi[0]) || !std::isfinite(chi[1])) throw Error("solve_heat_loc: non-finite location");
    const Field u0(problem.grid);
    return solve_heat_neumann(
        u0, [&](double x, double y, double t) { return heat_loc_source(problem, chi, x, y, t); }, problem.dt,
        problem.obs_times);
}

Field solve_heat_field(const HeatFieldProblem& problem, const Field& m) {
    const Grid2D& g = problem.grid;
    require_finite(m, g, "solve_heat_field");
    if (problem.steps == 0) throw Error("solve_heat_field: steps must be positive");
    Eigen::Index n = 0;
    const auto map = interior_map(g, n);
    Field u(g);
    if (n == 0) return u;

    const double dt = problem.horizon / static_cast<double>(problem.steps);
    const double cx = dt / (g.hx() * g.hx()), cy = dt / (g.hy() * g.hy());
    std::vector<Triplet> trips;
    Vector state(n), mint(n);
    for (std::size_t j = 1; j + 1 < g.ny; ++j) {
        for (std::size_t i = 1; i + 1 < g.nx; ++i) {
            const Eigen::Index row = map[g.index(i, j)];
            trips.emplace_back(row, row, 1.0 + 2.0 * cx + 2.0 * cy);
            const std::array<std::pair<std::size_t, double>, 4> nbrs{{
                {g.index(i - 1, j), cx},
                {g.index(i + 1, j), cx},
                {g.index(i, j - 1), cy},
                {g.index(i, j + 1), cy},
            }};
            for (const auto& [q, c] : nbrs)
                if (map[q] >= 0) trips.emplace_back(row, map[q], -c);
            state[row] = problem.initial(g.x(i), g.y(j));
            mint[row] = m.at(i, j);
        }
    }
    SpMat A(n, n);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<SpMat> solver;
    factor_checked(solver, A, "solve_heat_field");
    for (std::size_t step = 1; step <= problem.steps; ++step) {
        const double t = static_cast<double>(step) * dt;
        const Vector rhs = state + (dt * std::exp(-t)) * mint;
        state = solve_checked(solver, A, rhs, "solve_heat_field");
    }
    for (std::size_t p = 0; p < g.size(); ++p)
        if (map[p] >= 0) u.values[static_cast<Eigen::Index>(p)] = state[map[p]];
    return u;
}

std::array<double, 2> cellular_velocity(double x, double y) {
    constexpr double pi = std::numbers::pi;
    return {std::sin(pi * x) * std::cos(pi * y), -std::cos(pi * x) * std::sin(pi * y)};
}

Vector discrete_divergence(const Grid2D& grid) {
    Vector div = Vector::Zero(static_cast<Eigen::Index>(grid.size()));
    for (const auto& f : cellular_face_fluxes(grid)) {
        div[static_cast<Eigen::Index>(f.from)] += f.flux;
        div[static_cast<Eigen::Index>(f.to)] -= f.flux;
    }
    for (std::size_t j = 0; j < grid.ny; ++j)
        for (std::size_t i = 0; i < grid.nx; ++i)
            div[static_cast<Eigen::Index>(grid.index(i, j))] /= grid.trapezoid_weight(i, j);
    return div;
}

double boundary_normal_velocity(const Grid2D& grid) {
    double worst = 0.0;
    for (std::size_t j = 0; j < grid.ny; ++j) {
        for (std::size_t i = 0; i < grid.nx; ++i) {
            const auto v = cellular_velocity(grid.x(i), grid.y(j));
            if (i == 0 || i + 1 == grid.nx) worst = std::max(worst, std::abs(v[0]));
            if (j == 0 || j + 1 == grid.ny) worst = std::max(worst, std::abs(v[1]));
        }
    }
    return worst;
}

Field solve_reaction_diffusion(const ReactionDiffusionProblem& problem, const Field& m0) {
    const Grid2D& g = problem.grid;
    require_finite(m0, g, "solve_reaction_diffusion");
    const std::size_t steps = steps_to(problem.horizon, problem.dt, "solve_reaction_diffusion");

    SpMat D;
    Vector vol;
    neumann_diffusion(g, D, vol);
    const auto n = static_cast<Eigen::Index>(g.size());
    std::vector<Triplet> trips;
    for (const auto& f : cellular_face_fluxes(g)) {
        // Outflow f.flux * (u_from + u_to) / 2 leaves `from` and enters `to`.
        const auto a = static_cast<Eigen::Index>(f.from), b = static_cast<Eigen::Index>(f.to);
        const double h = 0.5 * f.flux;
        trips.emplace_back(a, a, h);
        trips.emplace_back(a, b, h);
        trips.emplace_back(b, a, -h);
        trips.emplace_back(b, b, -h);
    }
    SpMat adv(n, n);
    adv.setFromTriplets(trips.begin(), trips.end());
    const SpMat op = problem.kappa * D + adv;
    const SpMat M(vol.asDiagonal());
    const SpMat lhs = M + (0.5 * problem.dt) * op;
    const SpMat rhs_op = M - (0.5 * problem.dt) * op;

    Eigen::SparseLU<SpMat> solver;
    solver.analyzePattern(lhs);
    factor_checked(solver, lhs, "solve_reaction_diffusion");
    Vector u = m0.values;
    for (std::size_t s = 0; s < steps; ++s) u = solve_checked(solver, lhs, Vector(rhs_op * u), "solve_reaction_diffusion");
    return Field(g, std::move(u));
}

double integrate(const Field& f) {
    double s = 0.0;
    for (std::size_t j = 0; j < f.grid.ny; ++j)
        for (std::size_t i = 0; i < f.grid.nx; ++i) s += f.grid.trapezoid_weight(i, j) * f.at(i, j);
    return s;
}

std::string to_string(ProblemKind k) {
    switch (k) {
    case ProblemKind::darcy: return "darcy";
    case ProblemKind::heat_loc: return "heat-loc";
    case ProblemKind::heat_field: return "heat-field";
    case ProblemKind::reaction_diffusion: return "reaction-diffusion";
    }
    return "unknown";
}

ProblemKind problem_from_string(const std::string& s) {
    if (s == "darcy") return ProblemKind::darcy;
    if (s == "heat-loc") return ProblemKind::heat_loc;
    if (s == "heat-field") return ProblemKind::heat_field;
    if (s == "reaction-diffusion") return ProblemKind::reaction_diffusion;
    throw Error("unknown problem id '" + s + "'");
}

ForwardModel::ForwardModel(Problem problem, std::shared_ptr<const KLBasis> basis)
    : problem_(std::move(problem)), basis_(std::move(basis)) {
    if (kind() != ProblemKind::heat_loc) {
        if (!basis_) throw Error("ForwardModel: field problems need a KL basis");
        if (!(basis_->grid() == grid())) throw Error("ForwardModel: basis grid does not match problem grid");
    }
}

ProblemKind ForwardModel::kind() const noexcept { return static_cast<ProblemKind>(problem_.index()); }

const Grid2D& ForwardModel::grid() const noexcept {
    return std::visit([](const auto& p) -> const Grid2D& { return p.grid; }, problem_);
}

std::size_t ForwardModel::parameter_dim() const noexcept {
    return kind() == ProblemKind::heat_loc ? 2 : basis_->size();
}

std::size_t ForwardModel::frames() const noexcept {
    if (const auto* p = std::get_if<HeatLocProblem>(&problem_)) return p->obs_times.size();
    return 1;
}

std::vector<double> ForwardModel::frame_times() const {
    return std::visit(
        [](const auto& p) -> std::vector<double> {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, HeatLocProblem>) return p.obs_times;
            else if constexpr (std::is_same_v<P, DarcyProblem>) return {0.0};
            else return {p.horizon};
        },
        problem_);
}

Field ForwardModel::parameter_field(const Vector& params) const {
    if (kind() == ProblemKind::heat_loc) throw Error("parameter_field: heat localization has no parameter field");
    return sample_field(*basis_, params);
}

std::vector<Field> ForwardModel::solve(const Vector& params) const {
    if (static_cast<std::size_t>(params.size()) != parameter_dim())
        throw Error("ForwardModel: expected " + std::to_string(parameter_dim()) + " parameters, got " +
                    std::to_string(params.size()));
    return std::visit(
        [&](const auto& p) -> std::vector<Field> {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, DarcyProblem>) return {solve_darcy(p, sample_field(*basis_, params))};
            else if constexpr (std::is_same_v<P, HeatLocProblem>) return solve_heat_loc(p, {params[0], params[1]});
            else if constexpr (std::is_same_v<P, HeatFieldProblem>)
                return {solve_heat_field(p, sample_field(*basis_, params))};
            else return {solve_reaction_diffusion(p, sample_field(*basis_, params))};
        },
        problem_);
}

std::vector<Field> forward_map(const ForwardModel& model, const Vector& params, EvaluationLedger& ledger,
                               EvalCategory category) {
    ledger.record(category);
    return model.solve(params);
}

} // namespace auki
