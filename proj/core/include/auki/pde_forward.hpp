#pragma once

// Full-order finite-difference / finite-volume forward solvers on a uniform
// node grid over [0,1]^2.

#include "auki/grf.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace auki {

using SpatialFn = std::function<double(double x, double y)>;
using SpaceTimeFn = std::function<double(double x, double y, double t)>;

/// Piecewise-constant Darcy source: 1000 / 2000 / 3000 by y-band.
double darcy_band_source(double x, double y);

/// -div(exp(m) grad u) = f in the unit square, u = 0 on the boundary.
struct DarcyProblem {
    Grid2D grid{24, 24};
    SpatialFn source = darcy_band_source;
};

/// Field solve of DarcyProblem. Face conductivities are harmonic means of exp(m).
Field solve_darcy(const DarcyProblem& problem, const Field& m);

/// Heat source localization: u_t - lap u = s/(2 pi w^2) exp(-|chi-x|^2/(2 w^2)) [1 - H(t - cutoff)],
/// zero initial state, zero-flux walls. Snapshots at obs_times.
struct HeatLocProblem {
    Grid2D grid{24, 24};
    double strength = 5.0;
    double width = 0.1;
    double cutoff = 0.05;
    std::vector<double> obs_times{0.05, 0.15};
    /// Implicit-Euler step; every observation time must be a whole number of steps.
    double dt = 0.01;
};

double heat_loc_source(const HeatLocProblem& p, const std::array<double, 2>& chi, double x, double y, double t);

std::vector<Field> solve_heat_loc(const HeatLocProblem& problem, const std::array<double, 2>& chi);

/// Implicit-Euler solve of u_t - lap u = f with zero-flux walls on a node-centred
/// finite-volume grid. Trapezoidal mass is conserved exactly when f = 0.
std::vector<Field> solve_heat_neumann(const Field& u0, const SpaceTimeFn& source, double dt,
                                      std::span<const double> snapshot_times);

/// Heat source field: u_t - lap u = exp(-t) m(x), u(.,0) = u0, u = 0 on the boundary.
struct HeatFieldProblem {
    Grid2D grid{24, 24};
    double horizon = 1.0;
    std::size_t steps = 50;
    SpatialFn initial = [](double x, double y) { return 100.0 * std::sin(x) * std::sin(y); };
};

/// u(., horizon). Boundary nodes of the initial state are clamped to zero.
Field solve_heat_field(const HeatFieldProblem& problem, const Field& m);

/// u_t - kappa lap u + v . grad u = 0 with zero-flux walls and cellular flow v.
struct ReactionDiffusionProblem {
    Grid2D grid{24, 24};
    double kappa = 1.0 / 30.0;
    double horizon = 1.0;
    double dt = 0.02;
};

/// v = (sin(pi x) cos(pi y), -cos(pi x) sin(pi y)).
std::array<double, 2> cellular_velocity(double x, double y);

/// Net outflow of v through each node's control volume divided by its volume.
Vector discrete_divergence(const Grid2D& grid);

/// max |v . n| over boundary nodes.
double boundary_normal_velocity(const Grid2D& grid);

/// Crank-Nicolson from u(.,0) = m0 to t = horizon with central
/// conservative advection fluxes.
Field solve_reaction_diffusion(const ReactionDiffusionProblem& problem, const Field& m0);

/// Trapezoidal integral of a field over the unit square.
double integrate(const Field& f);

enum class ProblemKind { darcy, heat_loc, heat_field, reaction_diffusion };

std::string to_string(ProblemKind k);
ProblemKind problem_from_string(const std::string& s);

using Problem = std::variant<DarcyProblem, HeatLocProblem, HeatFieldProblem, ReactionDiffusionProblem>;

/// Parameter-to-state map. Parameters are KL coefficients for the field
/// problems and the source location for heat localization.
class ForwardModel {
public:
    ForwardModel(Problem problem, std::shared_ptr<const KLBasis> basis);

    ProblemKind kind() const noexcept;
    const Grid2D& grid() const noexcept;
    const Problem& problem() const noexcept { return problem_; }
    const KLBasis* basis() const noexcept { return basis_.get(); }

    /// Length of the parameter vector the model accepts.
    std::size_t parameter_dim() const noexcept;
    /// Number of state snapshots returned per evaluation.
    std::size_t frames() const noexcept;
    /// Time stamp of each frame.
    std::vector<double> frame_times() const;

    /// The physical input field for KL-parameterized problems.
    Field parameter_field(const Vector& params) const;

    /// Solve without touching any ledger.
    std::vector<Field> solve(const Vector& params) const;

private:
    Problem problem_;
    std::shared_ptr<const KLBasis> basis_;
};

/// One full-order evaluation, recorded in the ledger under `category`.
std::vector<Field> forward_map(const ForwardModel& model, const Vector& params, EvaluationLedger& ledger,
                               EvalCategory category);

} // namespace auki
