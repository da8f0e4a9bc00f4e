#pragma once

#include <vector>

#include "orbsde/lattice.hpp"
#include "orbsde/model.hpp"

namespace orbsde {

enum class Backend { direct, penalty_upper, penalty_oblique, picard };

// Per-mode, per-level, per-node storage: s[mode][level][node_index].
using Surface = std::vector<std::vector<std::vector<double>>>;

struct SolverOptions {
    double tol_projection = 1e-12;
    // Budget of iterate-changing projection sweeps; 0 resolves to 4 * mode_count.
    int max_projection_sweeps = 0;
    // Governs the generic scalar fixed point of the per-step driver equation;
    // the affine family always takes its exact closed form instead.
    double tol_driver_fixpoint = 1e-13;
    // n_pen for the penalty backends when driven through a RunConfig.
    double penalty_parameter = 0.0;
    double picard_tol = 1e-10;
    int picard_max_iters = 50;

    int resolved_max_sweeps(int mode_count) const {
        return max_projection_sweeps > 0 ? max_projection_sweeps : 4 * mode_count;
    }
    void check() const; // throws ConfigError on nonpositive tolerances etc.
};

struct Solution {
    Backend backend = Backend::direct;
    Surface Y;   // value surfaces
    Surface Z;   // martingale integrand; zero at the terminal level
    Surface dKp; // one-step push-up increments, >= 0; zero at the terminal level
    Surface dKm; // one-step push-down increments, >= 0; zero at the terminal level
    // direct / penalty_oblique: worst per-node sweep count; picard: outer iterates.
    int iterations = 0;
    double final_change = 0.0;               // last sup-norm change of the outer iteration
    std::vector<double> iteration_deltas;    // picard: sup |iterate_n - iterate_{n-1}|
    std::vector<double> iteration_min_gaps;  // picard: min pointwise (iterate_n - iterate_{n-1})

    double value_at_root(Mode i) const { return Y[i][0][0]; }
};

// One implicit Euler step of the driver: the unique y with
// y = e + dt * psi(t, y, z, i). Exact closed form for the affine family.
// Throws ContractionError when dt * lipschitz >= 1.
double driver_step(double e, double z, double t, Mode i, const ProblemSpec& spec, double dt,
                   const SolverOptions& opts);

struct ProjectionResult {
    std::vector<double> y;
    std::vector<double> dKp;
    std::vector<double> dKm;
    int sweeps = 0; // applications of the projection map that changed the iterate
};

// Componentwise fixed point of F(y)_i = min(S_i(t,w), max(ybar_i,
// max_{j != i} h_{i,j}(t, y_j))), iterated Jacobi-style from y = ybar.
// Decomposition dKp = (y - ybar)^+, dKm = (ybar - y)^+ satisfies both
// complementarity conditions exactly: a push-up lands on the lower envelope,
// a push-down lands on the upper barrier, and at most one is nonzero per
// component (when the two barriers touch, the push-up branch is the one
// taken). Requires S(t, w) in the constraint region, which validation checks.
ProjectionResult oblique_project(const std::vector<double>& ybar, double t, double w,
                                 const ProblemSpec& spec, const SolverOptions& opts);

// Reflected backward induction: terminal data, then per level conditional
// expectation, driver step, oblique projection.
Solution solve_direct(const ProblemSpec& spec, const Lattice& lat, const SolverOptions& opts);

// Upper barrier handled by a semi-implicit penalty of strength n_pen; modes
// decouple and switching costs are ignored. n_pen = 0 gives the plain
// unreflected scheme. Surfaces are nonincreasing in n_pen.
Solution solve_penalty_upper(const ProblemSpec& spec, const Lattice& lat,
                             const SolverOptions& opts, double n_pen);

// Lower (oblique) coupling handled by a semi-implicit penalty of strength
// n_pen, upper barrier kept as a hard reflection. Linear costs only; each
// node solves the coupled system by Gauss-Seidel sweeps of exact scalar
// piecewise-affine roots. Surfaces are nondecreasing in n_pen.
Solution solve_penalty_oblique(const ProblemSpec& spec, const Lattice& lat,
                               const SolverOptions& opts, double n_pen);

// Decoupling iteration: iterate 0 reflects at the upper barrier only; iterate
// n >= 1 adds the lower barrier built from iterate n-1's surfaces. Iterates
// are monotone nondecreasing (violation beyond 1e-12 throws
// InternalConsistencyError); stops when the sup-norm change drops below
// picard_tol, else throws NonConvergenceError after picard_max_iters.
Solution solve_picard(const ProblemSpec& spec, const Lattice& lat, const SolverOptions& opts);

// Probability-weighted complementarity sums, one entry per mode:
//   upper[i] = sum_nodes weight * (S_i - Y_i) * dKm_i
//   lower[i] = sum_nodes weight * (Y_i - lower_envelope_i) * dKp_i
// Both are ~0 for a solution satisfying the minimality conditions.
struct SkorokhodResiduals {
    std::vector<double> upper;
    std::vector<double> lower;
};

SkorokhodResiduals residuals(const Solution& sol, const ProblemSpec& spec, const Lattice& lat);

} // namespace orbsde
