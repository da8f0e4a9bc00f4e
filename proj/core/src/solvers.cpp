#include "orbsde/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "orbsde/errors.hpp"

namespace orbsde {

namespace {

constexpr double kPicardMonotoneTol = 1e-12;

void check_contraction(const ProblemSpec& spec, double dt) {
    const double c_lip = spec.generator.lipschitz();
    if (!(dt * c_lip < 1.0))
        throw ContractionError("driver step: dt * lipschitz = " + std::to_string(dt * c_lip) +
                               " >= 1; refine the lattice or shrink the coefficients");
}

Surface make_surface(const ProblemSpec& spec, const Lattice& lat) {
    Surface s(spec.mode_count);
    for (auto& levels : s) {
        levels.resize(lat.levels());
        for (int n = 0; n < lat.levels(); ++n)
            levels[n].assign(lat.node_count(n), 0.0);
    }
    return s;
}

void fill_terminal(Surface& y, const ProblemSpec& spec, const Lattice& lat) {
    const int last = lat.step_count;
    for (Mode i = 0; i < spec.mode_count; ++i)
        for (int idx = 0; idx < lat.node_count(last); ++idx)
            y[i][last][idx] = spec.terminal(i, lat.state(last, idx));
}

void check_solution_shape(const Solution& sol, const ProblemSpec& spec, const Lattice& lat) {
    if (static_cast<int>(sol.Y.size()) != spec.mode_count)
        throw ConfigError("residuals: solution mode count does not match the spec");
    for (const auto& levels : sol.Y) {
        if (static_cast<int>(levels.size()) != lat.levels())
            throw ConfigError("residuals: solution level count does not match the lattice");
        for (int n = 0; n < lat.levels(); ++n)
            if (static_cast<int>(levels[n].size()) != lat.node_count(n))
                throw ConfigError("residuals: solution node count does not match the lattice");
    }
}

} // namespace

void SolverOptions::check() const {
    if (!(tol_projection > 0.0) || !std::isfinite(tol_projection))
        throw ConfigError("solver: tol_projection must be > 0");
    if (!(tol_driver_fixpoint > 0.0) || !std::isfinite(tol_driver_fixpoint))
        throw ConfigError("solver: tol_driver_fixpoint must be > 0");
    if (!(picard_tol > 0.0) || !std::isfinite(picard_tol))
        throw ConfigError("solver: picard_tol must be > 0");
    if (max_projection_sweeps < 0)
        throw ConfigError("solver: max_projection_sweeps must be >= 0 (0 = auto)");
    if (picard_max_iters < 1)
        throw ConfigError("solver: picard_max_iters must be >= 1");
    if (penalty_parameter < 0.0 || !std::isfinite(penalty_parameter))
        throw ConfigError("solver: penalty_parameter must be finite and >= 0");
}

double driver_step(double e, double z, double t, Mode i, const ProblemSpec& spec, double dt,
                   const SolverOptions& opts) {
    (void)opts;
    check_contraction(spec, dt);
    const auto& g = spec.generator;
    // y = e + dt * (a(t) + b*y + c*z) solved exactly; the denominator is
    // positive because dt * |b| < 1.
    return (e + dt * (g.a[i](t) + g.c[i] * z)) / (1.0 - dt * g.b[i]);
}

ProjectionResult oblique_project(const std::vector<double>& ybar, double t, double w,
                                 const ProblemSpec& spec, const SolverOptions& opts) {
    const int m = spec.mode_count;
    if (static_cast<int>(ybar.size()) != m)
        throw ConfigError("oblique_project: ybar must have mode_count entries");
    for (double v : ybar)
        if (!std::isfinite(v))
            throw ConfigError("oblique_project: non-finite ybar entry");
    opts.check();

    std::vector<double> s(m);
    for (Mode i = 0; i < m; ++i)
        s[i] = spec.upper_barrier(i, t, w);

    const int max_sweeps = opts.resolved_max_sweeps(m);
    std::vector<double> y = ybar;
    std::vector<double> ynext(m);
    int sweeps = 0;
    for (;;) {
        double delta = 0.0;
        for (Mode i = 0; i < m; ++i) {
            const double lo = lower_envelope(spec, i, t, y);
            const double v = std::min(s[i], std::max(ybar[i], lo));
            ynext[i] = v;
            delta = std::max(delta, std::abs(v - y[i]));
        }
        y.swap(ynext);
        if (delta < opts.tol_projection)
            break; // the application that confirms the fixed point is not a sweep
        if (++sweeps > max_sweeps)
            throw NonConvergenceError(
                "oblique projection: no fixed point within " + std::to_string(max_sweeps) +
                    " sweeps; switching costs admit a free loop",
                y);
    }

    ProjectionResult res;
    res.y = std::move(y);
    res.dKp.resize(m);
    res.dKm.resize(m);
    for (Mode i = 0; i < m; ++i) {
        res.dKp[i] = std::max(0.0, res.y[i] - ybar[i]);
        res.dKm[i] = std::max(0.0, ybar[i] - res.y[i]);
    }
    res.sweeps = sweeps;
    return res;
}

Solution solve_direct(const ProblemSpec& spec, const Lattice& lat, const SolverOptions& opts) {
    check_problem_structure(spec);
    check_contraction(spec, lat.dt);
    opts.check();

    const int m = spec.mode_count;
    Solution sol;
    sol.backend = Backend::direct;
    sol.Y = make_surface(spec, lat);
    sol.Z = make_surface(spec, lat);
    sol.dKp = make_surface(spec, lat);
    sol.dKm = make_surface(spec, lat);
    fill_terminal(sol.Y, spec, lat);

    std::vector<LevelValues> e(m), z(m);
    std::vector<double> ybar(m);
    int worst_sweeps = 0;
    for (int n = lat.step_count - 1; n >= 0; --n) {
        const double t = lat.time(n);
        for (Mode i = 0; i < m; ++i) {
            e[i] = cond_expect(lat, n, sol.Y[i][n + 1]);
            z[i] = cond_expect_dw(lat, n, sol.Y[i][n + 1]);
        }
        for (int idx = 0; idx < lat.node_count(n); ++idx) {
            for (Mode i = 0; i < m; ++i)
                ybar[i] = driver_step(e[i][idx], z[i][idx], t, i, spec, lat.dt, opts);
            auto pr = oblique_project(ybar, t, lat.state(n, idx), spec, opts);
            worst_sweeps = std::max(worst_sweeps, pr.sweeps);
            for (Mode i = 0; i < m; ++i) {
                sol.Y[i][n][idx] = pr.y[i];
                sol.Z[i][n][idx] = z[i][idx];
                sol.dKp[i][n][idx] = pr.dKp[i];
                sol.dKm[i][n][idx] = pr.dKm[i];
            }
        }
    }
    sol.iterations = worst_sweeps;
    return sol;
}

Solution solve_penalty_upper(const ProblemSpec& spec, const Lattice& lat,
                             const SolverOptions& opts, double n_pen) {
    check_problem_structure(spec);
    check_contraction(spec, lat.dt);
    opts.check();
    if (n_pen < 0.0 || !std::isfinite(n_pen))
        throw ConfigError("penalty_upper: n_pen must be finite and >= 0");

    const int m = spec.mode_count;
    const double dt = lat.dt;
    Solution sol;
    sol.backend = Backend::penalty_upper;
    sol.Y = make_surface(spec, lat);
    sol.Z = make_surface(spec, lat);
    sol.dKp = make_surface(spec, lat);
    sol.dKm = make_surface(spec, lat);
    fill_terminal(sol.Y, spec, lat);

    for (int n = lat.step_count - 1; n >= 0; --n) {
        const double t = lat.time(n);
        for (Mode i = 0; i < m; ++i) {
            const LevelValues e = cond_expect(lat, n, sol.Y[i][n + 1]);
            const LevelValues z = cond_expect_dw(lat, n, sol.Y[i][n + 1]);
            const double denom0 = 1.0 - dt * spec.generator.b[i];
            for (int idx = 0; idx < lat.node_count(n); ++idx) {
                const double rhs = e[idx] + dt * (spec.generator.a[i](t) +
                                                  spec.generator.c[i] * z[idx]);
                const double unconstrained = rhs / denom0;
                const double s = spec.upper_barrier(i, t, lat.state(n, idx));
                double y = unconstrained;
                double dkm = 0.0;
                if (n_pen > 0.0 && unconstrained > s) {
                    // Semi-implicit penalty branch: the term -dt*n*(y - S)^+
                    // is part of the root, so n_pen may exceed 1/dt.
                    y = (rhs + dt * n_pen * s) / (denom0 + dt * n_pen);
                    dkm = dt * n_pen * std::max(0.0, y - s);
                }
                sol.Y[i][n][idx] = y;
                sol.Z[i][n][idx] = z[idx];
                sol.dKm[i][n][idx] = dkm;
            }
        }
    }
    return sol;
}

namespace {

// Root of denom0*y - pen*sum_l max(0, beta_l - y) = rhs in y: strictly
// increasing piecewise-affine, one breakpoint per beta_l.
double penalized_scalar_root(double rhs, double denom0, double pen, std::vector<double>& beta) {
    std::sort(beta.begin(), beta.end(), std::greater<double>());
    double y = rhs / denom0;
    if (beta.empty() || y >= beta.front())
        return y;
    double sum_active = 0.0;
    for (std::size_t cnt = 1; cnt <= beta.size(); ++cnt) {
        sum_active += beta[cnt - 1];
        y = (rhs + pen * sum_active) / (denom0 + pen * static_cast<double>(cnt));
        const bool above_next = cnt == beta.size() || y >= beta[cnt];
        if (y < beta[cnt - 1] && above_next)
            return y;
    }
    return y; // unreachable for a strictly increasing map; keeps the compiler happy
}

} // namespace

Solution solve_penalty_oblique(const ProblemSpec& spec, const Lattice& lat,
                               const SolverOptions& opts, double n_pen) {
    check_problem_structure(spec);
    check_contraction(spec, lat.dt);
    opts.check();
    const auto* lin = std::get_if<LinearCosts>(&spec.costs);
    if (lin == nullptr)
        throw ConfigError("penalty_oblique: requires linear switching costs");
    if (!(n_pen > 0.0) || !std::isfinite(n_pen))
        throw ConfigError("penalty_oblique: n_pen must be finite and > 0");

    const int m = spec.mode_count;
    const double dt = lat.dt;
    const double pen = dt * n_pen;
    const int max_sweeps = opts.resolved_max_sweeps(m) * 10;

    Solution sol;
    sol.backend = Backend::penalty_oblique;
    sol.Y = make_surface(spec, lat);
    sol.Z = make_surface(spec, lat);
    sol.dKp = make_surface(spec, lat);
    sol.dKm = make_surface(spec, lat);
    fill_terminal(sol.Y, spec, lat);

    std::vector<LevelValues> e(m), z(m);
    std::vector<double> rhs(m), denom0(m), y(m), beta;
    int worst_sweeps = 0;
    for (int n = lat.step_count - 1; n >= 0; --n) {
        const double t = lat.time(n);
        for (Mode i = 0; i < m; ++i) {
            e[i] = cond_expect(lat, n, sol.Y[i][n + 1]);
            z[i] = cond_expect_dw(lat, n, sol.Y[i][n + 1]);
            denom0[i] = 1.0 - dt * spec.generator.b[i];
        }
        for (int idx = 0; idx < lat.node_count(n); ++idx) {
            for (Mode i = 0; i < m; ++i) {
                rhs[i] = e[i][idx] +
                         dt * (spec.generator.a[i](t) + spec.generator.c[i] * z[i][idx]);
                y[i] = rhs[i] / denom0[i];
            }
            // Gauss-Seidel over modes; each scalar solve is exact, so the
            // sweep count is bounded by the length of active switching chains.
            int sweeps = 0;
            for (;;) {
                double delta = 0.0;
                for (Mode i = 0; i < m; ++i) {
                    beta.clear();
                    for (Mode l = 0; l < m; ++l)
                        if (l != i)
                            beta.push_back(y[l] - lin->k[i][l]);
                    const double yi = penalized_scalar_root(rhs[i], denom0[i], pen, beta);
                    delta = std::max(delta, std::abs(yi - y[i]));
                    y[i] = yi;
                }
                if (delta < opts.tol_projection)
                    break;
                if (++sweeps > max_sweeps)
                    throw NonConvergenceError("penalty_oblique: Gauss-Seidel did not settle within " +
                                                  std::to_string(max_sweeps) + " sweeps",
                                              y);
            }
            worst_sweeps = std::max(worst_sweeps, sweeps);
            for (Mode i = 0; i < m; ++i) {
                double dkp = 0.0;
                for (Mode l = 0; l < m; ++l)
                    if (l != i)
                        dkp += std::max(0.0, (y[l] - lin->k[i][l]) - y[i]);
                dkp *= pen;
                const double s = spec.upper_barrier(i, t, lat.state(n, idx));
                double yi = y[i];
                double dkm = 0.0;
                if (yi > s) {
                    dkm = yi - s;
                    yi = s;
                }
                sol.Y[i][n][idx] = yi;
                sol.Z[i][n][idx] = z[i][idx];
                sol.dKp[i][n][idx] = dkp;
                sol.dKm[i][n][idx] = dkm;
            }
        }
    }
    sol.iterations = worst_sweeps;
    return sol;
}

namespace {

struct PicardPass {
    Surface Y, Z, dKp, dKm;
};

// One full backward induction; prev == nullptr drops the lower barrier
// (iterate 0), otherwise the lower barrier is built from prev's surfaces.
PicardPass picard_pass(const ProblemSpec& spec, const Lattice& lat, const SolverOptions& opts,
                       const Surface* prev) {
    const int m = spec.mode_count;
    PicardPass pass;
    pass.Y = make_surface(spec, lat);
    pass.Z = make_surface(spec, lat);
    pass.dKp = make_surface(spec, lat);
    pass.dKm = make_surface(spec, lat);
    fill_terminal(pass.Y, spec, lat);

    std::vector<double> y_prev_here(m);
    for (int n = lat.step_count - 1; n >= 0; --n) {
        const double t = lat.time(n);
        for (Mode i = 0; i < m; ++i) {
            const LevelValues e = cond_expect(lat, n, pass.Y[i][n + 1]);
            const LevelValues z = cond_expect_dw(lat, n, pass.Y[i][n + 1]);
            for (int idx = 0; idx < lat.node_count(n); ++idx) {
                const double ybar = driver_step(e[idx], z[idx], t, i, spec, lat.dt, opts);
                double y = ybar;
                if (prev != nullptr) {
                    for (Mode j = 0; j < m; ++j)
                        y_prev_here[j] = (*prev)[j][n][idx];
                    y = std::max(y, lower_envelope(spec, i, t, y_prev_here));
                }
                y = std::min(y, spec.upper_barrier(i, t, lat.state(n, idx)));
                pass.Y[i][n][idx] = y;
                pass.Z[i][n][idx] = z[idx];
                pass.dKp[i][n][idx] = std::max(0.0, y - ybar);
                pass.dKm[i][n][idx] = std::max(0.0, ybar - y);
            }
        }
    }
    return pass;
}

} // namespace

Solution solve_picard(const ProblemSpec& spec, const Lattice& lat, const SolverOptions& opts) {
    check_problem_structure(spec);
    check_contraction(spec, lat.dt);
    opts.check();

    const int m = spec.mode_count;
    PicardPass cur = picard_pass(spec, lat, opts, nullptr);

    Solution sol;
    sol.backend = Backend::picard;
    bool converged = false;
    for (int iter = 1; iter <= opts.picard_max_iters; ++iter) {
        PicardPass next = picard_pass(spec, lat, opts, &cur.Y);
        double delta = 0.0;
        double min_gap = std::numeric_limits<double>::infinity();
        for (Mode i = 0; i < m; ++i)
            for (int n = 0; n < lat.levels(); ++n)
                for (int idx = 0; idx < lat.node_count(n); ++idx) {
                    const double gap = next.Y[i][n][idx] - cur.Y[i][n][idx];
                    delta = std::max(delta, std::abs(gap));
                    min_gap = std::min(min_gap, gap);
                }
        sol.iteration_deltas.push_back(delta);
        sol.iteration_min_gaps.push_back(min_gap);
        if (min_gap < -kPicardMonotoneTol)
            throw InternalConsistencyError(
                "picard: iterate " + std::to_string(iter) + " fell below its predecessor by " +
                std::to_string(-min_gap));
        cur = std::move(next);
        sol.iterations = iter;
        sol.final_change = delta;
        if (delta < opts.picard_tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw NonConvergenceError("picard: sup-norm change still " +
                                  std::to_string(sol.final_change) + " after " +
                                  std::to_string(sol.iterations) + " iterations");

    sol.Y = std::move(cur.Y);
    sol.Z = std::move(cur.Z);
    sol.dKp = std::move(cur.dKp);
    sol.dKm = std::move(cur.dKm);
    return sol;
}

SkorokhodResiduals residuals(const Solution& sol, const ProblemSpec& spec, const Lattice& lat) {
    check_problem_structure(spec);
    check_solution_shape(sol, spec, lat);

    const int m = spec.mode_count;
    SkorokhodResiduals res;
    res.upper.assign(m, 0.0);
    res.lower.assign(m, 0.0);
    std::vector<double> y_here(m);
    for (int n = 0; n <= lat.step_count; ++n) {
        const std::vector<double> weights = level_weights(lat, n);
        const double t = lat.time(n);
        for (int idx = 0; idx < lat.node_count(n); ++idx) {
            for (Mode i = 0; i < m; ++i)
                y_here[i] = sol.Y[i][n][idx];
            for (Mode i = 0; i < m; ++i) {
                const double dkm = sol.dKm[i][n][idx];
                if (dkm != 0.0) {
                    const double s = spec.upper_barrier(i, t, lat.state(n, idx));
                    res.upper[i] += weights[idx] * (s - y_here[i]) * dkm;
                }
                const double dkp = sol.dKp[i][n][idx];
                if (dkp != 0.0) {
                    // Guarded: for one mode the envelope is -infinity but dKp
                    // is identically zero there.
                    const double lo = lower_envelope(spec, i, t, y_here);
                    res.lower[i] += weights[idx] * (y_here[i] - lo) * dkp;
                }
            }
        }
    }
    return res;
}

} // namespace orbsde
