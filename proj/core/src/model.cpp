#include "orbsde/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "orbsde/errors.hpp"

namespace orbsde {

namespace {

std::string format_point(const char* fmt, double x1, double x2 = 0.0, double x3 = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), fmt, x1, x2, x3);
    return buf;
}

bool finite(double x) { return std::isfinite(x); }

} // namespace

double ScalarField::operator()(double t, double w) const {
    (void)t;
    switch (kind) {
    case Kind::constant:
        return value;
    case Kind::affine:
        return alpha + beta * w;
    case Kind::clipped_affine:
        return std::min(cap, alpha + beta * w);
    }
    return value;
}

ScalarField ScalarField::constant(double c) {
    ScalarField f;
    f.kind = Kind::constant;
    f.value = c;
    return f;
}

ScalarField ScalarField::affine(double alpha, double beta) {
    ScalarField f;
    f.kind = Kind::affine;
    f.alpha = alpha;
    f.beta = beta;
    return f;
}

ScalarField ScalarField::clipped_affine(double cap, double alpha, double beta) {
    ScalarField f;
    f.kind = Kind::clipped_affine;
    f.cap = cap;
    f.alpha = alpha;
    f.beta = beta;
    return f;
}

double GeneratorSpec::lipschitz() const {
    double c_lip = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i)
        c_lip = std::max(c_lip, std::abs(b[i]) + std::abs(c[i]));
    return c_lip;
}

GeneratorSpec GeneratorSpec::zero(int mode_count) {
    GeneratorSpec g;
    g.a.assign(mode_count, TimeAffine{});
    g.b.assign(mode_count, 0.0);
    g.c.assign(mode_count, 0.0);
    return g;
}

GeneratorSpec GeneratorSpec::rates(std::vector<double> per_mode_rates) {
    GeneratorSpec g = zero(static_cast<int>(per_mode_rates.size()));
    for (std::size_t i = 0; i < per_mode_rates.size(); ++i)
        g.a[i] = TimeAffine::constant(per_mode_rates[i]);
    return g;
}

double eval_h(const CostSpec& costs, Mode i, Mode j, double t, double y) {
    if (i == j)
        throw ConfigError("eval_h: self-switch i == j has no cost application");
    if (const auto* lin = std::get_if<LinearCosts>(&costs))
        return y - lin->k[i][j];
    const auto& gen = std::get<GeneralCosts>(costs);
    return gen.h[i][j](t, y);
}

double lower_envelope(const ProblemSpec& spec, Mode i, double t, const std::vector<double>& y) {
    double env = -std::numeric_limits<double>::infinity();
    for (Mode j = 0; j < spec.mode_count; ++j) {
        if (j == i)
            continue;
        env = std::max(env, eval_h(spec.costs, i, j, t, y[j]));
    }
    return env;
}

bool ValidationReport::ok() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const ValidationEntry& e) { return e.pass; });
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& e : entries) {
        os << (e.pass ? (e.warning ? "[warn] " : "[pass] ") : "[FAIL] ") << e.clause;
        if (!e.witness.empty())
            os << " at " << e.witness;
        os << '\n';
    }
    return os.str();
}

void check_problem_structure(const ProblemSpec& spec) {
    const int m = spec.mode_count;
    if (m < 1)
        throw ConfigError("problem: mode_count must be >= 1");
    if (!finite(spec.horizon) || spec.horizon <= 0.0)
        throw ConfigError("problem: horizon must be finite and > 0");
    const auto& gen = spec.generator;
    if (static_cast<int>(gen.a.size()) != m || static_cast<int>(gen.b.size()) != m ||
        static_cast<int>(gen.c.size()) != m)
        throw ConfigError("problem.generator: coefficient lists must have mode_count entries");
    for (int i = 0; i < m; ++i) {
        if (!finite(gen.a[i].a0) || !finite(gen.a[i].a1) || !finite(gen.b[i]) || !finite(gen.c[i]))
            throw ConfigError("problem.generator: non-finite coefficient for mode " + std::to_string(i));
    }
    if (static_cast<int>(spec.upper_barriers.size()) != m)
        throw ConfigError("problem.upper_barriers: expected mode_count entries");
    if (static_cast<int>(spec.terminals.size()) != m)
        throw ConfigError("problem.terminals: expected mode_count entries");
    auto check_field = [](const ScalarField& f, const std::string& where) {
        if (!finite(f.value) || !finite(f.alpha) || !finite(f.beta) || !finite(f.cap))
            throw ConfigError(where + ": non-finite parameter");
    };
    for (int i = 0; i < m; ++i) {
        check_field(spec.upper_barriers[i], "problem.upper_barriers[" + std::to_string(i) + "]");
        check_field(spec.terminals[i], "problem.terminals[" + std::to_string(i) + "]");
    }
    if (const auto* lin = std::get_if<LinearCosts>(&spec.costs)) {
        if (static_cast<int>(lin->k.size()) != m)
            throw ConfigError("problem.costs: k must be a mode_count x mode_count matrix");
        for (int i = 0; i < m; ++i) {
            if (static_cast<int>(lin->k[i].size()) != m)
                throw ConfigError("problem.costs: k row " + std::to_string(i) + " has wrong length");
            for (int j = 0; j < m; ++j)
                if (!finite(lin->k[i][j]))
                    throw ConfigError("problem.costs: non-finite k(" + std::to_string(i) + "," +
                                      std::to_string(j) + ")");
        }
    } else {
        const auto& gen_costs = std::get<GeneralCosts>(spec.costs);
        if (static_cast<int>(gen_costs.h.size()) != m)
            throw ConfigError("problem.costs: h must be a mode_count x mode_count family");
        for (int i = 0; i < m; ++i) {
            if (static_cast<int>(gen_costs.h[i].size()) != m)
                throw ConfigError("problem.costs: h row " + std::to_string(i) + " has wrong length");
            for (int j = 0; j < m; ++j)
                if (i != j && !gen_costs.h[i][j])
                    throw ConfigError("problem.costs: missing callable h(" + std::to_string(i) +
                                      "," + std::to_string(j) + ")");
        }
    }
}

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> out;
    out.reserve(n);
    if (n == 1) {
        out.push_back(lo);
        return out;
    }
    for (int i = 0; i < n; ++i)
        out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    return out;
}

void check_linear_costs(const ProblemSpec& spec, const LinearCosts& lin, ValidationReport& rep) {
    const int m = spec.mode_count;
    ValidationEntry diag{"costs.diagonal_zero", true, false, ""};
    ValidationEntry pos{"costs.offdiagonal_positive", true, false, ""};
    for (int i = 0; i < m && diag.pass; ++i) {
        if (lin.k[i][i] != 0.0) {
            diag.pass = false;
            diag.witness = format_point("k(%.0f,%.0f) = %g", double(i), double(i), lin.k[i][i]);
        }
    }
    for (int i = 0; i < m && pos.pass; ++i) {
        for (int j = 0; j < m && pos.pass; ++j) {
            if (i != j && !(lin.k[i][j] > 0.0)) {
                pos.pass = false;
                pos.witness = format_point("k(%.0f,%.0f) = %g", double(i), double(j), lin.k[i][j]);
            }
        }
    }
    // Strict triangle: k(i,j) + k(j,l) > k(i,l) for i != j, j != l. The l == i
    // instances say every two-switch loop has positive total cost.
    ValidationEntry tri{"costs.strict_triangle", true, false, ""};
    bool strict_ok = true, nonstrict_ok = true;
    int wi = 0, wj = 0, wl = 0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int l = 0; l < m; ++l) {
                if (i == j || j == l)
                    continue;
                const double lhs = lin.k[i][j] + lin.k[j][l];
                const double rhs = lin.k[i][l];
                if (!(lhs > rhs) && strict_ok) {
                    strict_ok = false;
                    wi = i; wj = j; wl = l;
                }
                if (lhs < rhs)
                    nonstrict_ok = false;
            }
    if (!strict_ok) {
        tri.witness = format_point("(i,j,l) = (%.0f,%.0f,%.0f)", double(wi), double(wj), double(wl));
        if (spec.allow_nonstrict_costs && nonstrict_ok) {
            tri.warning = true;
            tri.witness += " (equality allowed by allow_nonstrict_costs)";
        } else {
            tri.pass = false;
        }
    }
    rep.entries.push_back(diag);
    rep.entries.push_back(pos);
    rep.entries.push_back(tri);
}

void check_general_costs(const ProblemSpec& spec, const GeneralCosts& gen, const GridSpec& grid,
                         ValidationReport& rep) {
    const int m = spec.mode_count;
    const auto ts = linspace(0.0, spec.horizon, grid.t_points);
    const auto ys = linspace(grid.y_min, grid.y_max, grid.y_points);

    ValidationEntry decl{"costs.declared_nondecreasing", gen.declared_nondecreasing, false, ""};
    if (!decl.pass)
        decl.witness = "declaration flag is false";
    ValidationEntry below{"costs.below_identity", true, false, ""};
    ValidationEntry mono{"costs.nondecreasing", true, false, ""};
    ValidationEntry chain{"costs.chain_dominated", true, false, ""};

    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            if (i == j)
                continue;
            for (double t : ts) {
                double prev = 0.0;
                bool have_prev = false;
                for (double y : ys) {
                    const double hy = gen.h[i][j](t, y);
                    if (below.pass && !(hy <= y)) {
                        below.pass = false;
                        below.witness = format_point("h(t=%g, y=%g) = %g", t, y, hy) +
                                        format_point(" for (i,j)=(%.0f,%.0f)", double(i), double(j));
                    }
                    if (have_prev && mono.pass && hy < prev) {
                        mono.pass = false;
                        mono.witness = format_point("h decreases near (t=%g, y=%g)", t, y) +
                                       format_point(" for (i,j)=(%.0f,%.0f)", double(i), double(j));
                    }
                    prev = hy;
                    have_prev = true;
                }
            }
        }

    // Chain domination, h_{i,j}(t, h_{j,l}(t, y)) < h_{i,l}(t, y), with the
    // identity convention h_{i,i}(t, y) = y so the l == i instances enforce
    // that no two-switch loop pays for itself.
    auto h_or_id = [&](int i, int j, double t, double y) {
        return i == j ? y : gen.h[i][j](t, y);
    };
    for (int i = 0; i < m && chain.pass; ++i)
        for (int j = 0; j < m && chain.pass; ++j)
            for (int l = 0; l < m && chain.pass; ++l) {
                if (i == j || j == l)
                    continue;
                for (double t : ts) {
                    for (double y : ys) {
                        const double via = gen.h[i][j](t, gen.h[j][l](t, y));
                        const double direct = h_or_id(i, l, t, y);
                        if (!(via < direct)) {
                            chain.pass = false;
                            chain.witness =
                                format_point("(t=%g, y=%g)", t, y) +
                                format_point(" for (i,j,l)=(%.0f,%.0f,%.0f)", double(i), double(j),
                                             double(l));
                            break;
                        }
                    }
                    if (!chain.pass)
                        break;
                }
            }

    rep.entries.push_back(decl);
    rep.entries.push_back(below);
    rep.entries.push_back(mono);
    rep.entries.push_back(chain);
}

void check_region_membership(const ProblemSpec& spec, const GridSpec& grid, ValidationReport& rep) {
    const int m = spec.mode_count;
    const auto ts = linspace(0.0, spec.horizon, grid.t_points);
    const auto ws = linspace(grid.y_min, grid.y_max, grid.y_points);

    ValidationEntry sq{"barriers.region_membership", true, false, ""};
    for (int i = 0; i < m && sq.pass; ++i)
        for (int j = 0; j < m && sq.pass; ++j) {
            if (i == j)
                continue;
            for (double t : ts) {
                for (double w : ws) {
                    const double si = spec.upper_barrier(i, t, w);
                    const double hj = eval_h(spec.costs, i, j, t, spec.upper_barrier(j, t, w));
                    if (!(hj <= si)) {
                        sq.pass = false;
                        sq.witness = format_point("(t=%g, w=%g)", t, w) +
                                     format_point(": h(S_j)=%g > S_i=%g", hj, si) +
                                     format_point(" for (i,j)=(%.0f,%.0f)", double(i), double(j));
                        break;
                    }
                }
                if (!sq.pass)
                    break;
            }
        }

    ValidationEntry gs{"terminals.below_barrier", true, false, ""};
    const double t_end = spec.horizon;
    for (int i = 0; i < m && gs.pass; ++i)
        for (double w : ws) {
            const double gi = spec.terminal(i, w);
            const double si = spec.upper_barrier(i, t_end, w);
            if (!(gi <= si)) {
                gs.pass = false;
                gs.witness = format_point("w=%g: g_i=%g > S_i=%g", w, gi, si) +
                             format_point(" for i=%.0f", double(i));
                break;
            }
        }

    ValidationEntry gq{"terminals.region_membership", true, false, ""};
    for (int i = 0; i < m && gq.pass; ++i)
        for (int j = 0; j < m && gq.pass; ++j) {
            if (i == j)
                continue;
            for (double w : ws) {
                const double gi = spec.terminal(i, w);
                const double hj = eval_h(spec.costs, i, j, t_end, spec.terminal(j, w));
                if (!(hj <= gi)) {
                    gq.pass = false;
                    gq.witness = format_point("w=%g: h(g_j)=%g > g_i=%g", w, hj, gi) +
                                 format_point(" for (i,j)=(%.0f,%.0f)", double(i), double(j));
                    break;
                }
            }
        }

    rep.entries.push_back(sq);
    rep.entries.push_back(gs);
    rep.entries.push_back(gq);
}

} // namespace

ValidationReport validate_hypotheses(const ProblemSpec& spec, const GridSpec& grid) {
    check_problem_structure(spec);
    if (grid.t_points < 1 || grid.y_points < 2 || !(grid.y_min < grid.y_max))
        throw ConfigError("validation grid: need t_points >= 1, y_points >= 2, y_min < y_max");

    ValidationReport rep;
    {
        std::ostringstream os;
        os << grid.t_points << " times in [0, " << spec.horizon << "] x " << grid.y_points
           << " values in [" << grid.y_min << ", " << grid.y_max << "]";
        rep.grid_description = os.str();
    }

    // Driver regularity: with the affine family finiteness of all parameters
    // (already enforced structurally) settles both clauses exactly.
    rep.entries.push_back(ValidationEntry{"generator.lipschitz_finite", true, false, ""});
    rep.entries.push_back(ValidationEntry{"generator.intercept_bounded", true, false, ""});

    if (const auto* lin = std::get_if<LinearCosts>(&spec.costs))
        check_linear_costs(spec, *lin, rep);
    else
        check_general_costs(spec, std::get<GeneralCosts>(spec.costs), grid, rep);

    check_region_membership(spec, grid, rep);
    return rep;
}

} // namespace orbsde
