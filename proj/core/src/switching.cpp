#include "orbsde/switching.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "orbsde/detail/parallel.hpp"
#include "orbsde/errors.hpp"

namespace orbsde {
namespace {

constexpr double kRepresentationTol = 1e-10;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_full_tree(const Lattice& tree) {
    if (tree.kind != LatticeKind::full_tree)
        throw ConfigError("switching: path-wise evaluation requires a full_tree lattice");
}

void check_contraction(const ProblemSpec& spec, double dt) {
    if (dt * spec.generator.lipschitz() >= 1.0)
        throw ContractionError("time step too coarse for the generator: dt * L = " +
                               std::to_string(dt * spec.generator.lipschitz()) + " >= 1");
}

void check_strategy_shape(const SwitchingStrategy& s, const Lattice& tree, int m) {
    if (s.initial_level != 0)
        throw ConfigError("switching: only strategies rooted at level 0 are evaluated");
    if (s.initial_mode < 0 || s.initial_mode >= m)
        throw ConfigError("switching: initial mode out of range");
    if (static_cast<int>(s.target.size()) != tree.step_count)
        throw ConfigError("switching: strategy level count does not match the tree");
    for (int n = 0; n < tree.step_count; ++n) {
        if (static_cast<int>(s.target[n].size()) != tree.node_count(n))
            throw ConfigError("switching: strategy node count at level " + std::to_string(n) +
                              " does not match the tree");
        for (const auto& cell : s.target[n]) {
            if (static_cast<int>(cell.size()) != m)
                throw ConfigError("switching: strategy mode count does not match the problem");
            for (Mode j : cell)
                if (j < 0 || j >= m) throw ConfigError("switching: strategy target mode out of range");
        }
    }
}

// Linear-index view of a stopping rule for the flat evaluator.
struct RuleView {
    StoppingRule::Kind kind = StoppingRule::Kind::never;
    std::uint64_t mask = 0;
    const std::uint8_t* touch = nullptr;
    int m = 1;
};

bool rule_stops(const RuleView& r, int interior_linear, Mode mode) {
    switch (r.kind) {
        case StoppingRule::Kind::never: return false;
        case StoppingRule::Kind::node_set:
            return interior_linear < 64 && ((r.mask >> interior_linear) & 1u) != 0;
        case StoppingRule::Kind::barrier_touch:
            return r.touch[static_cast<std::size_t>(interior_linear) * r.m + mode] != 0;
    }
    return false;
}

RuleView view_of(const StoppingRule& rule, const Lattice& tree, int m) {
    RuleView v{rule.kind, rule.node_mask, nullptr, m};
    if (rule.kind == StoppingRule::Kind::barrier_touch) {
        if (rule.mode_count != m)
            throw ConfigError("switching: stopping rule mode count does not match the problem");
        const std::size_t need =
            static_cast<std::size_t>(interior_index(tree, tree.step_count - 1,
                                                    tree.node_count(tree.step_count - 1) - 1) + 1) * m;
        if (rule.touch.size() != need)
            throw ConfigError("switching: barrier-touch table size does not match the tree");
        v.touch = rule.touch.data();
    }
    return v;
}

// Everything the per-policy recursion reads, precomputed once per (problem,
// tree). Values come from the same calls the solvers make, so policy values
// and solver surfaces agree bitwise where the theory says they coincide.
struct Tables {
    int m = 0;
    int depth = 0;
    double dt = 0.0;
    double sqrt_dt = 0.0;
    bool linear = false;
    std::vector<double> kflat;  // linear costs, [from * m + to]
    const CostSpec* costs = nullptr;
    std::vector<double> times;  // [level]
    std::vector<double> a_t;    // [level * m + mode]
    std::vector<double> cvec;   // [mode]
    std::vector<double> denom;  // [mode], 1 - dt * b
    std::vector<double> upper;  // [interior_linear * m + mode]
    std::vector<double> term;   // [terminal_node * m + mode]
};

Tables build_tables(const ProblemSpec& spec, const Lattice& tree) {
    Tables tab;
    const int m = spec.mode_count;
    const int N = tree.step_count;
    tab.m = m;
    tab.depth = N;
    tab.dt = tree.dt;
    tab.sqrt_dt = tree.sqrt_dt;
    tab.costs = &spec.costs;
    if (const auto* lin = std::get_if<LinearCosts>(&spec.costs)) {
        tab.linear = true;
        tab.kflat.resize(static_cast<std::size_t>(m) * m, 0.0);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                if (i != j) tab.kflat[static_cast<std::size_t>(i) * m + j] = lin->k[i][j];
    }
    tab.times.resize(N + 1);
    for (int n = 0; n <= N; ++n) tab.times[n] = tree.time(n);
    tab.a_t.resize(static_cast<std::size_t>(N) * m);
    for (int n = 0; n < N; ++n)
        for (int i = 0; i < m; ++i)
            tab.a_t[static_cast<std::size_t>(n) * m + i] = spec.generator.a[i](tab.times[n]);
    tab.cvec = spec.generator.c;
    tab.denom.resize(m);
    for (int i = 0; i < m; ++i) tab.denom[i] = 1.0 - tree.dt * spec.generator.b[i];
    const std::size_t interior = (std::size_t{1} << N) - 1;
    tab.upper.resize(interior * m);
    for (int n = 0; n < N; ++n) {
        const std::size_t off = (std::size_t{1} << n) - 1;
        for (int p = 0; p < (1 << n); ++p) {
            const double w = tree.state(n, p);
            for (int i = 0; i < m; ++i)
                tab.upper[(off + p) * m + i] = spec.upper_barrier(i, tab.times[n], w);
        }
    }
    tab.term.resize((std::size_t{1} << N) * m);
    for (int p = 0; p < (1 << N); ++p) {
        const double w = tree.state(N, p);
        for (int i = 0; i < m; ++i)
            tab.term[static_cast<std::size_t>(p) * m + i] = spec.terminal(i, w);
    }
    return tab;
}

double cost_transform(const Tables& tab, Mode from, Mode to, double t, double u) {
    if (tab.linear) return u - tab.kflat[static_cast<std::size_t>(from) * tab.m + to];
    return eval_h(*tab.costs, from, to, t, u);
}

struct Workspace {
    std::vector<double> w;    // arrival values, in-place down the levels
    std::vector<double> ubuf; // per-node post-decision values, one per mode

    void init(const Tables& tab) {
        w.resize((std::size_t{1} << tab.depth) * tab.m);
        ubuf.resize(tab.m);
    }
};

// One backward pass for a fixed policy. sigma maps [interior_linear * m +
// arrival_mode] to the post-switch mode. rule == nullptr runs the reflected
// recursion (clip at the upper barrier); otherwise the stopped game (freeze at
// the barrier where the rule stops, no clip elsewhere). roots receives the
// root arrival value for every initial mode at once.
void policy_roots(const Tables& tab, const std::uint8_t* sigma, const RuleView* rule,
                  Workspace& ws, double* roots) {
    const int m = tab.m;
    const int N = tab.depth;
    double* w = ws.w.data();
    double* u = ws.ubuf.data();
    const std::size_t terminal = (std::size_t{1} << N) * m;
    for (std::size_t idx = 0; idx < terminal; ++idx) w[idx] = tab.term[idx];
    for (int n = N - 1; n >= 0; --n) {
        const double t = tab.times[n];
        const std::size_t off = (std::size_t{1} << n) - 1;
        const double* a_n = &tab.a_t[static_cast<std::size_t>(n) * m];
        for (int p = 0; p < (1 << n); ++p) {
            const std::size_t lin = off + p;
            for (int i = 0; i < m; ++i) {
                const double wu = w[(static_cast<std::size_t>(2 * p) + 1) * m + i];
                const double wd = w[static_cast<std::size_t>(2 * p) * m + i];
                const double e = 0.5 * (wu + wd);
                const double z = (wu - wd) / (2.0 * tab.sqrt_dt);
                const double ybar = (e + tab.dt * (a_n[i] + tab.cvec[i] * z)) / tab.denom[i];
                const double s = tab.upper[lin * m + i];
                double val;
                if (rule == nullptr)
                    val = std::min(s, ybar);
                else
                    val = rule_stops(*rule, static_cast<int>(lin), i) ? s : ybar;
                u[i] = val;
            }
            for (int mu = 0; mu < m; ++mu) {
                const Mode j = sigma[lin * m + mu];
                w[static_cast<std::size_t>(p) * m + mu] =
                    j == mu ? u[j] : cost_transform(tab, mu, j, t, u[j]);
            }
        }
    }
    for (int i = 0; i < m; ++i) roots[i] = w[i];
}

std::vector<std::uint8_t> flatten_strategy(const SwitchingStrategy& s, const Lattice& tree, int m) {
    const int N = tree.step_count;
    std::vector<std::uint8_t> sigma(((std::size_t{1} << N) - 1) * m);
    for (int n = 0; n < N; ++n) {
        const std::size_t off = (std::size_t{1} << n) - 1;
        for (int p = 0; p < (1 << n); ++p)
            for (int mu = 0; mu < m; ++mu)
                sigma[(off + p) * m + mu] = static_cast<std::uint8_t>(s.target[n][p][mu]);
    }
    return sigma;
}

SwitchingStrategy unflatten_strategy(const std::uint8_t* sigma, int depth, int m, Mode initial) {
    SwitchingStrategy s;
    s.initial_mode = initial;
    s.target.resize(depth);
    for (int n = 0; n < depth; ++n) {
        const std::size_t off = (std::size_t{1} << n) - 1;
        s.target[n].assign(std::size_t{1} << n, std::vector<Mode>(m));
        for (int p = 0; p < (1 << n); ++p)
            for (int mu = 0; mu < m; ++mu)
                s.target[n][p][mu] = sigma[(off + p) * m + mu];
    }
    return s;
}

void decode_strategy(std::uint64_t code, int states, int m, std::uint8_t* sigma) {
    for (int s = 0; s < states; ++s) {
        sigma[s] = static_cast<std::uint8_t>(code % m);
        code /= m;
    }
}

// Exhaustive statistics across all feedback strategies (and, when joint, all
// node-subset rules), with root values for every initial mode collected in a
// single backward pass per policy.
struct EnumStats {
    std::vector<double> best;              // [mode]
    std::vector<std::uint64_t> best_code;  // [mode]
    std::vector<double> maxmin;            // [mode]
    std::vector<std::uint64_t> maxmin_code;// [mode]
    std::vector<double> rule_max;          // [mask * m + mode]
    std::vector<double> minmax;            // [mode]
    std::vector<std::uint64_t> minmax_mask;// [mode]
    std::uint64_t strategy_count = 0;
    std::uint64_t rule_count = 0;
    std::uint64_t game_evaluations = 0;
};

EnumStats enumerate_all(const Tables& tab, bool include_games) {
    const int m = tab.m;
    const int depth = tab.depth;
    const int states = m * ((1 << depth) - 1);

    // Strategy codes are base-m digit strings over the feedback states.
    std::uint64_t strategy_count = 1;
    constexpr std::uint64_t kStrategyCap = std::uint64_t{1} << 30;
    for (int s = 0; s < states; ++s) {
        if (strategy_count > kStrategyCap / m)
            throw ConfigError("enumeration refused: " + std::to_string(states) +
                              " feedback states give more than 2^30 strategies");
        strategy_count *= static_cast<std::uint64_t>(m);
    }
    if (include_games && states > 16)
        throw ConfigError("joint game enumeration refused: " + std::to_string(states) +
                          " feedback states exceed the limit of 16");
    const int interior = (1 << depth) - 1;
    const std::uint64_t rule_count = include_games ? (std::uint64_t{1} << interior) : 0;

    struct Local {
        bool used = false;
        std::vector<double> best, maxmin, rule_max;
        std::vector<std::uint64_t> best_code, maxmin_code;
        std::uint64_t games = 0;
        Workspace ws;
        std::vector<std::uint8_t> sigma;
        std::vector<double> roots, mins;
    };
    std::vector<Local> locals(std::max(1, detail::worker_count()));

    detail::parallel_chunks(strategy_count, [&](std::uint64_t lo, std::uint64_t hi, int slot) {
        Local& L = locals[slot];
        L.used = true;
        L.best.assign(m, -kInf);
        L.best_code.assign(m, 0);
        L.maxmin.assign(m, -kInf);
        L.maxmin_code.assign(m, 0);
        L.rule_max.assign(rule_count * m, -kInf);
        L.ws.init(tab);
        L.sigma.resize(states);
        L.roots.resize(m);
        L.mins.resize(m);
        for (std::uint64_t code = lo; code < hi; ++code) {
            decode_strategy(code, states, m, L.sigma.data());
            policy_roots(tab, L.sigma.data(), nullptr, L.ws, L.roots.data());
            for (int i = 0; i < m; ++i) {
                if (L.roots[i] > L.best[i]) {
                    L.best[i] = L.roots[i];
                    L.best_code[i] = code;
                }
            }
            if (!include_games) continue;
            std::fill(L.mins.begin(), L.mins.end(), kInf);
            for (std::uint64_t mask = 0; mask < rule_count; ++mask) {
                RuleView rv{StoppingRule::Kind::node_set, mask, nullptr, m};
                policy_roots(tab, L.sigma.data(), &rv, L.ws, L.roots.data());
                for (int i = 0; i < m; ++i) {
                    const double v = L.roots[i];
                    if (v > L.rule_max[mask * m + i]) L.rule_max[mask * m + i] = v;
                    if (v < L.mins[i]) L.mins[i] = v;
                }
            }
            L.games += rule_count;
            for (int i = 0; i < m; ++i) {
                if (L.mins[i] > L.maxmin[i]) {
                    L.maxmin[i] = L.mins[i];
                    L.maxmin_code[i] = code;
                }
            }
        }
    });

    // Slot-ordered merge with strict improvement keeps the smallest code on
    // ties, independent of thread count.
    EnumStats st;
    st.strategy_count = strategy_count;
    st.rule_count = rule_count;
    st.best.assign(m, -kInf);
    st.best_code.assign(m, 0);
    st.maxmin.assign(m, -kInf);
    st.maxmin_code.assign(m, 0);
    st.rule_max.assign(rule_count * m, -kInf);
    for (const Local& L : locals) {
        if (!L.used) continue;
        st.game_evaluations += L.games;
        for (int i = 0; i < m; ++i) {
            if (L.best[i] > st.best[i]) {
                st.best[i] = L.best[i];
                st.best_code[i] = L.best_code[i];
            }
            if (include_games && L.maxmin[i] > st.maxmin[i]) {
                st.maxmin[i] = L.maxmin[i];
                st.maxmin_code[i] = L.maxmin_code[i];
            }
        }
        for (std::size_t k = 0; k < st.rule_max.size(); ++k)
            if (L.rule_max[k] > st.rule_max[k]) st.rule_max[k] = L.rule_max[k];
    }
    st.minmax.assign(m, kInf);
    st.minmax_mask.assign(m, 0);
    if (include_games) {
        for (std::uint64_t mask = 0; mask < rule_count; ++mask)
            for (int i = 0; i < m; ++i)
                if (st.rule_max[mask * m + i] < st.minmax[i]) {
                    st.minmax[i] = st.rule_max[mask * m + i];
                    st.minmax_mask[i] = mask;
                }
    }
    return st;
}

std::string format_counterexample(const char* check, Mode mode, double lhs, double rhs) {
    char buf[192];
    std::snprintf(buf, sizeof(buf), "%s failed from mode %d: %.17g vs %.17g (gap %.3e)", check,
                  mode, lhs, rhs, std::fabs(lhs - rhs));
    return buf;
}

} // namespace

SwitchingStrategy SwitchingStrategy::stay(const Lattice& lat, int mode_count, Mode initial) {
    SwitchingStrategy s;
    s.initial_mode = initial;
    s.target.resize(lat.step_count);
    for (int n = 0; n < lat.step_count; ++n) {
        s.target[n].assign(lat.node_count(n), std::vector<Mode>(mode_count));
        for (auto& cell : s.target[n])
            for (int mu = 0; mu < mode_count; ++mu) cell[mu] = mu;
    }
    return s;
}

std::vector<std::pair<int, Mode>> switching_sequence(const SwitchingStrategy& strategy,
                                                     const Lattice& tree,
                                                     std::uint32_t path_bits, Mode start) {
    check_full_tree(tree);
    const int N = tree.step_count;
    if (static_cast<int>(strategy.target.size()) != N)
        throw ConfigError("switching: strategy level count does not match the tree");
    std::vector<std::pair<int, Mode>> seq;
    Mode cur = start;
    for (int n = 0; n < N; ++n) {
        const int node = static_cast<int>(path_bits >> (N - n)) & ((1 << n) - 1);
        const Mode j = strategy.at(n, node, cur);
        if (j != cur) {
            seq.emplace_back(n, j);
            cur = j;
        }
    }
    return seq;
}

bool StoppingRule::stops(const Lattice& lat, int level, int node, Mode mode) const {
    if (kind == Kind::never) return false;
    const int lin = interior_index(lat, level, node);
    if (kind == Kind::node_set) return lin < 64 && ((node_mask >> lin) & 1u) != 0;
    if (mode < 0 || mode >= mode_count)
        throw ConfigError("switching: stopping rule queried with a mode out of range");
    const std::size_t idx = static_cast<std::size_t>(lin) * mode_count + mode;
    if (idx >= touch.size())
        throw ConfigError("switching: barrier-touch table does not cover the queried node");
    return touch[idx] != 0;
}

StoppingRule StoppingRule::never_stop() { return {}; }

StoppingRule StoppingRule::from_mask(std::uint64_t mask) {
    StoppingRule r;
    r.kind = Kind::node_set;
    r.node_mask = mask;
    return r;
}

int interior_index(const Lattice& lat, int level, int node) {
    if (level < 0 || level >= lat.step_count || node < 0 || node >= lat.node_count(level))
        throw ConfigError("switching: interior node out of range");
    const int offset = lat.kind == LatticeKind::recombining ? level * (level + 1) / 2
                                                            : (1 << level) - 1;
    return offset + node;
}

SwitchedSolution evaluate_switched(const ProblemSpec& spec, const Lattice& tree,
                                   const SwitchingStrategy& strategy) {
    check_problem_structure(spec);
    check_full_tree(tree);
    check_contraction(spec, tree.dt);
    check_strategy_shape(strategy, tree, spec.mode_count);
    const int m = spec.mode_count;
    const int N = tree.step_count;
    const Tables tab = build_tables(spec, tree);

    SwitchedSolution out;
    out.initial_mode = strategy.initial_mode;
    auto make = [&](Surface& s) {
        s.assign(m, {});
        for (int i = 0; i < m; ++i) {
            s[i].resize(N + 1);
            for (int n = 0; n <= N; ++n) s[i][n].assign(tree.node_count(n), 0.0);
        }
    };
    make(out.U);
    make(out.V);
    make(out.dL);

    std::vector<double> w((std::size_t{1} << N) * m);
    for (int p = 0; p < (1 << N); ++p)
        for (int i = 0; i < m; ++i) {
            const double g = tab.term[static_cast<std::size_t>(p) * m + i];
            out.U[i][N][p] = g;
            w[static_cast<std::size_t>(p) * m + i] = g;
        }
    std::vector<double> u(m);
    for (int n = N - 1; n >= 0; --n) {
        const double t = tab.times[n];
        const std::size_t off = (std::size_t{1} << n) - 1;
        for (int p = 0; p < (1 << n); ++p) {
            const std::size_t lin = off + p;
            for (int i = 0; i < m; ++i) {
                const double wu = w[(static_cast<std::size_t>(2 * p) + 1) * m + i];
                const double wd = w[static_cast<std::size_t>(2 * p) * m + i];
                const double e = 0.5 * (wu + wd);
                const double z = (wu - wd) / (2.0 * tab.sqrt_dt);
                const double ybar =
                    (e + tab.dt * (tab.a_t[static_cast<std::size_t>(n) * m + i] + tab.cvec[i] * z)) /
                    tab.denom[i];
                const double s = tab.upper[lin * m + i];
                const double val = std::min(s, ybar);
                u[i] = val;
                out.U[i][n][p] = val;
                out.V[i][n][p] = z;
                out.dL[i][n][p] = ybar - val;
            }
            for (int mu = 0; mu < m; ++mu) {
                const Mode j = strategy.at(n, p, mu);
                w[static_cast<std::size_t>(p) * m + mu] =
                    j == mu ? u[j] : cost_transform(tab, mu, j, t, u[j]);
            }
        }
    }
    out.root_value = w[strategy.initial_mode];
    return out;
}

double evaluate_game(const ProblemSpec& spec, const Lattice& tree,
                     const SwitchingStrategy& strategy, const StoppingRule& rule) {
    check_problem_structure(spec);
    check_full_tree(tree);
    check_contraction(spec, tree.dt);
    check_strategy_shape(strategy, tree, spec.mode_count);
    const Tables tab = build_tables(spec, tree);
    const RuleView rv = view_of(rule, tree, spec.mode_count);
    const std::vector<std::uint8_t> sigma = flatten_strategy(strategy, tree, spec.mode_count);
    Workspace ws;
    ws.init(tab);
    std::vector<double> roots(spec.mode_count);
    policy_roots(tab, sigma.data(), &rv, ws, roots.data());
    return roots[strategy.initial_mode];
}

ExtractedPolicy extract_optimal_strategy(const Solution& sol, const ProblemSpec& spec,
                                         const Lattice& lat, double tol) {
    check_problem_structure(spec);
    if (!(tol >= 0.0) || !std::isfinite(tol))
        throw ConfigError("extraction tolerance must be finite and nonnegative");
    const int m = spec.mode_count;
    const int N = lat.step_count;
    if (static_cast<int>(sol.Y.size()) != m ||
        static_cast<int>(sol.Y[0].size()) != N + 1)
        throw ConfigError("extraction: solution shape does not match the lattice");

    ExtractedPolicy pol;
    pol.strategy.initial_mode = 0;
    pol.strategy.target.resize(N);
    pol.rule.kind = StoppingRule::Kind::barrier_touch;
    pol.rule.mode_count = m;
    const int interior_total = interior_index(lat, N - 1, lat.node_count(N - 1) - 1) + 1;
    pol.rule.touch.assign(static_cast<std::size_t>(interior_total) * m, 0);

    std::vector<double> y_here(m);
    for (int n = 0; n < N; ++n) {
        const double t = lat.time(n);
        pol.strategy.target[n].assign(lat.node_count(n), std::vector<Mode>(m));
        for (int idx = 0; idx < lat.node_count(n); ++idx) {
            const double w = lat.state(n, idx);
            const int lin = interior_index(lat, n, idx);
            for (int j = 0; j < m; ++j) y_here[j] = sol.Y[j][n][idx];
            for (int i = 0; i < m; ++i) {
                Mode target = i;
                if (m > 1) {
                    double best = -kInf;
                    Mode best_j = i;
                    for (int j = 0; j < m; ++j) {
                        if (j == i) continue;
                        const double v = eval_h(spec.costs, i, j, t, y_here[j]);
                        if (v > best) {
                            best = v;
                            best_j = j;
                        }
                    }
                    if (y_here[i] <= best + tol) target = best_j;
                }
                pol.strategy.target[n][idx][i] = target;
                const double s = spec.upper_barrier(i, t, w);
                pol.rule.touch[static_cast<std::size_t>(lin) * m + i] =
                    y_here[i] >= s - tol ? 1 : 0;
            }
        }
    }
    return pol;
}

OracleResult enumerate_oracle(const ProblemSpec& spec, int depth, Mode initial_mode,
                              bool include_games) {
    check_problem_structure(spec);
    if (depth < 1) throw ConfigError("enumeration depth must be at least 1");
    if (initial_mode < 0 || initial_mode >= spec.mode_count)
        throw ConfigError("enumeration initial mode out of range");
    const Lattice tree = build_lattice(spec.horizon, depth, LatticeKind::full_tree);
    check_contraction(spec, tree.dt);
    const Tables tab = build_tables(spec, tree);
    const EnumStats st = enumerate_all(tab, include_games);

    OracleResult out;
    out.initial_mode = initial_mode;
    out.strategy_count = st.strategy_count;
    out.rule_count = st.rule_count;
    out.game_evaluations = st.game_evaluations;
    const int m = spec.mode_count;
    const int states = m * ((1 << depth) - 1);
    std::vector<std::uint8_t> sigma(states);

    out.best_value = st.best[initial_mode];
    decode_strategy(st.best_code[initial_mode], states, m, sigma.data());
    out.best_strategy = unflatten_strategy(sigma.data(), depth, m, initial_mode);
    if (include_games) {
        out.minmax = st.minmax[initial_mode];
        out.maxmin = st.maxmin[initial_mode];
        out.minmax_rule = StoppingRule::from_mask(st.minmax_mask[initial_mode]);
        decode_strategy(st.maxmin_code[initial_mode], states, m, sigma.data());
        out.maxmin_strategy = unflatten_strategy(sigma.data(), depth, m, initial_mode);
    } else {
        out.minmax = std::numeric_limits<double>::quiet_NaN();
        out.maxmin = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

VerificationReport verify_representation(const ProblemSpec& spec, int depth,
                                         const SolverOptions& opts) {
    check_problem_structure(spec);
    if (depth < 1) throw ConfigError("verification depth must be at least 1");
    const int m = spec.mode_count;
    const Lattice tree = build_lattice(spec.horizon, depth, LatticeKind::full_tree);
    const Solution sol = solve_direct(spec, tree, opts);
    const Tables tab = build_tables(spec, tree);
    const EnumStats st = enumerate_all(tab, true);
    const ExtractedPolicy pol = extract_optimal_strategy(sol, spec, tree);
    const std::vector<std::uint8_t> sigma_hat = flatten_strategy(pol.strategy, tree, m);
    const RuleView tau_hat = view_of(pol.rule, tree, m);
    const int states = m * ((1 << depth) - 1);

    Workspace ws;
    ws.init(tab);
    std::vector<double> roots(m);

    // Switched (reflected) value of the extracted strategy, every start mode.
    std::vector<double> extracted(m);
    policy_roots(tab, sigma_hat.data(), nullptr, ws, extracted.data());

    // Game value of the extracted pair.
    std::vector<double> mid(m);
    policy_roots(tab, sigma_hat.data(), &tau_hat, ws, mid.data());

    // Left saddle side: every enumerated strategy against the extracted rule.
    std::vector<double> left_best(m, -kInf);
    std::vector<std::uint8_t> sigma(states);
    for (std::uint64_t code = 0; code < st.strategy_count; ++code) {
        decode_strategy(code, states, m, sigma.data());
        policy_roots(tab, sigma.data(), &tau_hat, ws, roots.data());
        for (int i = 0; i < m; ++i) left_best[i] = std::max(left_best[i], roots[i]);
    }

    // Right saddle side: the extracted strategy against every enumerated rule.
    std::vector<double> right_min(m, kInf);
    for (std::uint64_t mask = 0; mask < st.rule_count; ++mask) {
        RuleView rv{StoppingRule::Kind::node_set, mask, nullptr, m};
        policy_roots(tab, sigma_hat.data(), &rv, ws, roots.data());
        for (int i = 0; i < m; ++i) right_min[i] = std::min(right_min[i], roots[i]);
    }

    VerificationReport rep;
    rep.tolerance = kRepresentationTol;
    rep.game_evaluations = st.game_evaluations;
    rep.pass = true;
    rep.worst_gap = 0.0;
    auto check = [&](const char* name, Mode mode, double lhs, double rhs) {
        const double gap = std::fabs(lhs - rhs);
        rep.worst_gap = std::max(rep.worst_gap, gap);
        if (gap > rep.tolerance && rep.pass) {
            rep.pass = false;
            rep.counterexample = format_counterexample(name, mode, lhs, rhs);
        }
    };
    auto check_le = [&](const char* name, Mode mode, double excess) {
        rep.worst_gap = std::max(rep.worst_gap, std::max(0.0, excess));
        if (excess > rep.tolerance && rep.pass) {
            rep.pass = false;
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%s failed from mode %d: excess %.3e", name, mode,
                          excess);
            rep.counterexample = buf;
        }
    };
    for (int i = 0; i < m; ++i) {
        VerificationReport::ModeDetail d;
        d.mode = i;
        d.y0 = sol.value_at_root(i);
        d.best_value = st.best[i];
        d.minmax = st.minmax[i];
        d.maxmin = st.maxmin[i];
        d.extracted_value = extracted[i];
        d.worst_saddle_left = left_best[i] - mid[i];
        d.worst_saddle_right = mid[i] - right_min[i];
        rep.modes.push_back(d);
        check("root value vs best switched value", i, d.y0, d.best_value);
        check("root value vs min-max game value", i, d.y0, d.minmax);
        check("min-max vs max-min game value", i, d.minmax, d.maxmin);
        check("extracted strategy value vs root value", i, d.extracted_value, d.y0);
        check_le("left saddle inequality", i, d.worst_saddle_left);
        check_le("right saddle inequality", i, d.worst_saddle_right);
    }
    return rep;
}

} // namespace orbsde
