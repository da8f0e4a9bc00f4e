#include "orbsde/lattice.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "orbsde/errors.hpp"

namespace orbsde {

namespace {

constexpr int kMaxFullTreeSteps = 20;

void check_level(const Lattice& lat, int level) {
    if (level < 0 || level > lat.step_count)
        throw ConfigError("lattice: level " + std::to_string(level) + " out of range [0, " +
                          std::to_string(lat.step_count) + "]");
}

} // namespace

int Lattice::node_count(int level) const {
    return kind == LatticeKind::recombining ? level + 1 : 1 << level;
}

double Lattice::state(int level, int index) const {
    const int ups = kind == LatticeKind::recombining
                        ? index
                        : std::popcount(static_cast<unsigned>(index));
    return static_cast<double>(2 * ups - level) * sqrt_dt;
}

double Lattice::time(int level) const {
    return level == step_count ? horizon : static_cast<double>(level) * dt;
}

Lattice build_lattice(double T, int N, LatticeKind kind) {
    if (!(T > 0.0) || !std::isfinite(T))
        throw ConfigError("lattice: horizon must be finite and > 0");
    if (N < 1)
        throw ConfigError("lattice: step count must be >= 1");
    if (kind == LatticeKind::full_tree && N > kMaxFullTreeSteps)
        throw ConfigError("lattice: full_tree limited to " + std::to_string(kMaxFullTreeSteps) +
                          " steps, got " + std::to_string(N));
    Lattice lat;
    lat.kind = kind;
    lat.step_count = N;
    lat.horizon = T;
    lat.dt = T / static_cast<double>(N);
    lat.sqrt_dt = std::sqrt(lat.dt);
    return lat;
}

LevelValues cond_expect(const Lattice& lat, int level, const LevelValues& next_values) {
    check_level(lat, level + 1);
    if (static_cast<int>(next_values.size()) != lat.node_count(level + 1))
        throw ConfigError("cond_expect: values not indexed by level " + std::to_string(level + 1));
    const int n = lat.node_count(level);
    LevelValues out(n);
    if (lat.kind == LatticeKind::recombining) {
        for (int u = 0; u < n; ++u)
            out[u] = 0.5 * (next_values[u + 1] + next_values[u]);
    } else {
        for (int p = 0; p < n; ++p)
            out[p] = 0.5 * (next_values[2 * p + 1] + next_values[2 * p]);
    }
    return out;
}

LevelValues cond_expect_dw(const Lattice& lat, int level, const LevelValues& next_values) {
    check_level(lat, level + 1);
    if (static_cast<int>(next_values.size()) != lat.node_count(level + 1))
        throw ConfigError("cond_expect_dw: values not indexed by level " + std::to_string(level + 1));
    const int n = lat.node_count(level);
    const double denom = 2.0 * lat.sqrt_dt;
    LevelValues out(n);
    if (lat.kind == LatticeKind::recombining) {
        for (int u = 0; u < n; ++u)
            out[u] = (next_values[u + 1] - next_values[u]) / denom;
    } else {
        for (int p = 0; p < n; ++p)
            out[p] = (next_values[2 * p + 1] - next_values[2 * p]) / denom;
    }
    return out;
}

std::vector<double> level_weights(const Lattice& lat, int level) {
    check_level(lat, level);
    const int n = lat.node_count(level);
    std::vector<double> w(n);
    if (lat.kind == LatticeKind::full_tree) {
        const double p = std::ldexp(1.0, -level);
        for (int i = 0; i < n; ++i)
            w[i] = p;
        return w;
    }
    // binomial(level, u) / 2^level by the multiplicative recurrence; exact up
    // to rounding of the ratio, which stays far below solver tolerances.
    w[0] = std::ldexp(1.0, -level);
    for (int u = 0; u + 1 < n; ++u)
        w[u + 1] = w[u] * static_cast<double>(level - u) / static_cast<double>(u + 1);
    return w;
}

} // namespace orbsde
