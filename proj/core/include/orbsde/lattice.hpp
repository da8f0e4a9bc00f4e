#pragma once

#include <vector>

namespace orbsde {

enum class LatticeKind { recombining, full_tree };

// Binomial approximation of a one-dimensional Brownian driver on [0, T] with
// N steps of size dt = T/N and increments +-sqrt(dt), weight 1/2 each.
//
// Node addressing:
//   recombining: (level n, up-count u), 0 <= u <= n, state w = (2u - n)*sqrt(dt);
//                children of u at level n+1 are u (down) and u+1 (up).
//   full_tree:   (level n, path p), 0 <= p < 2^n, the n low bits of p are the
//                up/down moves, state w = (2*popcount(p) - n)*sqrt(dt);
//                children of p are 2p (down) and 2p+1 (up).
//
// States are always derived from the up-count, never accumulated, so node
// geometry is reproducible bit-exactly from (level, index).
struct Lattice {
    LatticeKind kind = LatticeKind::recombining;
    int step_count = 0; // N
    double horizon = 0.0;
    double dt = 0.0;
    double sqrt_dt = 0.0;

    int levels() const { return step_count + 1; }
    int node_count(int level) const;
    double state(int level, int index) const; // w at the node
    double time(int level) const;             // level * dt; exactly horizon at level N
};

// full_tree refuses N > 20 (exponential node count).
Lattice build_lattice(double T, int N, LatticeKind kind);

using LevelValues = std::vector<double>;

// E[v(level n+1) | node at level n]: the half-sum of the two children.
LevelValues cond_expect(const Lattice& lat, int level, const LevelValues& next_values);

// (v_up - v_down)/(2*sqrt(dt)): the discrete martingale integrand at level n.
LevelValues cond_expect_dw(const Lattice& lat, int level, const LevelValues& next_values);

// Probability of reaching each node of a level: 2^-n per path for full trees,
// binomial(n, u)/2^n for recombining lattices.
std::vector<double> level_weights(const Lattice& lat, int level);

} // namespace orbsde
