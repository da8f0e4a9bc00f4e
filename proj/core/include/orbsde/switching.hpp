#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "orbsde/lattice.hpp"
#include "orbsde/model.hpp"
#include "orbsde/solvers.hpp"

namespace orbsde {

// Feedback policy on (node, current mode). A decision is consulted on arrival
// at a node: the switch takes effect for the interval starting there and its
// cost is charged at that node's time against the post-switch continuation
// value. target[level][node][mode] == mode means stay.
struct SwitchingStrategy {
    std::vector<std::vector<std::vector<Mode>>> target; // non-terminal levels only
    Mode initial_mode = 0;
    int initial_level = 0; // only level-0 starts are evaluated

    Mode at(int level, int node, Mode current) const { return target[level][node][current]; }

    // Self-map everywhere: never switch.
    static SwitchingStrategy stay(const Lattice& lat, int mode_count, Mode initial);
};

// The (level, mode) switch sequence the feedback policy induces along one
// path, starting from (level 0, start); path_bits are the up/down moves,
// earliest move in the highest of step_count bits.
std::vector<std::pair<int, Mode>> switching_sequence(const SwitchingStrategy& strategy,
                                                     const Lattice& tree,
                                                     std::uint32_t path_bits, Mode start);

// When the stopper hands over the upper payoff. Enumerated rules are pure
// node subsets. Extracted rules are reactive instead: they stop when the
// running mode's value surface touches its upper barrier, whichever strategy
// they are played against; a node-subset materialization of that rule would
// bake in one strategy's modes and lose the saddle property.
struct StoppingRule {
    enum class Kind { never, node_set, barrier_touch };
    Kind kind = Kind::never;
    // node_set: bit per interior node, level-major; nodes beyond bit 63 never
    // stop (subset rules are an enumeration device for small trees).
    std::uint64_t node_mask = 0;
    std::vector<std::uint8_t> touch; // barrier_touch: [interior_index * mode_count + mode]
    int mode_count = 1;

    bool stops(const Lattice& lat, int level, int node, Mode mode) const;

    static StoppingRule never_stop();
    static StoppingRule from_mask(std::uint64_t mask);
};

// Level-major linear index of an interior node, shared by strategy codes,
// rule masks and barrier-touch tables.
int interior_index(const Lattice& lat, int level, int node);

// Value process of one switched run: U[mode][level][node] is the value at the
// node when running that mode from there (any switch on arrival already
// resolved), V its martingale integrand, dL the one-step reflection increment
// at the mode's upper barrier.
struct SwitchedSolution {
    Surface U, V, dL;
    double root_value = 0.0; // arrival value at the root in initial_mode
    Mode initial_mode = 0;
};

// Backward evaluation of the strategy on a full tree: terminal data, switch
// costs applied to child arrival values, driver step in the running mode,
// reflection at that mode's upper barrier.
SwitchedSolution evaluate_switched(const ProblemSpec& spec, const Lattice& tree,
                                   const SwitchingStrategy& strategy);

// Same recursion without reflection: where the rule stops (post-switch mode),
// the value freezes to that mode's upper barrier; at the terminal level the
// terminal data is paid regardless. Returns the root arrival value in
// strategy.initial_mode.
double evaluate_game(const ProblemSpec& spec, const Lattice& tree,
                     const SwitchingStrategy& strategy, const StoppingRule& rule);

// Reads the optimal policy off solver surfaces: switch where the value sits
// on its switching envelope (to the smallest arg-max mode), stop where it
// touches the upper barrier. tol absorbs projection noise; it must stay well
// below the problem's value gaps.
struct ExtractedPolicy {
    SwitchingStrategy strategy;
    StoppingRule rule;
};

ExtractedPolicy extract_optimal_strategy(const Solution& sol, const ProblemSpec& spec,
                                         const Lattice& lat, double tol = 1e-9);

struct OracleResult {
    Mode initial_mode = 0;
    double best_value = 0.0; // max over all feedback strategies of the switched value
    SwitchingStrategy best_strategy;
    // Game values over all (strategy, node-subset rule) pairs; NaN when games
    // were not enumerated.
    double minmax = 0.0;
    double maxmin = 0.0;
    StoppingRule minmax_rule;
    SwitchingStrategy maxmin_strategy;
    std::uint64_t strategy_count = 0;
    std::uint64_t rule_count = 0;
    std::uint64_t game_evaluations = 0;
};

// Exhaustive enumeration on the full tree of the given depth. The joint game
// enumeration requires mode_count * (2^depth - 1) <= 16 feedback states;
// strategies-only runs (include_games = false) accept up to 2^30 strategies.
OracleResult enumerate_oracle(const ProblemSpec& spec, int depth, Mode initial_mode,
                              bool include_games = true);

// Certifies solver surfaces against the enumeration: per initial mode, the
// root value must match the best switched value and the game value, the
// extracted policy must attain it, and the extracted pair must dominate every
// enumerated strategy on one side and every enumerated rule on the other.
struct VerificationReport {
    struct ModeDetail {
        Mode mode = 0;
        double y0 = 0.0;
        double best_value = 0.0;
        double minmax = 0.0;
        double maxmin = 0.0;
        double extracted_value = 0.0;   // switched value of the extracted strategy
        double worst_saddle_left = 0.0; // max_a U^{a,rule*} - U^{strat*,rule*}
        double worst_saddle_right = 0.0;// max_tau U^{strat*,rule*} - U^{strat*,tau}
    };

    bool pass = false;
    double tolerance = 0.0;
    double worst_gap = 0.0;
    std::string counterexample; // first failed check; empty on pass
    std::vector<ModeDetail> modes;
    std::uint64_t game_evaluations = 0;
};

VerificationReport verify_representation(const ProblemSpec& spec, int depth,
                                         const SolverOptions& opts);

} // namespace orbsde
