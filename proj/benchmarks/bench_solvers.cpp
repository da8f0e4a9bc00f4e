// Microbenchmarks for the solver hot paths: backward induction over lattice
// size, the oblique projection over mode count, the penalty backends, and the
// exhaustive enumeration used by the certification layer.

#include <benchmark/benchmark.h>

#include <vector>

#include "orbsde/lattice.hpp"
#include "orbsde/model.hpp"
#include "orbsde/solvers.hpp"
#include "orbsde/switching.hpp"

namespace {

using namespace orbsde;

// Two modes: earn at rate 1 or idle, switch cost 0.1, high barrier.
ProblemSpec earn_or_idle() {
    ProblemSpec spec;
    spec.mode_count = 2;
    spec.horizon = 1.0;
    spec.generator = GeneratorSpec::rates({1.0, 0.0});
    spec.costs = LinearCosts{{{0.0, 0.1}, {0.1, 0.0}}};
    spec.upper_barriers.assign(2, ScalarField::constant(10.0));
    spec.terminals.assign(2, ScalarField::constant(0.0));
    return spec;
}

// m modes with descending rates and uniform switch cost 0.1.
ProblemSpec mode_ladder(int m) {
    ProblemSpec spec;
    spec.mode_count = m;
    spec.horizon = 1.0;
    std::vector<double> rates(m);
    for (int i = 0; i < m; ++i) rates[i] = 1.0 - static_cast<double>(i) / m;
    spec.generator = GeneratorSpec::rates(rates);
    LinearCosts lin;
    lin.k.assign(m, std::vector<double>(m, 0.1));
    for (int i = 0; i < m; ++i) lin.k[i][i] = 0.0;
    spec.costs = lin;
    spec.upper_barriers.assign(m, ScalarField::constant(10.0));
    spec.terminals.assign(m, ScalarField::constant(0.0));
    return spec;
}

void BM_SolveDirect(benchmark::State& state) {
    const ProblemSpec spec = earn_or_idle();
    const Lattice lat = build_lattice(spec.horizon, static_cast<int>(state.range(0)),
                                      LatticeKind::recombining);
    const SolverOptions opts;
    for (auto _ : state) benchmark::DoNotOptimize(solve_direct(spec, lat, opts));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SolveDirect)->Arg(32)->Arg(64)->Arg(128)->Arg(256)->Complexity();

void BM_ObliqueProject(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    const ProblemSpec spec = mode_ladder(m);
    const SolverOptions opts;
    std::vector<double> ybar(m);
    for (int i = 0; i < m; ++i) ybar[i] = (i % 2 == 0) ? -1.0 : 11.0;
    for (auto _ : state) benchmark::DoNotOptimize(oblique_project(ybar, 0.5, 0.0, spec, opts));
}
BENCHMARK(BM_ObliqueProject)->Arg(2)->Arg(4)->Arg(8);

void BM_PenaltyOblique(benchmark::State& state) {
    const ProblemSpec spec = earn_or_idle();
    const Lattice lat = build_lattice(spec.horizon, 64, LatticeKind::recombining);
    const SolverOptions opts;
    const double n_pen = static_cast<double>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(solve_penalty_oblique(spec, lat, opts, n_pen));
}
BENCHMARK(BM_PenaltyOblique)->Arg(16)->Arg(4096);

void BM_Picard(benchmark::State& state) {
    const ProblemSpec spec = earn_or_idle();
    const Lattice lat = build_lattice(spec.horizon, static_cast<int>(state.range(0)),
                                      LatticeKind::recombining);
    const SolverOptions opts;
    for (auto _ : state) benchmark::DoNotOptimize(solve_picard(spec, lat, opts));
}
BENCHMARK(BM_Picard)->Arg(32)->Arg(128);

void BM_EvaluateGame(benchmark::State& state) {
    const ProblemSpec spec = earn_or_idle();
    const Lattice tree = build_lattice(spec.horizon, 3, LatticeKind::full_tree);
    const SwitchingStrategy stay = SwitchingStrategy::stay(tree, spec.mode_count, 0);
    const StoppingRule rule = StoppingRule::from_mask(0x15);
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_game(spec, tree, stay, rule));
}
BENCHMARK(BM_EvaluateGame);

void BM_EnumerateStrategies(benchmark::State& state) {
    const ProblemSpec spec = earn_or_idle();
    for (auto _ : state)
        benchmark::DoNotOptimize(enumerate_oracle(spec, static_cast<int>(state.range(0)), 0,
                                                  /*include_games=*/false));
}
BENCHMARK(BM_EnumerateStrategies)->Arg(2)->Arg(3);

} // namespace

BENCHMARK_MAIN();
