#pragma once

// Shared problem instances and randomized spec generators used across the
// test binaries. All generators are deterministic given the caller's RNG.

#include <algorithm>
#include <random>
#include <stdexcept>
#include <vector>

#include "orbsde/model.hpp"

namespace fixtures {

using orbsde::GeneratorSpec;
using orbsde::LinearCosts;
using orbsde::ProblemSpec;
using orbsde::ScalarField;

// Two modes, zero driver, zero terminal data, high barrier, cost 0.1:
// nothing to earn, so every value surface is identically zero.
inline ProblemSpec flat_two_mode() {
    ProblemSpec spec;
    spec.mode_count = 2;
    spec.horizon = 1.0;
    spec.generator = GeneratorSpec::zero(2);
    spec.costs = LinearCosts{{{0.0, 0.1}, {0.1, 0.0}}};
    spec.upper_barriers.assign(2, ScalarField::constant(1.0));
    spec.terminals.assign(2, ScalarField::constant(0.0));
    return spec;
}

// Two modes: mode 0 accrues at rate 1, mode 1 idles; switching costs 0.1.
// With the default high barrier, root values are exactly (T, T - 0.1).
inline ProblemSpec earn_or_idle(double barrier = 10.0) {
    ProblemSpec spec;
    spec.mode_count = 2;
    spec.horizon = 1.0;
    spec.generator = GeneratorSpec::rates({1.0, 0.0});
    spec.costs = LinearCosts{{{0.0, 0.1}, {0.1, 0.0}}};
    spec.upper_barriers.assign(2, ScalarField::constant(barrier));
    spec.terminals.assign(2, ScalarField::constant(0.0));
    return spec;
}

// One mode accruing at rate 1 against a low barrier 0.5: the upper
// reflection binds on the early half of the horizon.
inline ProblemSpec capped_accrual() {
    ProblemSpec spec;
    spec.mode_count = 1;
    spec.horizon = 1.0;
    spec.generator = GeneratorSpec::rates({1.0});
    spec.costs = LinearCosts{{{0.0}}};
    spec.upper_barriers.assign(1, ScalarField::constant(0.5));
    spec.terminals.assign(1, ScalarField::constant(0.0));
    return spec;
}

// One mode, zero driver, terminal g(w) = w, barrier w + 5: the value is the
// state itself and the martingale integrand is 1 everywhere.
inline ProblemSpec martingale_case() {
    ProblemSpec spec;
    spec.mode_count = 1;
    spec.horizon = 1.0;
    spec.generator = GeneratorSpec::zero(1);
    spec.costs = LinearCosts{{{0.0}}};
    spec.upper_barriers.assign(1, ScalarField::affine(5.0, 1.0));
    spec.terminals.assign(1, ScalarField::affine(0.0, 1.0));
    return spec;
}

// Three modes with descending rates (1, 0.5, 0) and uniform cost 0.1.
inline ProblemSpec three_mode_ladder() {
    ProblemSpec spec;
    spec.mode_count = 3;
    spec.horizon = 1.0;
    spec.generator = GeneratorSpec::rates({1.0, 0.5, 0.0});
    spec.costs = LinearCosts{{{0.0, 0.1, 0.1}, {0.1, 0.0, 0.1}, {0.1, 0.1, 0.0}}};
    spec.upper_barriers.assign(3, ScalarField::constant(10.0));
    spec.terminals.assign(3, ScalarField::constant(0.0));
    return spec;
}

// Random two-mode spec whose barrier sits strictly above every achievable
// value (constant rates in [-1, 1], affine terminals bounded by ~1.4 on the
// tree, shared barrier level in [2.5, 5]): the upper reflection never binds,
// and the spec is rejection-sampled until hypothesis validation passes.
inline ProblemSpec random_nonbinding_spec(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> rate(-1.0, 1.0);
    std::uniform_real_distribution<double> coeff(-0.5, 0.5);
    std::uniform_real_distribution<double> cost(0.05, 0.5);
    std::uniform_real_distribution<double> barrier(2.5, 5.0);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        ProblemSpec spec;
        spec.mode_count = 2;
        spec.horizon = 1.0;
        spec.generator = GeneratorSpec::rates({rate(rng), rate(rng)});
        spec.costs = LinearCosts{{{0.0, cost(rng)}, {cost(rng), 0.0}}};
        spec.upper_barriers.assign(2, ScalarField::constant(barrier(rng)));
        spec.terminals = {ScalarField::affine(coeff(rng), coeff(rng)),
                          ScalarField::affine(coeff(rng), coeff(rng))};
        if (orbsde::validate_hypotheses(spec, orbsde::GridSpec{}).ok()) return spec;
    }
    throw std::logic_error("random_nonbinding_spec: rejection sampling exhausted");
}

// Random coupled spec with drift/volatility coefficients and a possibly
// binding barrier. Construction keeps the terminals inside the switching
// region and strictly below the barrier, so validation always passes (and is
// asserted).
inline ProblemSpec random_coupled_spec(std::mt19937_64& rng, int mode_count) {
    std::uniform_real_distribution<double> rate(-1.0, 1.0);
    std::uniform_real_distribution<double> slope(-0.5, 0.5);
    std::uniform_real_distribution<double> yz(-0.5, 0.5);
    std::uniform_real_distribution<double> cost(0.05, 0.5);
    std::uniform_real_distribution<double> barrier(1.2, 3.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    ProblemSpec spec;
    const int m = mode_count;
    spec.mode_count = m;
    spec.horizon = 1.0;
    spec.generator.a.clear();
    for (int i = 0; i < m; ++i)
        spec.generator.a.push_back(orbsde::TimeAffine{rate(rng), slope(rng)});
    spec.generator.b.resize(m);
    spec.generator.c.resize(m);
    for (int i = 0; i < m; ++i) spec.generator.b[i] = yz(rng);
    for (int i = 0; i < m; ++i) spec.generator.c[i] = yz(rng);

    LinearCosts lin;
    lin.k.assign(m, std::vector<double>(m, 0.0));
    double k_min = 0.5;
    // Costs in [0.3, 0.5]: any two of them sum above 0.6 > 0.5, so the strict
    // triangle inequality holds by construction.
    std::uniform_real_distribution<double> tight_cost(0.3, 0.5);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (i != j) {
                lin.k[i][j] = tight_cost(rng);
                k_min = std::min(k_min, lin.k[i][j]);
            }
    spec.costs = lin;

    spec.upper_barriers.assign(m, ScalarField::constant(barrier(rng)));

    // Shared small slope and per-mode intercepts within k_min of each other
    // keep g inside the region; |g| <= 0.4 + 5 * 0.1 = 0.9 < 1.2 <= S keeps
    // it below the barrier on the validation box.
    const double shared_beta = 0.1 * unit(rng);
    const double alpha0 = 0.4 * unit(rng);
    spec.terminals.clear();
    for (int i = 0; i < m; ++i) {
        const double alpha = alpha0 + 0.45 * k_min * unit(rng);
        spec.terminals.push_back(ScalarField::affine(alpha, shared_beta));
    }
    if (!orbsde::validate_hypotheses(spec, orbsde::GridSpec{}).ok())
        throw std::logic_error("random_coupled_spec: constructed spec failed validation");
    return spec;
}

} // namespace fixtures
