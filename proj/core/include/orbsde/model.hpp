#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace orbsde {

using Mode = int;

// Scalar field over (t, w) in one of three declared forms. The forms are
// t-independent; t stays in the call signature so richer forms can be added
// without touching call sites.
struct ScalarField {
    enum class Kind { constant, affine, clipped_affine };

    Kind kind = Kind::constant;
    double value = 0.0; // constant
    double alpha = 0.0; // affine part: alpha + beta * w
    double beta = 0.0;
    double cap = 0.0;   // clipped_affine: min(cap, alpha + beta * w)

    double operator()(double t, double w) const;

    static ScalarField constant(double c);
    static ScalarField affine(double alpha, double beta);
    static ScalarField clipped_affine(double cap, double alpha, double beta);
};

// Generator intercept as a function of time: a0 + a1 * t. Affine in t keeps
// the intercept bounded on [0, T] and serializable.
struct TimeAffine {
    double a0 = 0.0;
    double a1 = 0.0;

    double operator()(double t) const { return a0 + a1 * t; }

    static TimeAffine constant(double c) { return TimeAffine{c, 0.0}; }
};

// Per-mode affine driver psi(t, y, z, i) = a[i](t) + b[i]*y + c[i]*z.
struct GeneratorSpec {
    std::vector<TimeAffine> a;
    std::vector<double> b;
    std::vector<double> c;

    double eval(double t, double y, double z, Mode i) const {
        return a[i](t) + b[i] * y + c[i] * z;
    }

    // max_i(|b_i| + |c_i|), the driver's Lipschitz constant in (y, z).
    double lipschitz() const;

    static GeneratorSpec zero(int mode_count);
    // b = c = 0, constant per-mode rates.
    static GeneratorSpec rates(std::vector<double> per_mode_rates);
};

// Switching from i to j transforms a value y into y - k(i, j).
struct LinearCosts {
    std::vector<std::vector<double>> k;
};

// Programmatic cost family h[i][j](t, y), defined for i != j. Callers declare
// that every h is nondecreasing in y; validation samples the claim.
struct GeneralCosts {
    using Fn = std::function<double(double t, double y)>;
    std::vector<std::vector<Fn>> h;
    bool declared_nondecreasing = true;
};

using CostSpec = std::variant<LinearCosts, GeneralCosts>;

// h_{i,j}(t, y): the value retained after switching from mode i to mode j.
// i == j is rejected; a self-switch has no cost application.
double eval_h(const CostSpec& costs, Mode i, Mode j, double t, double y);

struct ProblemSpec {
    int mode_count = 0;
    double horizon = 0.0;
    GeneratorSpec generator;
    CostSpec costs = LinearCosts{};
    std::vector<ScalarField> upper_barriers; // S_i(t, w)
    std::vector<ScalarField> terminals;      // g_i(w), evaluated at (horizon, w)
    // Downgrades a strict-triangle violation that still holds non-strictly to
    // a warning. Uniqueness of the solution is no longer guaranteed then.
    bool allow_nonstrict_costs = false;

    double upper_barrier(Mode i, double t, double w) const { return upper_barriers[i](t, w); }
    double terminal(Mode i, double w) const { return terminals[i](horizon, w); }
};

// max_{j != i} h_{i,j}(t, y[j]): the oblique lower barrier seen by mode i.
// Returns -infinity when mode_count == 1 (no coupling).
double lower_envelope(const ProblemSpec& spec, Mode i, double t, const std::vector<double>& y);

// Sample grid for the hypothesis checks that quantify over continuous data:
// t_points equispaced times in [0, horizon], y_points equispaced values in
// [y_min, y_max] used for both y and w sampling.
struct GridSpec {
    int t_points = 21;
    int y_points = 41;
    double y_min = -5.0;
    double y_max = 5.0;
};

struct ValidationEntry {
    std::string clause;  // stable identifier, e.g. "costs.strict_triangle"
    bool pass = true;
    bool warning = false; // strict-triangle downgrade under allow_nonstrict_costs
    std::string witness;  // point at which the inequality failed; empty on pass
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;
    std::string grid_description;

    // True when no entry failed hard (warnings allowed).
    bool ok() const;
    std::string summary() const;
};

// Throws ConfigError on structural malformation: wrong list lengths, missing
// callables, non-finite parameters, nonpositive horizon.
void check_problem_structure(const ProblemSpec& spec);

// Checks the standing assumptions on the data: cost positivity and the strict
// triangle inequality (exact, all index triples) for linear costs; sampled
// monotonicity, h <= y and chain-domination for general costs; sampled
// region membership of the barriers and terminals. Structural malformation
// throws ConfigError (via check_problem_structure) instead of producing a
// fail entry.
ValidationReport validate_hypotheses(const ProblemSpec& spec, const GridSpec& grid);

} // namespace orbsde
