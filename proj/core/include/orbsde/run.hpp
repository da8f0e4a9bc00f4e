#pragma once

#include <string>
#include <vector>

#include "orbsde/lattice.hpp"
#include "orbsde/model.hpp"
#include "orbsde/solvers.hpp"
#include "orbsde/switching.hpp"

namespace orbsde {

enum class Task { solve, residuals, verify_representation, penalty_sweep, picard_trace };

struct OutputSpec {
    std::string directory = ".";
    bool csv = true;  // surfaces / sweep tables
    bool json = true; // run report
};

// Fully typed run description. parse_config builds one from a JSON document
// (strict schema: unknown keys are errors naming their path) and attaches the
// hypothesis validation outcome; programmatic construction is also supported,
// in which case call check() before run().
struct RunConfig {
    ProblemSpec problem;
    GridSpec grid;
    int steps = 1;
    LatticeKind kind = LatticeKind::recombining;
    Backend backend = Backend::direct;
    SolverOptions options;
    std::vector<double> n_pen; // penalty_sweep grid
    std::vector<Task> tasks;
    OutputSpec output;
    ValidationReport validation;

    // Structural and cross-field checks (backend/cost compatibility, task
    // prerequisites). Throws ConfigError. Does not re-run hypothesis
    // validation.
    void check() const;
};

// Parses the JSON text, applies dotted-path overrides ("solver.backend=picard"),
// fills defaults, validates hypotheses on the declared grid and rejects the
// config if validation fails (warnings pass). Config costs are linear;
// general cost callables exist only on the library API.
RunConfig parse_config(const std::string& text,
                       const std::vector<std::string>& overrides = {});
RunConfig parse_config_file(const std::string& path,
                            const std::vector<std::string>& overrides = {});

struct RunArtifacts {
    std::vector<std::string> files; // paths written, in emission order
    std::string report_json;        // full report document, timestamp in header only
};

// Executes the configured tasks in a fixed order (solve, residuals,
// verify_representation, penalty_sweep, picard_trace), writing artifacts into
// output.directory. Identical configs produce byte-identical artifacts except
// the report's header timestamp. On a solver or verification failure a
// structured failure report is written before the typed error propagates.
RunArtifacts run(const RunConfig& config);

// Exit status a front-end should map an escaped error to: 0 success,
// 2 config/validation, 3 non-convergence, 4 representation failure.
int exit_status_for(const std::exception& err);

// Surface table serialization, lossless for doubles (17 significant digits).
// Rows ordered by (level, node_index, mode) ascending under the header
// level,node_index,w,mode,Y,Z,dK_plus,dK_minus.
std::string format_surfaces_csv(const Solution& sol, const Lattice& lat);

struct LoadedSurfaces {
    Surface Y, Z, dKp, dKm;
};

// Round-trip reader for format_surfaces_csv output.
LoadedSurfaces parse_surfaces_csv(const std::string& text);
LoadedSurfaces load_surfaces_csv(const std::string& path);

} // namespace orbsde
