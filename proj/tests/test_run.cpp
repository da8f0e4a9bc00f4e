#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "orbsde/errors.hpp"
#include "orbsde/run.hpp"

namespace {

using namespace orbsde;
namespace fs = std::filesystem;
using nlohmann::json;

// Two-mode earn-or-idle problem; directory and variations injected through
// the override mechanism so the tests exercise it on every parse.
const char* kBaseConfig = R"({
  "problem": {
    "mode_count": 2,
    "horizon": 1.0,
    "generator": {"a": [1.0, 0.0], "b": [0.0, 0.0], "c": [0.0, 0.0]},
    "costs": {"k": [[0.0, 0.1], [0.1, 0.0]]},
    "upper_barriers": [10.0, 10.0],
    "terminals": [0.0, 0.0]
  },
  "lattice": {"N": 8, "kind": "recombining"},
  "tasks": ["solve", "residuals"]
})";

fs::path fresh_dir(const std::string& tag) {
    static int counter = 0;
    const fs::path dir =
        fs::temp_directory_path() / ("orbsde_run_tests" + std::to_string(++counter) + "_" + tag);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    EXPECT_TRUE(in.good()) << "missing file " << p;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string without_timestamp(std::string report) {
    const auto pos = report.find("\"generated_at\"");
    EXPECT_NE(pos, std::string::npos);
    const auto eol = report.find('\n', pos);
    report.erase(pos, eol - pos);
    return report;
}

// --- parsing ----------------------------------------------------------------

TEST(ParseConfig, MinimalConfigFillsDefaults) {
    const RunConfig cfg = parse_config(kBaseConfig);
    EXPECT_EQ(cfg.problem.mode_count, 2);
    EXPECT_EQ(cfg.steps, 8);
    EXPECT_EQ(cfg.kind, LatticeKind::recombining);
    EXPECT_EQ(cfg.backend, Backend::direct);
    EXPECT_EQ(cfg.options.tol_projection, 1e-12);
    EXPECT_EQ(cfg.options.picard_tol, 1e-10);
    EXPECT_EQ(cfg.options.picard_max_iters, 50);
    EXPECT_TRUE(cfg.output.csv);
    EXPECT_TRUE(cfg.output.json);
    EXPECT_TRUE(cfg.validation.ok());
    EXPECT_FALSE(cfg.validation.entries.empty());
    ASSERT_EQ(cfg.tasks.size(), 2u);
    EXPECT_EQ(cfg.tasks[0], Task::solve);
    EXPECT_EQ(cfg.tasks[1], Task::residuals);
}

TEST(ParseConfig, UnknownKeysAreNamedByPath) {
    try {
        parse_config(R"({"problem": {}, "lattice": {"N": 2}, "tasks": ["solve"], "extra": 1})");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("'extra'"), std::string::npos);
    }
    try {
        parse_config(kBaseConfig, {"problem.generator.d=[1,1]"});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("problem.generator.d"), std::string::npos);
    }
}

TEST(ParseConfig, RejectsMalformedPieces) {
    EXPECT_THROW(parse_config("not json at all"), ConfigError);
    EXPECT_THROW(parse_config("[1,2,3]"), ConfigError);
    EXPECT_THROW(parse_config(kBaseConfig, {"lattice.kind=hexagonal"}), ConfigError);
    EXPECT_THROW(parse_config(kBaseConfig, {"solver.backend=magic"}), ConfigError);
    EXPECT_THROW(parse_config(kBaseConfig, {"tasks=[\"solve\",\"solve\"]"}), ConfigError);
    EXPECT_THROW(parse_config(kBaseConfig, {"tasks=[\"fly\"]"}), ConfigError);
    EXPECT_THROW(parse_config(kBaseConfig, {"tasks=[]"}), ConfigError);
    EXPECT_THROW(parse_config(kBaseConfig, {"lattice.N=0"}), ConfigError);
    EXPECT_THROW(parse_config(kBaseConfig, {"problem.mode_count=0"}), ConfigError);
    // Wrong list lengths are schema errors, not validation findings.
    EXPECT_THROW(parse_config(kBaseConfig, {"problem.generator.b=[0.0]"}), ConfigError);
    EXPECT_THROW(parse_config(kBaseConfig, {"problem.costs.k=[[0,0.1]]"}), ConfigError);
    EXPECT_THROW(parse_config(kBaseConfig, {"output.formats=[\"yaml\"]"}), ConfigError);
}

TEST(ParseConfig, OverridesReachNestedFields) {
    const RunConfig cfg = parse_config(
        kBaseConfig, {"solver.backend=picard", "solver.picard_max_iters=7", "lattice.N=16",
                      "output.directory=/tmp/somewhere", "output.formats=[\"json\"]"});
    EXPECT_EQ(cfg.backend, Backend::picard);
    EXPECT_EQ(cfg.options.picard_max_iters, 7);
    EXPECT_EQ(cfg.steps, 16);
    EXPECT_EQ(cfg.output.directory, "/tmp/somewhere");
    EXPECT_FALSE(cfg.output.csv);
    EXPECT_TRUE(cfg.output.json);

    EXPECT_THROW(parse_config(kBaseConfig, {"no_equals_sign"}), ConfigError);
    EXPECT_THROW(parse_config(kBaseConfig, {"problem.horizon.deeper=1"}), ConfigError);
}

TEST(ParseConfig, FieldFormsParseAndEvaluate) {
    const std::string clipped = "{\"kind\":\"clipped_affine\",\"cap\":1.2,\"alpha\":1.0,\"beta\":0.1}";
    const RunConfig cfg = parse_config(
        kBaseConfig, {"problem.upper_barriers=[" + clipped + "," + clipped + "]"});
    // Clip must act on the affine part, not the other way around.
    EXPECT_EQ(cfg.problem.upper_barrier(0, 0.0, 0.0), 1.0);
    EXPECT_EQ(cfg.problem.upper_barrier(0, 0.0, 4.0), 1.2);
    EXPECT_EQ(cfg.problem.upper_barrier(1, 0.0, -5.0), 0.5);

    EXPECT_THROW(parse_config(kBaseConfig, {"problem.terminals=[{\"kind\":\"mystery\"},0.0]"}),
                 ConfigError);
    const RunConfig shorthand =
        parse_config(kBaseConfig, {"problem.generator.a=[{\"a0\":0.5,\"a1\":-0.25},0.0]"});
    EXPECT_EQ(shorthand.problem.generator.a[0](2.0), 0.5 + (-0.25) * 2.0);
    EXPECT_EQ(shorthand.problem.generator.a[1](2.0), 0.0);
}

TEST(ParseConfig, HypothesisValidationFailureIsRejected) {
    try {
        parse_config(kBaseConfig, {"problem.terminals=[20.0, 0.0]"}); // above the barrier
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("validation"), std::string::npos);
    }
    // Negative switching costs violate positivity.
    EXPECT_THROW(parse_config(kBaseConfig, {"problem.costs.k=[[0.0,-0.1],[0.1,0.0]]"}),
                 ConfigError);
}

TEST(ParseConfig, MissingFileIsAConfigError) {
    EXPECT_THROW(parse_config_file("/nonexistent/path/cfg.json"), ConfigError);
}

TEST(RunConfigCheck, CrossFieldRules) {
    RunConfig cfg;
    cfg.problem = fixtures::earn_or_idle();
    cfg.steps = 4;
    cfg.tasks = {Task::solve};
    EXPECT_NO_THROW(cfg.check());

    RunConfig bad = cfg;
    bad.tasks = {Task::verify_representation};
    EXPECT_THROW(bad.check(), ConfigError); // needs a full tree
    bad.kind = LatticeKind::full_tree;
    EXPECT_NO_THROW(bad.check());

    bad = cfg;
    bad.tasks = {Task::penalty_sweep};
    EXPECT_THROW(bad.check(), ConfigError); // needs an n_pen grid
    bad.n_pen = {16.0, -1.0};
    EXPECT_THROW(bad.check(), ConfigError);
    bad.n_pen = {16.0, 64.0};
    EXPECT_NO_THROW(bad.check());

    bad = cfg;
    bad.backend = Backend::penalty_oblique;
    GeneralCosts gen;
    gen.h.assign(2, std::vector<GeneralCosts::Fn>(2));
    gen.h[0][1] = [](double, double y) { return y - 0.1; };
    gen.h[1][0] = [](double, double y) { return y - 0.1; };
    bad.problem.costs = gen;
    EXPECT_THROW(bad.check(), ConfigError);

    bad = cfg;
    bad.tasks.clear();
    EXPECT_THROW(bad.check(), ConfigError);
    bad = cfg;
    bad.steps = 0;
    EXPECT_THROW(bad.check(), ConfigError);
}

// --- running ------------------------------------------------------------------

TEST(Run, SolveRoundTripAndDeterminism) {
    const fs::path dir_a = fresh_dir("solve_a");
    const fs::path dir_b = fresh_dir("solve_b");
    const RunConfig cfg_a = parse_config(kBaseConfig, {"output.directory=" + dir_a.string()});
    const RunConfig cfg_b = parse_config(kBaseConfig, {"output.directory=" + dir_b.string()});
    const RunArtifacts art_a = run(cfg_a);
    const RunArtifacts art_b = run(cfg_b);

    ASSERT_EQ(art_a.files.size(), 2u);
    EXPECT_TRUE(fs::exists(dir_a / "surfaces.csv"));
    EXPECT_TRUE(fs::exists(dir_a / "report.json"));

    // Artifacts are byte-identical across runs, up to the header timestamp.
    EXPECT_EQ(slurp(dir_a / "surfaces.csv"), slurp(dir_b / "surfaces.csv"));
    EXPECT_EQ(without_timestamp(art_a.report_json), without_timestamp(art_b.report_json));
    EXPECT_EQ(slurp(dir_a / "report.json"), art_a.report_json);

    // The written surfaces reload to the solver output bit for bit.
    const Lattice lat = build_lattice(cfg_a.problem.horizon, cfg_a.steps, cfg_a.kind);
    const Solution sol = solve_direct(cfg_a.problem, lat, cfg_a.options);
    const LoadedSurfaces loaded = load_surfaces_csv((dir_a / "surfaces.csv").string());
    ASSERT_EQ(loaded.Y.size(), 2u);
    for (Mode i = 0; i < 2; ++i)
        for (int n = 0; n < lat.levels(); ++n)
            for (int idx = 0; idx < lat.node_count(n); ++idx) {
                EXPECT_EQ(loaded.Y[i][n][idx], sol.Y[i][n][idx]);
                EXPECT_EQ(loaded.Z[i][n][idx], sol.Z[i][n][idx]);
                EXPECT_EQ(loaded.dKp[i][n][idx], sol.dKp[i][n][idx]);
                EXPECT_EQ(loaded.dKm[i][n][idx], sol.dKm[i][n][idx]);
            }

    const json report = json::parse(art_a.report_json);
    EXPECT_EQ(report.at("header").at("backend"), "direct");
    EXPECT_EQ(report.at("solve").at("root_values").at(0).get<double>(), sol.value_at_root(0));
    EXPECT_EQ(report.at("solve").at("root_values").at(1).get<double>(), sol.value_at_root(1));
    EXPECT_EQ(report.at("residuals").at("upper").at(0).get<double>(), 0.0);
    EXPECT_EQ(report.at("residuals").at("lower").at(1).get<double>(), 0.0);
    EXPECT_TRUE(report.at("validation").at("ok").get<bool>());
}

TEST(Run, CsvOnlyFormatsSuppressReportFile) {
    const fs::path dir = fresh_dir("csv_only");
    const RunConfig cfg = parse_config(
        kBaseConfig, {"output.directory=" + dir.string(), "output.formats=[\"csv\"]"});
    const RunArtifacts art = run(cfg);
    EXPECT_TRUE(fs::exists(dir / "surfaces.csv"));
    EXPECT_FALSE(fs::exists(dir / "report.json"));
    EXPECT_FALSE(art.report_json.empty()); // the document is still assembled
}

TEST(Run, PenaltySweepTableConvergesTowardDirectSolve) {
    const fs::path dir = fresh_dir("sweep");
    RunConfig cfg;
    cfg.problem = fixtures::capped_accrual();
    cfg.steps = 64;
    cfg.tasks = {Task::penalty_sweep};
    cfg.n_pen = {16.0, 256.0, 4096.0};
    cfg.output.directory = dir.string();
    const RunArtifacts art = run(cfg);

    const std::string csv = slurp(dir / "sweep.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "n_pen,sup_gap,Y0_mode0");

    const json report = json::parse(art.report_json);
    const json& rows = report.at("penalty_sweep").at("rows");
    ASSERT_EQ(rows.size(), 3u);
    double prev_gap = std::numeric_limits<double>::infinity();
    for (const json& row : rows) {
        const double gap = row.at("sup_gap").get<double>();
        EXPECT_LT(gap, prev_gap);
        prev_gap = gap;
        EXPECT_GE(row.at("root_values").at(0).get<double>(), 0.5); // approach from above
    }
    EXPECT_LE(prev_gap, 5e-3);
    EXPECT_EQ(report.at("penalty_sweep").at("backend"), "penalty_upper");
}

TEST(Run, PenaltySweepDefaultsToObliqueBackendOnCoupledProblems) {
    const fs::path dir = fresh_dir("sweep_oblique");
    const RunConfig cfg = parse_config(
        kBaseConfig, {"output.directory=" + dir.string(), "tasks=[\"penalty_sweep\"]",
                      "solver.n_pen=[16, 4096]", "output.formats=[\"json\"]"});
    const RunArtifacts art = run(cfg);
    const json sweep = json::parse(art.report_json).at("penalty_sweep");
    EXPECT_EQ(sweep.at("backend"), "penalty_oblique");
    const json& rows = sweep.at("rows");
    ASSERT_EQ(rows.size(), 2u);
    // The coupled relaxation actually converges: the idle mode approaches the
    // switching envelope value instead of staying decoupled at zero.
    EXPECT_LT(rows.at(1).at("sup_gap").get<double>(), rows.at(0).at("sup_gap").get<double>());
    EXPECT_NEAR(rows.at(1).at("root_values").at(1).get<double>(), 0.9, 5e-3);
}

TEST(Run, PicardTraceSectionRecordsMonotoneIterates) {
    const fs::path dir = fresh_dir("picard");
    const RunConfig cfg = parse_config(
        kBaseConfig, {"output.directory=" + dir.string(), "tasks=[\"picard_trace\"]",
                      "output.formats=[\"json\"]"});
    const RunArtifacts art = run(cfg);
    const json trace = json::parse(art.report_json).at("picard_trace");
    EXPECT_EQ(trace.at("iterations").get<int>(), 2);
    ASSERT_EQ(trace.at("deltas").size(), 2u);
    EXPECT_EQ(trace.at("deltas").at(0).get<double>(), 1.0 - 0.1);
    EXPECT_EQ(trace.at("deltas").at(1).get<double>(), 0.0);
    EXPECT_TRUE(trace.at("monotone").get<bool>());
    EXPECT_EQ(trace.at("worst_decrease").get<double>(), 0.0);
    EXPECT_EQ(trace.at("root_values").at(1).get<double>(), 1.0 - 0.1);
}

TEST(Run, VerificationTaskPassesOnCertifiableProblem) {
    const fs::path dir = fresh_dir("verify_ok");
    const RunConfig cfg = parse_config(
        kBaseConfig,
        {"output.directory=" + dir.string(), "tasks=[\"verify_representation\"]",
         "lattice.kind=full_tree", "lattice.N=3"});
    const RunArtifacts art = run(cfg);
    const json section = json::parse(art.report_json).at("verify_representation");
    EXPECT_TRUE(section.at("pass").get<bool>());
    EXPECT_EQ(section.at("game_evaluations").get<std::uint64_t>(), 16384u * 128u);
    EXPECT_EQ(section.at("modes").size(), 2u);
    EXPECT_FALSE(fs::exists(dir / "failure_report.json"));
}

TEST(Run, VerificationFailureWritesFailureReportAndThrows) {
    const fs::path dir = fresh_dir("verify_fail");
    const RunConfig cfg = parse_config(
        kBaseConfig,
        {"output.directory=" + dir.string(), "tasks=[\"verify_representation\"]",
         "lattice.kind=full_tree", "lattice.N=3",
         "problem.upper_barriers=[0.4, 0.4]"});
    EXPECT_THROW(run(cfg), RepresentationError);

    // The full report and the structured failure report are both on disk.
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    const json failure = json::parse(slurp(dir / "failure_report.json"));
    EXPECT_EQ(failure.at("error_type"), "RepresentationError");
    EXPECT_EQ(failure.at("exit_status").get<int>(), 4);
    const json section = json::parse(slurp(dir / "report.json")).at("verify_representation");
    EXPECT_FALSE(section.at("pass").get<bool>());
    EXPECT_NE(section.at("counterexample").get<std::string>().find("min-max"),
              std::string::npos);
}

TEST(Run, SolverFailureWritesFailureReportAndRethrows) {
    const fs::path dir = fresh_dir("nonconv");
    RunConfig cfg;
    cfg.problem = fixtures::earn_or_idle();
    cfg.steps = 8;
    cfg.tasks = {Task::picard_trace};
    cfg.options.picard_max_iters = 1;
    cfg.output.directory = dir.string();
    EXPECT_THROW(run(cfg), NonConvergenceError);
    const json failure = json::parse(slurp(dir / "failure_report.json"));
    EXPECT_EQ(failure.at("error_type"), "NonConvergenceError");
    EXPECT_EQ(failure.at("exit_status").get<int>(), 3);
}

TEST(Run, ExitStatusMapping) {
    EXPECT_EQ(exit_status_for(ConfigError("x")), 2);
    EXPECT_EQ(exit_status_for(NonConvergenceError("x")), 3);
    EXPECT_EQ(exit_status_for(ContractionError("x")), 3);
    EXPECT_EQ(exit_status_for(RepresentationError("x")), 4);
    EXPECT_EQ(exit_status_for(std::runtime_error("x")), 1);
}

// --- surface tables --------------------------------------------------------------

TEST(SurfacesCsv, GoldenSingleStepTable) {
    const ProblemSpec spec = fixtures::capped_accrual();
    const Lattice lat = build_lattice(spec.horizon, 1, LatticeKind::recombining);
    const Solution sol = solve_direct(spec, lat, SolverOptions{});
    const std::string csv = format_surfaces_csv(sol, lat);
    EXPECT_EQ(csv,
              "level,node_index,w,mode,Y,Z,dK_plus,dK_minus\n"
              "0,0,0,0,0.5,0,0,0.5\n"
              "1,0,-1,0,0,0,0,0\n"
              "1,1,1,0,0,0,0,0\n");

    const LoadedSurfaces loaded = parse_surfaces_csv(csv);
    EXPECT_EQ(loaded.Y[0][0][0], 0.5);
    EXPECT_EQ(loaded.dKm[0][0][0], 0.5);
    EXPECT_EQ(loaded.Y[0][1][1], 0.0);
}

TEST(SurfacesCsv, SeventeenDigitsRoundTripExactly) {
    const ProblemSpec spec = fixtures::martingale_case();
    const Lattice lat = build_lattice(spec.horizon, 6, LatticeKind::recombining);
    const Solution sol = solve_direct(spec, lat, SolverOptions{});
    const LoadedSurfaces loaded = parse_surfaces_csv(format_surfaces_csv(sol, lat));
    for (int n = 0; n < lat.levels(); ++n)
        for (int idx = 0; idx < lat.node_count(n); ++idx) {
            EXPECT_EQ(loaded.Y[0][n][idx], sol.Y[0][n][idx]);
            EXPECT_EQ(loaded.Z[0][n][idx], sol.Z[0][n][idx]);
        }
}

TEST(SurfacesCsv, LoaderRejectsMalformedTables) {
    EXPECT_THROW(parse_surfaces_csv(""), ConfigError);
    EXPECT_THROW(parse_surfaces_csv("wrong,header\n"), ConfigError);
    const std::string header = "level,node_index,w,mode,Y,Z,dK_plus,dK_minus\n";
    EXPECT_THROW(parse_surfaces_csv(header + "0,0,0,0,1\n"), ConfigError);
    EXPECT_THROW(parse_surfaces_csv(header + "0,0,zero,0,1,0,0,0\n"), ConfigError);
    EXPECT_THROW(parse_surfaces_csv(header + "0,0,0,0,1,0,0,0,9\n"), ConfigError);
    EXPECT_THROW(load_surfaces_csv("/nonexistent/surfaces.csv"), ConfigError);
}

} // namespace
