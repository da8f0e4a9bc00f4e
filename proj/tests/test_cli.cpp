#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#ifndef TOOL_PATH
#error "TOOL_PATH must point at the CLI binary"
#endif

namespace {

namespace fs = std::filesystem;

struct CliResult {
    int status = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path fresh_dir(const std::string& tag) {
    static int counter = 0;
    const fs::path dir =
        fs::temp_directory_path() / ("orbsde_cli_tests" + std::to_string(++counter) + "_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Runs the CLI with the given argument string, capturing exit status and both
// streams. Arguments must already be shell-quoted where needed.
CliResult cli(const fs::path& workdir, const std::string& args) {
    const fs::path out = workdir / "stdout.txt";
    const fs::path err = workdir / "stderr.txt";
    const std::string command = std::string(TOOL_PATH) + " " + args + " > '" + out.string() +
                                "' 2> '" + err.string() + "'";
    const int raw = std::system(command.c_str());
    CliResult res;
    res.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    res.out = slurp(out);
    res.err = slurp(err);
    return res;
}

fs::path write_base_config(const fs::path& dir) {
    const fs::path path = dir / "problem.json";
    std::ofstream cfg(path);
    cfg << R"({
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
    return path;
}

TEST(Cli, SolveWritesArtifactsAndReportsThem) {
    const fs::path dir = fresh_dir("solve");
    const fs::path cfg = write_base_config(dir);
    const fs::path out = dir / "artifacts";
    const CliResult res = cli(dir, "solve '" + cfg.string() + "' --out '" + out.string() + "'");
    EXPECT_EQ(res.status, 0) << res.err;
    EXPECT_NE(res.out.find("surfaces.csv"), std::string::npos);
    EXPECT_NE(res.out.find("report.json"), std::string::npos);
    EXPECT_TRUE(fs::exists(out / "surfaces.csv"));
    EXPECT_TRUE(fs::exists(out / "report.json"));
}

TEST(Cli, VerifySucceedsOnCertifiableProblem) {
    const fs::path dir = fresh_dir("verify");
    const fs::path cfg = write_base_config(dir);
    const fs::path out = dir / "artifacts";
    const CliResult res =
        cli(dir, "verify '" + cfg.string() + "' --out '" + out.string() +
                 "' --override lattice.kind=full_tree --override lattice.N=3");
    EXPECT_EQ(res.status, 0) << res.err;
    EXPECT_NE(res.out.find("verify_representation: PASS"), std::string::npos);
    EXPECT_TRUE(fs::exists(out / "report.json"));
}

TEST(Cli, VerifyFailureExitsWithRepresentationStatus) {
    const fs::path dir = fresh_dir("verify_fail");
    const fs::path cfg = write_base_config(dir);
    const fs::path out = dir / "artifacts";
    const CliResult res =
        cli(dir, "verify '" + cfg.string() + "' --out '" + out.string() +
                 "' --override lattice.kind=full_tree --override lattice.N=3"
                 " --override 'problem.upper_barriers=[0.4, 0.4]'");
    EXPECT_EQ(res.status, 4);
    EXPECT_EQ(res.out.find("PASS"), std::string::npos);
    EXPECT_NE(res.err.find("error:"), std::string::npos);
    EXPECT_TRUE(fs::exists(out / "failure_report.json"));
}

TEST(Cli, SweepWritesTable) {
    const fs::path dir = fresh_dir("sweep");
    const fs::path cfg = write_base_config(dir);
    const fs::path out = dir / "artifacts";
    const CliResult res =
        cli(dir, "sweep '" + cfg.string() + "' --npen 16,256 --out '" + out.string() + "'");
    EXPECT_EQ(res.status, 0) << res.err;
    ASSERT_TRUE(fs::exists(out / "sweep.csv"));
    const std::string table = slurp(out / "sweep.csv");
    EXPECT_EQ(table.substr(0, table.find('\n')), "n_pen,sup_gap,Y0_mode0,Y0_mode1");
}

TEST(Cli, UnknownConfigKeyExitsTwo) {
    const fs::path dir = fresh_dir("badkey");
    const fs::path cfg = write_base_config(dir);
    const CliResult res = cli(dir, "solve '" + cfg.string() + "' --override solver.bogus=1");
    EXPECT_EQ(res.status, 2);
    EXPECT_NE(res.err.find("solver.bogus"), std::string::npos);
}

TEST(Cli, MissingConfigExitsTwo) {
    const fs::path dir = fresh_dir("missing");
    const CliResult res = cli(dir, "solve /nonexistent/problem.json");
    EXPECT_EQ(res.status, 2);
    EXPECT_NE(res.err.find("error:"), std::string::npos);
}

TEST(Cli, NonConvergenceExitsThree) {
    const fs::path dir = fresh_dir("nonconv");
    const fs::path cfg = write_base_config(dir);
    const fs::path out = dir / "artifacts";
    const CliResult res =
        cli(dir, "solve '" + cfg.string() + "' --out '" + out.string() +
                 "' --override solver.backend=picard --override solver.picard_max_iters=1"
                 " --override 'tasks=[\"solve\"]'");
    EXPECT_EQ(res.status, 3);
    EXPECT_TRUE(fs::exists(out / "failure_report.json"));
}

TEST(Cli, RequiresASubcommand) {
    const fs::path dir = fresh_dir("usage");
    const CliResult res = cli(dir, "");
    EXPECT_NE(res.status, 0);
}

} // namespace
