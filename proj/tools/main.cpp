#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "orbsde/errors.hpp"
#include "orbsde/run.hpp"

namespace {

enum class Command { solve, verify, sweep };

int execute(Command cmd, const std::string& config_path, const std::string& out_dir,
            std::vector<std::string> overrides, const std::string& npen_csv) {
    try {
        if (cmd == Command::verify) overrides.push_back("tasks=[\"verify_representation\"]");
        if (cmd == Command::sweep) {
            overrides.push_back("tasks=[\"penalty_sweep\"]");
            overrides.push_back("solver.n_pen=[" + npen_csv + "]");
        }
        orbsde::RunConfig cfg = orbsde::parse_config_file(config_path, overrides);
        if (!out_dir.empty()) cfg.output.directory = out_dir;
        const orbsde::RunArtifacts art = orbsde::run(cfg);
        for (const std::string& f : art.files) std::printf("wrote %s\n", f.c_str());
        if (cmd == Command::verify) std::printf("verify_representation: PASS\n");
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return orbsde::exit_status_for(e);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Obliquely reflected switching solver"};
    app.require_subcommand(1);

    std::string config_path, out_dir, npen_csv;
    std::vector<std::string> overrides;

    CLI::App* solve = app.add_subcommand("solve", "run the tasks configured in a problem file");
    solve->add_option("config", config_path, "problem config (JSON)")->required();
    solve->add_option("--out", out_dir, "output directory (overrides config)");
    solve->add_option("--override", overrides, "dotted-path config override, key.path=value");

    CLI::App* verify = app.add_subcommand("verify", "certify the solve against exhaustive enumeration");
    verify->add_option("config", config_path, "problem config (JSON)")->required();
    verify->add_option("--out", out_dir, "output directory (overrides config)");
    verify->add_option("--override", overrides, "dotted-path config override, key.path=value");

    CLI::App* sweep = app.add_subcommand("sweep", "penalty convergence sweep over n_pen values");
    sweep->add_option("config", config_path, "problem config (JSON)")->required();
    sweep->add_option("--npen", npen_csv, "comma-separated penalty parameters")->required();
    sweep->add_option("--out", out_dir, "output directory (overrides config)");
    sweep->add_option("--override", overrides, "dotted-path config override, key.path=value");

    CLI11_PARSE(app, argc, argv);

    Command cmd = Command::solve;
    if (verify->parsed()) cmd = Command::verify;
    if (sweep->parsed()) cmd = Command::sweep;
    return execute(cmd, config_path, out_dir, overrides, npen_csv);
}
