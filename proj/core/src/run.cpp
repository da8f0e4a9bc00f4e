#include "orbsde/run.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <variant>

#include <nlohmann/json.hpp>

#include "orbsde/errors.hpp"

namespace orbsde {
namespace {

using json = nlohmann::ordered_json;

std::string fmt17(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string joined(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("config: unknown key '" + joined(path, it.key()) + "'");
    }
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

const json& require(const json& obj, const std::string& path, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError("config: missing key '" + joined(path, key) + "'");
    return *it;
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError("config: '" + path + "' must be a number");
    return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ConfigError("config: '" + path + "' must be an integer");
    return j.get<int>();
}

bool as_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) throw ConfigError("config: '" + path + "' must be a boolean");
    return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError("config: '" + path + "' must be a string");
    return j.get<std::string>();
}

const json& as_array(const json& j, const std::string& path, int expected = -1) {
    if (!j.is_array()) throw ConfigError("config: '" + path + "' must be an array");
    if (expected >= 0 && static_cast<int>(j.size()) != expected)
        throw ConfigError("config: '" + path + "' must have exactly " + std::to_string(expected) +
                          " entries");
    return j;
}

TimeAffine parse_time_affine(const json& j, const std::string& path) {
    if (j.is_number()) return TimeAffine::constant(j.get<double>());
    if (!j.is_object())
        throw ConfigError("config: '" + path + "' must be a number or an {a0, a1} object");
    check_keys(j, path, {"a0", "a1"});
    TimeAffine f;
    if (const json* a0 = find(j, "a0")) f.a0 = as_number(*a0, path + ".a0");
    if (const json* a1 = find(j, "a1")) f.a1 = as_number(*a1, path + ".a1");
    return f;
}

ScalarField parse_field(const json& j, const std::string& path) {
    if (j.is_number()) return ScalarField::constant(j.get<double>());
    if (!j.is_object())
        throw ConfigError("config: '" + path + "' must be a number or a field object");
    const std::string kind = as_string(require(j, path, "kind"), path + ".kind");
    if (kind == "constant") {
        check_keys(j, path, {"kind", "value"});
        return ScalarField::constant(as_number(require(j, path, "value"), path + ".value"));
    }
    if (kind == "affine") {
        check_keys(j, path, {"kind", "alpha", "beta"});
        return ScalarField::affine(as_number(require(j, path, "alpha"), path + ".alpha"),
                                   as_number(require(j, path, "beta"), path + ".beta"));
    }
    if (kind == "clipped_affine") {
        check_keys(j, path, {"kind", "alpha", "beta", "cap"});
        return ScalarField::clipped_affine(
            as_number(require(j, path, "cap"), path + ".cap"),
            as_number(require(j, path, "alpha"), path + ".alpha"),
            as_number(require(j, path, "beta"), path + ".beta"));
    }
    throw ConfigError("config: '" + path +
                      ".kind' must be one of constant, affine, clipped_affine");
}

std::vector<ScalarField> parse_fields(const json& j, const std::string& path, int m) {
    const json& arr = as_array(j, path, m);
    std::vector<ScalarField> out;
    out.reserve(m);
    for (int i = 0; i < m; ++i) out.push_back(parse_field(arr[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

GridSpec parse_grid(const json* j) {
    GridSpec grid;
    if (!j) return grid;
    check_keys(*j, "problem.validation_grid", {"t_points", "y_points", "y_min", "y_max"});
    if (const json* v = find(*j, "t_points")) grid.t_points = as_int(*v, "problem.validation_grid.t_points");
    if (const json* v = find(*j, "y_points")) grid.y_points = as_int(*v, "problem.validation_grid.y_points");
    if (const json* v = find(*j, "y_min")) grid.y_min = as_number(*v, "problem.validation_grid.y_min");
    if (const json* v = find(*j, "y_max")) grid.y_max = as_number(*v, "problem.validation_grid.y_max");
    return grid;
}

ProblemSpec parse_problem(const json& j, GridSpec& grid) {
    check_keys(j, "problem",
               {"mode_count", "horizon", "generator", "costs", "upper_barriers", "terminals",
                "allow_nonstrict_costs", "validation_grid"});
    ProblemSpec spec;
    spec.mode_count = as_int(require(j, "problem", "mode_count"), "problem.mode_count");
    if (spec.mode_count < 1) throw ConfigError("config: 'problem.mode_count' must be at least 1");
    spec.horizon = as_number(require(j, "problem", "horizon"), "problem.horizon");
    const int m = spec.mode_count;

    const json& gen = require(j, "problem", "generator");
    check_keys(gen, "problem.generator", {"a", "b", "c"});
    const json& a = as_array(require(gen, "problem.generator", "a"), "problem.generator.a", m);
    const json& b = as_array(require(gen, "problem.generator", "b"), "problem.generator.b", m);
    const json& c = as_array(require(gen, "problem.generator", "c"), "problem.generator.c", m);
    spec.generator.a.clear();
    spec.generator.b.clear();
    spec.generator.c.clear();
    for (int i = 0; i < m; ++i) {
        const std::string idx = "[" + std::to_string(i) + "]";
        spec.generator.a.push_back(parse_time_affine(a[i], "problem.generator.a" + idx));
        spec.generator.b.push_back(as_number(b[i], "problem.generator.b" + idx));
        spec.generator.c.push_back(as_number(c[i], "problem.generator.c" + idx));
    }

    const json& costs = require(j, "problem", "costs");
    if (!costs.is_object()) throw ConfigError("config: 'problem.costs' must be an object");
    check_keys(costs, "problem.costs", {"k"});
    const json& k = as_array(require(costs, "problem.costs", "k"), "problem.costs.k", m);
    LinearCosts lin;
    lin.k.assign(m, std::vector<double>(m, 0.0));
    for (int i = 0; i < m; ++i) {
        const std::string row = "problem.costs.k[" + std::to_string(i) + "]";
        const json& ki = as_array(k[i], row, m);
        for (int l = 0; l < m; ++l) lin.k[i][l] = as_number(ki[l], row + "[" + std::to_string(l) + "]");
    }
    spec.costs = lin;

    spec.upper_barriers = parse_fields(require(j, "problem", "upper_barriers"),
                                       "problem.upper_barriers", m);
    spec.terminals = parse_fields(require(j, "problem", "terminals"), "problem.terminals", m);
    if (const json* flag = find(j, "allow_nonstrict_costs"))
        spec.allow_nonstrict_costs = as_bool(*flag, "problem.allow_nonstrict_costs");
    grid = parse_grid(find(j, "validation_grid"));
    return spec;
}

Backend parse_backend(const std::string& name) {
    if (name == "direct") return Backend::direct;
    if (name == "penalty_upper") return Backend::penalty_upper;
    if (name == "penalty_oblique") return Backend::penalty_oblique;
    if (name == "picard") return Backend::picard;
    throw ConfigError("config: 'solver.backend' must be one of direct, penalty_upper, "
                      "penalty_oblique, picard");
}

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::direct: return "direct";
        case Backend::penalty_upper: return "penalty_upper";
        case Backend::penalty_oblique: return "penalty_oblique";
        case Backend::picard: return "picard";
    }
    return "direct";
}

Task parse_task(const std::string& name) {
    if (name == "solve") return Task::solve;
    if (name == "residuals") return Task::residuals;
    if (name == "verify_representation") return Task::verify_representation;
    if (name == "penalty_sweep") return Task::penalty_sweep;
    if (name == "picard_trace") return Task::picard_trace;
    throw ConfigError("config: unknown task '" + name + "'");
}

const char* task_name(Task t) {
    switch (t) {
        case Task::solve: return "solve";
        case Task::residuals: return "residuals";
        case Task::verify_representation: return "verify_representation";
        case Task::penalty_sweep: return "penalty_sweep";
        case Task::picard_trace: return "picard_trace";
    }
    return "solve";
}

void apply_override(json& root, const std::string& ov) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like key.path=value: '" + ov + "'");
    const std::string path = ov.substr(0, eq);
    const std::string value = ov.substr(eq + 1);
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const std::exception&) {
        parsed = value; // bare words are strings
    }
    json* ref = &root;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string seg =
            path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (seg.empty()) throw ConfigError("override path has an empty segment: '" + ov + "'");
        if (!ref->is_object() && !ref->is_null())
            throw ConfigError("override path crosses a non-object value: '" + ov + "'");
        if (dot == std::string::npos) {
            (*ref)[seg] = parsed;
            return;
        }
        ref = &(*ref)[seg];
        start = dot + 1;
    }
}

std::string iso_timestamp() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw ConfigError("write to '" + path + "' failed");
}

const char* error_type_name(const std::exception& err) {
    if (dynamic_cast<const ConfigError*>(&err)) return "ConfigError";
    if (dynamic_cast<const NonConvergenceError*>(&err)) return "NonConvergenceError";
    if (dynamic_cast<const ContractionError*>(&err)) return "ContractionError";
    if (dynamic_cast<const RepresentationError*>(&err)) return "RepresentationError";
    if (dynamic_cast<const InternalConsistencyError*>(&err)) return "InternalConsistencyError";
    return "Error";
}

void write_failure_report(const OutputSpec& out, const std::exception& err,
                          std::vector<std::string>& files) {
    if (!out.json) return;
    json doc;
    doc["error_type"] = error_type_name(err);
    doc["message"] = err.what();
    doc["exit_status"] = exit_status_for(err);
    const std::string path =
        (std::filesystem::path(out.directory) / "failure_report.json").string();
    try {
        write_text(path, doc.dump(2) + "\n");
        files.push_back(path);
    } catch (const std::exception&) {
        // Do not mask the original error with a reporting failure.
    }
}

json validation_to_json(const ValidationReport& rep) {
    json out;
    out["ok"] = rep.ok();
    out["grid"] = rep.grid_description;
    json entries = json::array();
    for (const auto& e : rep.entries) {
        json row;
        row["clause"] = e.clause;
        row["pass"] = e.pass;
        if (e.warning) row["warning"] = true;
        if (!e.witness.empty()) row["witness"] = e.witness;
        entries.push_back(std::move(row));
    }
    out["entries"] = std::move(entries);
    return out;
}

Solution dispatch_solve(const RunConfig& cfg, const Lattice& lat) {
    switch (cfg.backend) {
        case Backend::direct: return solve_direct(cfg.problem, lat, cfg.options);
        case Backend::penalty_upper:
            return solve_penalty_upper(cfg.problem, lat, cfg.options, cfg.options.penalty_parameter);
        case Backend::penalty_oblique:
            return solve_penalty_oblique(cfg.problem, lat, cfg.options,
                                         cfg.options.penalty_parameter);
        case Backend::picard: return solve_picard(cfg.problem, lat, cfg.options);
    }
    throw ConfigError("unknown backend");
}

double sup_gap(const Surface& a, const Surface& b) {
    double gap = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t n = 0; n < a[i].size(); ++n)
            for (std::size_t p = 0; p < a[i][n].size(); ++p)
                gap = std::max(gap, std::abs(a[i][n][p] - b[i][n][p]));
    return gap;
}

json root_values(const Solution& sol) {
    json vals = json::array();
    for (std::size_t i = 0; i < sol.Y.size(); ++i) vals.push_back(sol.value_at_root(static_cast<int>(i)));
    return vals;
}

} // namespace

void RunConfig::check() const {
    check_problem_structure(problem);
    options.check();
    if (steps < 1) throw ConfigError("lattice.N must be at least 1");
    if (tasks.empty()) throw ConfigError("config: 'tasks' must be nonempty");
    if (backend == Backend::penalty_oblique && !std::holds_alternative<LinearCosts>(problem.costs))
        throw ConfigError("backend penalty_oblique requires linear switch costs");
    for (Task t : tasks) {
        if (t == Task::verify_representation && kind != LatticeKind::full_tree)
            throw ConfigError("task verify_representation requires lattice.kind = full_tree");
        if (t == Task::penalty_sweep && n_pen.empty())
            throw ConfigError("task penalty_sweep requires a nonempty solver.n_pen list");
    }
    for (double n : n_pen)
        if (!std::isfinite(n) || n < 0.0)
            throw ConfigError("solver.n_pen entries must be finite and nonnegative");
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
    json root;
    try {
        root = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    for (const std::string& ov : overrides) apply_override(root, ov);
    check_keys(root, "", {"problem", "lattice", "solver", "tasks", "output"});

    RunConfig cfg;
    cfg.problem = parse_problem(require(root, "", "problem"), cfg.grid);

    const json& lat = require(root, "", "lattice");
    check_keys(lat, "lattice", {"N", "kind"});
    cfg.steps = as_int(require(lat, "lattice", "N"), "lattice.N");
    if (const json* kind = find(lat, "kind")) {
        const std::string name = as_string(*kind, "lattice.kind");
        if (name == "recombining")
            cfg.kind = LatticeKind::recombining;
        else if (name == "full_tree")
            cfg.kind = LatticeKind::full_tree;
        else
            throw ConfigError("config: 'lattice.kind' must be recombining or full_tree");
    }

    if (const json* solver = find(root, "solver")) {
        check_keys(*solver, "solver",
                   {"backend", "tol_projection", "max_projection_sweeps", "tol_driver_fixpoint",
                    "penalty_parameter", "picard_tol", "picard_max_iters", "n_pen"});
        if (const json* v = find(*solver, "backend"))
            cfg.backend = parse_backend(as_string(*v, "solver.backend"));
        if (const json* v = find(*solver, "tol_projection"))
            cfg.options.tol_projection = as_number(*v, "solver.tol_projection");
        if (const json* v = find(*solver, "max_projection_sweeps"))
            cfg.options.max_projection_sweeps = as_int(*v, "solver.max_projection_sweeps");
        if (const json* v = find(*solver, "tol_driver_fixpoint"))
            cfg.options.tol_driver_fixpoint = as_number(*v, "solver.tol_driver_fixpoint");
        if (const json* v = find(*solver, "penalty_parameter"))
            cfg.options.penalty_parameter = as_number(*v, "solver.penalty_parameter");
        if (const json* v = find(*solver, "picard_tol"))
            cfg.options.picard_tol = as_number(*v, "solver.picard_tol");
        if (const json* v = find(*solver, "picard_max_iters"))
            cfg.options.picard_max_iters = as_int(*v, "solver.picard_max_iters");
        if (const json* v = find(*solver, "n_pen")) {
            const json& arr = as_array(*v, "solver.n_pen");
            for (std::size_t i = 0; i < arr.size(); ++i)
                cfg.n_pen.push_back(as_number(arr[i], "solver.n_pen[" + std::to_string(i) + "]"));
        }
    }

    const json& tasks = as_array(require(root, "", "tasks"), "tasks");
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Task t = parse_task(as_string(tasks[i], "tasks[" + std::to_string(i) + "]"));
        if (std::find(cfg.tasks.begin(), cfg.tasks.end(), t) != cfg.tasks.end())
            throw ConfigError("config: duplicate task '" + std::string(task_name(t)) + "'");
        cfg.tasks.push_back(t);
    }

    if (const json* output = find(root, "output")) {
        check_keys(*output, "output", {"directory", "formats"});
        if (const json* v = find(*output, "directory"))
            cfg.output.directory = as_string(*v, "output.directory");
        if (const json* v = find(*output, "formats")) {
            const json& arr = as_array(*v, "output.formats");
            cfg.output.csv = cfg.output.json = false;
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string f = as_string(arr[i], "output.formats[" + std::to_string(i) + "]");
                if (f == "csv")
                    cfg.output.csv = true;
                else if (f == "json")
                    cfg.output.json = true;
                else
                    throw ConfigError("config: 'output.formats' entries must be csv or json");
            }
        }
    }

    check_problem_structure(cfg.problem);
    cfg.validation = validate_hypotheses(cfg.problem, cfg.grid);
    if (!cfg.validation.ok())
        throw ConfigError("config: hypothesis validation failed\n" + cfg.validation.summary());
    cfg.check();
    return cfg;
}

RunConfig parse_config_file(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), overrides);
}

int exit_status_for(const std::exception& err) {
    if (dynamic_cast<const ConfigError*>(&err)) return 2;
    if (dynamic_cast<const NonConvergenceError*>(&err)) return 3;
    if (dynamic_cast<const ContractionError*>(&err)) return 3;
    if (dynamic_cast<const RepresentationError*>(&err)) return 4;
    return 1;
}

std::string format_surfaces_csv(const Solution& sol, const Lattice& lat) {
    std::string out = "level,node_index,w,mode,Y,Z,dK_plus,dK_minus\n";
    char line[256];
    const int m = static_cast<int>(sol.Y.size());
    for (int n = 0; n <= lat.step_count; ++n)
        for (int p = 0; p < lat.node_count(n); ++p)
            for (int i = 0; i < m; ++i) {
                std::snprintf(line, sizeof(line), "%d,%d,%.17g,%d,%.17g,%.17g,%.17g,%.17g\n", n, p,
                              lat.state(n, p), i, sol.Y[i][n][p], sol.Z[i][n][p], sol.dKp[i][n][p],
                              sol.dKm[i][n][p]);
                out += line;
            }
    return out;
}

LoadedSurfaces parse_surfaces_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "level,node_index,w,mode,Y,Z,dK_plus,dK_minus")
        throw ConfigError("surfaces: missing or unexpected header row");
    struct Row {
        int level, node, mode;
        double y, z, kp, km;
    };
    std::vector<Row> rows;
    int levels = 0, modes = 0;
    std::vector<int> node_counts;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::array<std::string, 8> fields;
        std::size_t start = 0;
        for (int f = 0; f < 8; ++f) {
            const auto comma = line.find(',', start);
            if (f < 7 && comma == std::string::npos)
                throw ConfigError("surfaces: malformed row " + std::to_string(line_no));
            fields[f] = line.substr(start, comma == std::string::npos ? std::string::npos
                                                                      : comma - start);
            start = comma + 1;
            if (f == 7 && comma != std::string::npos)
                throw ConfigError("surfaces: malformed row " + std::to_string(line_no));
        }
        auto to_int = [&](const std::string& s) {
            char* end = nullptr;
            const long v = std::strtol(s.c_str(), &end, 10);
            if (end == s.c_str() || *end != '\0')
                throw ConfigError("surfaces: malformed row " + std::to_string(line_no));
            return static_cast<int>(v);
        };
        auto to_double = [&](const std::string& s) {
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (end == s.c_str() || *end != '\0')
                throw ConfigError("surfaces: malformed row " + std::to_string(line_no));
            return v;
        };
        to_double(fields[2]); // w is re-derived from the lattice but must still parse
        Row r{to_int(fields[0]), to_int(fields[1]), to_int(fields[3]), to_double(fields[4]),
              to_double(fields[5]), to_double(fields[6]), to_double(fields[7])};
        if (r.level < 0 || r.node < 0 || r.mode < 0)
            throw ConfigError("surfaces: negative index on row " + std::to_string(line_no));
        levels = std::max(levels, r.level + 1);
        modes = std::max(modes, r.mode + 1);
        if (static_cast<int>(node_counts.size()) < levels) node_counts.resize(levels, 0);
        node_counts[r.level] = std::max(node_counts[r.level], r.node + 1);
        rows.push_back(r);
    }
    if (rows.empty()) throw ConfigError("surfaces: no data rows");
    LoadedSurfaces out;
    auto shape = [&](Surface& s) {
        s.assign(modes, {});
        for (int i = 0; i < modes; ++i) {
            s[i].resize(levels);
            for (int n = 0; n < levels; ++n) s[i][n].assign(node_counts[n], 0.0);
        }
    };
    shape(out.Y);
    shape(out.Z);
    shape(out.dKp);
    shape(out.dKm);
    for (const Row& r : rows) {
        out.Y[r.mode][r.level][r.node] = r.y;
        out.Z[r.mode][r.level][r.node] = r.z;
        out.dKp[r.mode][r.level][r.node] = r.kp;
        out.dKm[r.mode][r.level][r.node] = r.km;
    }
    return out;
}

LoadedSurfaces load_surfaces_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open surfaces file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_surfaces_csv(buf.str());
}

RunArtifacts run(const RunConfig& cfg) {
    cfg.check();
    namespace fs = std::filesystem;
    try {
        fs::create_directories(cfg.output.directory);
    } catch (const std::exception& e) {
        throw ConfigError("cannot create output directory '" + cfg.output.directory +
                          "': " + e.what());
    }
    auto out_path = [&](const char* name) {
        return (fs::path(cfg.output.directory) / name).string();
    };

    RunArtifacts art;
    json report;
    {
        json header;
        header["generated_at"] = iso_timestamp();
        header["backend"] = backend_name(cfg.backend);
        json lattice;
        lattice["N"] = cfg.steps;
        lattice["kind"] = cfg.kind == LatticeKind::recombining ? "recombining" : "full_tree";
        header["lattice"] = std::move(lattice);
        json tasks = json::array();
        for (Task t : cfg.tasks) tasks.push_back(task_name(t));
        header["tasks"] = std::move(tasks);
        report["header"] = std::move(header);
    }
    report["validation"] = validation_to_json(cfg.validation);

    bool rep_failed = false;
    std::string rep_message;
    try {
        const Lattice lat = build_lattice(cfg.problem.horizon, cfg.steps, cfg.kind);
        Solution sol;
        bool have_sol = false;
        auto ensure_solution = [&]() {
            if (!have_sol) {
                sol = dispatch_solve(cfg, lat);
                have_sol = true;
            }
        };
        auto has_task = [&](Task t) {
            return std::find(cfg.tasks.begin(), cfg.tasks.end(), t) != cfg.tasks.end();
        };

        if (has_task(Task::solve)) {
            ensure_solution();
            json section;
            section["backend"] = backend_name(cfg.backend);
            section["iterations"] = sol.iterations;
            section["final_change"] = sol.final_change;
            section["root_values"] = root_values(sol);
            if (cfg.output.csv) {
                const std::string path = out_path("surfaces.csv");
                write_text(path, format_surfaces_csv(sol, lat));
                art.files.push_back(path);
                section["surfaces_file"] = "surfaces.csv";
            }
            report["solve"] = std::move(section);
        }
        if (has_task(Task::residuals)) {
            ensure_solution();
            const SkorokhodResiduals res = residuals(sol, cfg.problem, lat);
            json section;
            section["upper"] = res.upper;
            section["lower"] = res.lower;
            report["residuals"] = std::move(section);
        }
        if (has_task(Task::verify_representation)) {
            const VerificationReport vr = verify_representation(cfg.problem, cfg.steps, cfg.options);
            json section;
            section["pass"] = vr.pass;
            section["tolerance"] = vr.tolerance;
            section["worst_gap"] = vr.worst_gap;
            section["game_evaluations"] = vr.game_evaluations;
            if (!vr.counterexample.empty()) section["counterexample"] = vr.counterexample;
            json modes = json::array();
            for (const auto& d : vr.modes) {
                json row;
                row["mode"] = d.mode;
                row["y0"] = d.y0;
                row["best_value"] = d.best_value;
                row["minmax"] = d.minmax;
                row["maxmin"] = d.maxmin;
                row["extracted_value"] = d.extracted_value;
                row["worst_saddle_left"] = d.worst_saddle_left;
                row["worst_saddle_right"] = d.worst_saddle_right;
                modes.push_back(std::move(row));
            }
            section["modes"] = std::move(modes);
            report["verify_representation"] = std::move(section);
            if (!vr.pass) {
                rep_failed = true;
                rep_message = vr.counterexample.empty() ? "representation verification failed"
                                                        : vr.counterexample;
            }
        }
        if (has_task(Task::penalty_sweep)) {
            // A non-penalty configured backend leaves the sweep route open:
            // quantify the coupled (oblique) relaxation whenever the problem
            // actually couples modes, else the upper relaxation.
            const bool coupled = cfg.problem.mode_count > 1 &&
                                 std::holds_alternative<LinearCosts>(cfg.problem.costs);
            const Backend pb = (cfg.backend == Backend::penalty_upper ||
                                cfg.backend == Backend::penalty_oblique)
                                   ? cfg.backend
                                   : (coupled ? Backend::penalty_oblique : Backend::penalty_upper);
            const Solution ref = solve_direct(cfg.problem, lat, cfg.options);
            json section;
            section["backend"] = backend_name(pb);
            json rows = json::array();
            std::string csv = "n_pen,sup_gap";
            for (int i = 0; i < cfg.problem.mode_count; ++i)
                csv += ",Y0_mode" + std::to_string(i);
            csv += "\n";
            for (double n : cfg.n_pen) {
                const Solution p = pb == Backend::penalty_upper
                                       ? solve_penalty_upper(cfg.problem, lat, cfg.options, n)
                                       : solve_penalty_oblique(cfg.problem, lat, cfg.options, n);
                const double gap = sup_gap(p.Y, ref.Y);
                json row;
                row["n_pen"] = n;
                row["sup_gap"] = gap;
                row["root_values"] = root_values(p);
                rows.push_back(std::move(row));
                csv += fmt17(n) + "," + fmt17(gap);
                for (int i = 0; i < cfg.problem.mode_count; ++i)
                    csv += "," + fmt17(p.value_at_root(i));
                csv += "\n";
            }
            section["rows"] = std::move(rows);
            if (cfg.output.csv) {
                const std::string path = out_path("sweep.csv");
                write_text(path, csv);
                art.files.push_back(path);
                section["sweep_file"] = "sweep.csv";
            }
            report["penalty_sweep"] = std::move(section);
        }
        if (has_task(Task::picard_trace)) {
            const Solution p = solve_picard(cfg.problem, lat, cfg.options);
            json section;
            section["iterations"] = p.iterations;
            section["final_change"] = p.final_change;
            section["deltas"] = p.iteration_deltas;
            section["min_gaps"] = p.iteration_min_gaps;
            double worst = 0.0;
            for (double g : p.iteration_min_gaps) worst = std::min(worst, g);
            section["monotone"] = true; // solve_picard rejects decreasing iterates
            section["worst_decrease"] = worst;
            section["root_values"] = root_values(p);
            report["picard_trace"] = std::move(section);
        }
    } catch (const std::exception& e) {
        write_failure_report(cfg.output, e, art.files);
        throw;
    }

    art.report_json = report.dump(2) + "\n";
    if (cfg.output.json) {
        const std::string path = out_path("report.json");
        write_text(path, art.report_json);
        art.files.push_back(path);
    }
    if (rep_failed) {
        const RepresentationError err(rep_message);
        write_failure_report(cfg.output, err, art.files);
        throw err;
    }
    return art;
}

} // namespace orbsde
