#include "bandfem/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bandfem {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'", path);
    return parse(is, path);
}

Config Config::parse(std::istream& is, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header",
                                  line, lineno);
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value",
                              line, lineno);
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key", line, lineno);
        std::string full = section.empty() ? key : section + "." + key;
        if (cfg.values_.count(full))
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + full + "'",
                              full, lineno);
        cfg.values_[full] = {val, lineno};
    }
    return cfg;
}

void Config::fail(const std::string& key, const std::string& msg) const {
    auto it = values_.find(key);
    int line = it != values_.end() ? it->second.second : -1;
    std::string where = origin_ + (line > 0 ? ":" + std::to_string(line) : "");
    throw ConfigError(where + ": key '" + key + "': " + msg, key, line);
}

std::string Config::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail(key, "missing required key");
    return it->second.first;
}

double Config::get_double(const std::string& key) const {
    std::string v = get_string(key);
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) fail(key, "trailing characters in number '" + v + "'");
        return d;
    } catch (const ConfigError&) {
        throw;
    } catch (...) {
        fail(key, "expected a number, got '" + v + "'");
    }
}

std::int64_t Config::get_int(const std::string& key) const {
    std::string v = get_string(key);
    try {
        std::size_t pos = 0;
        long long i = std::stoll(v, &pos);
        if (pos != v.size()) fail(key, "trailing characters in integer '" + v + "'");
        return i;
    } catch (const ConfigError&) {
        throw;
    } catch (...) {
        fail(key, "expected an integer, got '" + v + "'");
    }
}

bool Config::get_bool(const std::string& key) const {
    std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(key, "expected a boolean, got '" + v + "'");
}

std::vector<double> Config::get_double_list(const std::string& key) const {
    std::string v = get_string(key);
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (...) {
            fail(key, "expected a comma-separated number list, got '" + v + "'");
        }
    }
    if (out.empty()) fail(key, "empty list");
    return out;
}

std::optional<std::string> Config::maybe_string(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return get_string(key);
}
std::optional<double> Config::maybe_double(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return get_double(key);
}
std::optional<std::int64_t> Config::maybe_int(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return get_int(key);
}
std::optional<bool> Config::maybe_bool(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return get_bool(key);
}

void Config::require_known_keys(const std::vector<std::string>& known) const {
    for (const auto& [key, vp] : values_) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError(origin_ + ":" + std::to_string(vp.second) + ": unknown key '" + key +
                                  "'",
                              key, vp.second);
    }
}

namespace {

const std::vector<std::string> kKnownKeys = {
    "problem.id",          "problem.final_time",   "mesh.cells",         "mesh.level",
    "mesh.target_h",       "phasefield.eps_to_h",  "phasefield.eps",     "phasefield.gamma",
    "time.rule",           "time.tau",             "solver.rel_tol",     "solver.restart",
    "solver.max_iters",    "solver.precond",       "solver.ssor_omega",  "solver.warm_start",
    "run.threads",
    "run.seed",            "run.surface_quad_L",   "run.compute_errors", "run.coupling_check",
    "run.coupling_samples", "study.levels",        "study.eps_ladder",   "study.cells_ladder",
};

}  // namespace

RunConfig run_config_from(const Config& cfg) {
    cfg.require_known_keys(kKnownKeys);
    RunConfig rc;
    if (!cfg.has("problem.id"))
        throw ConfigError("missing required key 'problem.id'", "problem.id");
    rc.id = problem_id_from_string(cfg.get_string("problem.id"));
    rc.final_time = cfg.maybe_double("problem.final_time");

    rc.cells = cfg.maybe_int("mesh.cells");
    rc.level = cfg.maybe_double("mesh.level");
    rc.target_h = cfg.maybe_double("mesh.target_h");

    rc.eps_to_h = cfg.maybe_double("phasefield.eps_to_h");
    rc.eps_override = cfg.maybe_double("phasefield.eps");
    if (auto g = cfg.maybe_double("phasefield.gamma")) rc.gamma = *g;

    if (auto rule = cfg.maybe_string("time.rule")) {
        if (*rule == "eps2")
            rc.rule = TimeStepRule::EpsSq;
        else if (*rule == "h2")
            rc.rule = TimeStepRule::HSq;
        else if (*rule == "explicit")
            rc.rule = TimeStepRule::Explicit;
        else
            throw ConfigError("time.rule must be eps2, h2 or explicit", "time.rule");
    } else {
        rc.rule = problem_dim(rc.id) == 2 ? TimeStepRule::EpsSq : TimeStepRule::HSq;
    }
    rc.tau_explicit = cfg.maybe_double("time.tau");

    if (auto v = cfg.maybe_double("solver.rel_tol")) rc.solver.rel_tol = *v;
    if (auto v = cfg.maybe_int("solver.restart")) rc.solver.restart = static_cast<int>(*v);
    if (auto v = cfg.maybe_int("solver.max_iters")) rc.solver.max_iters = static_cast<int>(*v);
    if (auto p = cfg.maybe_string("solver.precond")) {
        if (*p == "none")
            rc.solver.precond = PrecondKind::None;
        else if (*p == "jacobi")
            rc.solver.precond = PrecondKind::Jacobi;
        else if (*p == "ssor")
            rc.solver.precond = PrecondKind::Ssor;
        else
            throw ConfigError("solver.precond must be none, jacobi or ssor", "solver.precond");
    }
    if (auto v = cfg.maybe_double("solver.ssor_omega")) rc.solver.ssor_omega = *v;
    if (auto v = cfg.maybe_bool("solver.warm_start")) rc.warm_start = *v;

    if (auto v = cfg.maybe_int("run.threads")) rc.threads = static_cast<int>(*v);
    if (auto v = cfg.maybe_int("run.seed")) rc.seed = static_cast<std::uint64_t>(*v);
    if (auto v = cfg.maybe_int("run.surface_quad_L")) rc.surface_quad_L = static_cast<int>(*v);
    if (auto v = cfg.maybe_bool("run.compute_errors")) rc.compute_errors = *v;
    if (auto v = cfg.maybe_bool("run.coupling_check")) rc.coupling_check = *v;
    if (auto v = cfg.maybe_int("run.coupling_samples")) rc.coupling_samples = static_cast<int>(*v);
    return rc;
}

std::vector<StudyLevel> default_ladder(ProblemId id, int n_levels, double eps_to_h) {
    static const double kEps[5] = {0.4, 0.2 * M_SQRT2, 0.2, 0.1 * M_SQRT2, 0.1};
    if (n_levels < 1 || n_levels > 5)
        throw ConfigError("study.levels must be between 1 and 5", "study.levels");
    const int dim = problem_dim(id);
    const double extent = dim == 2 ? (id == ProblemId::Ex1 ? 2.4 : 4.8) : 8.0;
    std::vector<StudyLevel> out;
    for (int k = 0; k < n_levels; ++k) {
        double target_w = kEps[k] / eps_to_h / std::sqrt(static_cast<double>(dim));
        out.push_back({static_cast<std::int64_t>(std::llround(extent / target_w)), kEps[k]});
    }
    return out;
}

StudySpec study_spec_from(const Config& cfg, int levels_override) {
    StudySpec spec;
    spec.base = run_config_from(cfg);
    spec.id = spec.base.id;
    double ratio = spec.base.eps_to_h.value_or(problem_dim(spec.id) == 2 ? 85.33 : 1.85);

    int n_levels = levels_override > 0
                       ? levels_override
                       : static_cast<int>(cfg.maybe_int("study.levels").value_or(2));
    if (cfg.has("study.eps_ladder") || cfg.has("study.cells_ladder")) {
        auto eps = cfg.get_double_list("study.eps_ladder");
        auto cells = cfg.get_double_list("study.cells_ladder");
        if (eps.size() != cells.size())
            throw ConfigError("study.eps_ladder and study.cells_ladder must have equal length",
                              "study.eps_ladder");
        for (std::size_t i = 0; i < eps.size(); ++i)
            spec.levels.push_back({static_cast<std::int64_t>(std::llround(cells[i])), eps[i]});
        if (levels_override > 0 &&
            spec.levels.size() > static_cast<std::size_t>(levels_override))
            spec.levels.resize(static_cast<std::size_t>(levels_override));
    } else {
        spec.levels = default_ladder(spec.id, n_levels, ratio);
    }
    if (spec.levels.size() < 2)
        throw ConfigError("a convergence study needs at least 2 levels", "study.levels");
    for (std::size_t i = 1; i < spec.levels.size(); ++i)
        if (spec.levels[i].cells <= spec.levels[i - 1].cells)
            throw ConfigError("study ladder must be strictly decreasing in h", "study.levels");
    return spec;
}

template <int D>
StudyResult run_study(std::shared_ptr<const LevelSetProblem<D>> problem, const StudySpec& spec) {
    StudyResult result;
    for (const auto& level : spec.levels) {
        RunConfig rc = spec.base;
        rc.cells = level.cells;
        rc.level.reset();
        rc.target_h.reset();
        rc.eps_override = level.eps;
        ConvergenceRow row;
        row.eps = level.eps;
        try {
            Stepper<D> stepper(problem, rc);
            row.h = stepper.h();
            TrajectorySummary s = stepper.run();
            row.err = {s.errors.e1, s.errors.e2, s.errors.e3, s.errors.e4};
            result.summaries.push_back(std::move(s));
        } catch (const std::exception& e) {
            row.failed = true;
            row.note = e.what();
            result.summaries.emplace_back();
        }
        result.table.rows.push_back(std::move(row));
    }
    result.table.compute_rates();
    return result;
}

template StudyResult run_study<2>(std::shared_ptr<const LevelSetProblem<2>>, const StudySpec&);
template StudyResult run_study<3>(std::shared_ptr<const LevelSetProblem<3>>, const StudySpec&);

StudyResult run_study(const StudySpec& spec) {
    if (problem_dim(spec.id) == 2) return run_study<2>(make_problem_2d(spec.id), spec);
    return run_study<3>(make_problem_3d(spec.id), spec);
}

TrajectorySummary run_single(const RunConfig& config) {
    if (problem_dim(config.id) == 2) {
        Stepper<2> stepper(make_problem_2d(config.id), config);
        return stepper.run();
    }
    Stepper<3> stepper(make_problem_3d(config.id), config);
    return stepper.run();
}

void write_diagnostics_csv(const TrajectorySummary& summary, std::ostream& os) {
    os << "m,t,n_dofs,solver_iters,residual,weighted_mass,connected\n";
    char buf[160];
    for (const auto& r : summary.records) {
        std::snprintf(buf, sizeof(buf), "%d,%.10e,%lld,%d,%.5e,%.10e,%d\n", r.m, r.t,
                      static_cast<long long>(r.n_dofs), r.solver_iters, r.solver_residual,
                      r.weighted_mass, r.connected ? 1 : 0);
        os << buf;
    }
}

void write_summary(const TrajectorySummary& summary, std::ostream& os) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "h = %.5e\neps = %.5e\ntau = %.5e\nsteps = %d\nmax_dofs = %lld\n",
                  summary.h, summary.eps, summary.tau, summary.steps,
                  static_cast<long long>(summary.max_dofs));
    os << buf;
    std::snprintf(buf, sizeof(buf), "E1 = %.5e\nE2 = %.5e\nE3 = %.5e\nE4 = %.5e\n",
                  summary.errors.e1, summary.errors.e2, summary.errors.e3, summary.errors.e4);
    os << buf;
    std::snprintf(buf, sizeof(buf),
                  "max_step_mass_drift = %.5e\ncumulative_mass_drift = %.5e\n"
                  "initial_energy = %.10e\nmax_energy = %.10e\n",
                  summary.max_step_mass_drift, summary.cumulative_mass_drift,
                  summary.initial_energy, summary.max_energy);
    os << buf;
    os << "all_connected = " << (summary.all_connected ? "yes" : "no") << "\n";
    os << "all_covered = " << (summary.all_covered ? "yes" : "no") << "\n";
    os << "solver_converged = " << (summary.solver_all_converged ? "yes" : "no") << "\n";
    if (summary.coupling) {
        os << "coupling_ok = " << (summary.coupling->all_ok() ? "yes" : "no") << "\n";
        for (const auto& v : summary.coupling->violations()) os << "coupling_violation = " << v << "\n";
    }
}

}  // namespace bandfem
