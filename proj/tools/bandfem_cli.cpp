#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "bandfem/config.hpp"
#include "bandfem/mesh.hpp"
#include "bandfem/stepper.hpp"
#include "bandfem/verify.hpp"

namespace fs = std::filesystem;
using namespace bandfem;

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir, int threads,
            std::uint64_t seed, bool have_seed, const std::string& mesh_dump) {
    Config cfg = Config::parse_file(config_path);
    RunConfig rc = run_config_from(cfg);
    if (threads > 0) rc.threads = threads;
    if (have_seed) rc.seed = seed;

    fs::create_directories(out_dir);

    if (!mesh_dump.empty()) {
        if (problem_dim(rc.id) == 2) {
            Stepper<2> st(make_problem_2d(rc.id), rc);
            auto state = st.initial_state();
            std::ofstream os(mesh_dump);
            dump_mesh(*state.band->mesh, os);
        } else {
            Stepper<3> st(make_problem_3d(rc.id), rc);
            auto state = st.initial_state();
            std::ofstream os(mesh_dump);
            dump_mesh(*state.band->mesh, os);
        }
        std::cout << "band mesh written to " << mesh_dump << "\n";
    }

    TrajectorySummary sum = run_single(rc);
    {
        std::ofstream os(fs::path(out_dir) / "diagnostics.csv");
        write_diagnostics_csv(sum, os);
    }
    {
        std::ofstream os(fs::path(out_dir) / "summary.txt");
        write_summary(sum, os);
    }
    write_summary(sum, std::cout);
    if (sum.coupling && !sum.coupling->all_ok()) {
        std::cerr << "warning: grid/time-step/interface-width coupling violated:\n";
        for (const auto& v : sum.coupling->violations()) std::cerr << "  " << v << "\n";
    }
    if (!sum.solver_all_converged) {
        std::cerr << "error: linear solver failed to reach tolerance on some step\n";
        return 1;
    }
    return 0;
}

int cmd_study(const std::string& config_path, const std::string& out_dir, int levels, int threads,
              std::uint64_t seed, bool have_seed) {
    Config cfg = Config::parse_file(config_path);
    StudySpec spec = study_spec_from(cfg, levels);
    if (threads > 0) spec.base.threads = threads;
    if (have_seed) spec.base.seed = seed;

    fs::create_directories(out_dir);
    StudyResult result = run_study(spec);
    {
        std::ofstream os(fs::path(out_dir) / "table.csv");
        result.table.to_csv(os);
    }
    {
        std::ofstream os(fs::path(out_dir) / "table.md");
        result.table.to_markdown(os);
    }
    for (std::size_t i = 0; i < result.summaries.size(); ++i) {
        if (result.table.rows[i].failed) continue;
        std::ofstream os(fs::path(out_dir) / ("diagnostics_level" + std::to_string(i) + ".csv"));
        write_diagnostics_csv(result.summaries[i], os);
    }
    result.table.to_markdown(std::cout);
    bool any_failed = false;
    for (const auto& row : result.table.rows) any_failed = any_failed || row.failed;
    return any_failed ? 1 : 0;
}

int cmd_verify(const std::string& selector, std::uint64_t seed) {
    auto lines = run_verify(selector, seed);
    print_verify_report(lines, std::cout);
    for (const auto& l : lines)
        if (!l.pass) return 1;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffuse-interface narrow-band finite elements for PDEs on moving surfaces"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", selector = "all", mesh_dump;
    int levels = 0;
    int threads = 0;
    std::uint64_t seed = 0;

    auto* run = app.add_subcommand("run", "single simulation from a config file");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--threads", threads, "worker threads for assembly/matvec");
    auto* run_seed = run->add_option("--seed", seed, "seed for sampling-based diagnostics");
    run->add_option("--dump-mesh", mesh_dump, "write the initial band mesh to this file");

    auto* study = app.add_subcommand("study", "convergence study over a mesh ladder");
    study->add_option("--config", config_path, "config file")->required();
    study->add_option("--out", out_dir, "output directory");
    study->add_option("--levels", levels, "number of ladder levels (default from config)");
    study->add_option("--threads", threads, "worker threads for assembly/matvec");
    auto* study_seed = study->add_option("--seed", seed, "seed for sampling-based diagnostics");

    auto* verify = app.add_subcommand("verify", "run module invariant suites");
    verify->add_option("selector", selector, "module name or 'all'");
    auto* verify_seed = verify->add_option("--seed", seed, "seed for sampling-based diagnostics");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed())
            return cmd_run(config_path, out_dir, threads, seed, !run_seed->empty(), mesh_dump);
        if (study->parsed())
            return cmd_study(config_path, out_dir, levels, threads, seed, !study_seed->empty());
        if (verify->parsed()) return cmd_verify(selector, !verify_seed->empty() ? seed : 0);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
