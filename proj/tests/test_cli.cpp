#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bandfem/config.hpp"

namespace fs = std::filesystem;
using namespace bandfem;

namespace {

Config parse_text(const std::string& text) {
    std::istringstream is(text);
    return Config::parse(is, "<test>");
}

std::string cli_binary() {
    const char* env = std::getenv("BANDFEM_CLI");
    REQUIRE(env != nullptr);
    return env;
}

int run_cli(const std::string& args) {
    std::string cmd = cli_binary() + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
    auto cfg = parse_text(
        "[problem]\n"
        "id = ex1\n"
        "# comment\n"
        "[mesh]\n"
        "cells = 96\n"
        "[phasefield]\n"
        "eps = 0.4\n"
        "gamma = 0.02\n");
    auto rc = run_config_from(cfg);
    CHECK(rc.id == ProblemId::Ex1);
    CHECK(rc.cells == 96);
    CHECK(rc.eps_override == 0.4);
    CHECK(rc.gamma == 0.02);
    CHECK(rc.rule == TimeStepRule::EpsSq);

    // Missing problem id names the key.
    auto nocfg = parse_text("[mesh]\ncells = 4\n");
    try {
        run_config_from(nocfg);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key == "problem.id");
    }

    // Unknown keys are rejected with context.
    auto typo = parse_text("[problem]\nid = ex1\n[mesh]\ncels = 4\n");
    CHECK_THROWS_AS(run_config_from(typo), ConfigError);

    // Malformed values carry the line number.
    auto badnum = parse_text("[problem]\nid = ex1\n[mesh]\ncells = twelve\n");
    try {
        run_config_from(badnum);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.line == 4);
    }

    CHECK_THROWS_AS(parse_text("novalue\n"), ConfigError);
    CHECK_THROWS_AS(parse_text("[problem\nid = ex1\n"), ConfigError);
}

TEST_CASE("default study ladders") {
    auto l2 = default_ladder(ProblemId::Ex1, 5, 85.33);
    REQUIRE(l2.size() == 5);
    CHECK(l2[0].cells == 724);
    CHECK(l2[0].eps == 0.4);
    CHECK(l2[1].cells == 1024);
    CHECK(l2[1].eps == doctest::Approx(0.2 * M_SQRT2).epsilon(1e-15));
    CHECK(l2[2].cells == 1448);
    CHECK(l2[3].cells == 2048);
    CHECK(l2[4].cells == 2896);

    auto l23 = default_ladder(ProblemId::Ex2, 2, 85.33);
    CHECK(l23[0].cells == 1448);
    CHECK(l23[1].cells == 2048);

    auto l3 = default_ladder(ProblemId::Ex4, 2, 1.85);
    CHECK(l3[0].cells == 64);
    CHECK(l3[1].cells == 91);

    auto cfg = parse_text("[problem]\nid = ex1\n[mesh]\ncells = 1\n[study]\nlevels = 2\n");
    auto spec = study_spec_from(cfg);
    CHECK(spec.levels.size() == 2);
    CHECK(spec.levels[0].cells == 724);

    // A single-level study is rejected.
    auto one = parse_text("[problem]\nid = ex1\n[mesh]\ncells = 1\n[study]\nlevels = 1\n");
    CHECK_THROWS_AS(study_spec_from(one), ConfigError);
}

TEST_CASE("cli exit codes and outputs") {
    fs::path tmp = fs::temp_directory_path() / "bandfem_cli_test";
    fs::create_directories(tmp);

    // Missing config file.
    CHECK(run_cli("run --config " + (tmp / "missing.cfg").string()) == 2);

    // Config without problem id.
    {
        std::ofstream os(tmp / "noid.cfg");
        os << "[mesh]\ncells = 48\n";
    }
    CHECK(run_cli("run --config " + (tmp / "noid.cfg").string()) == 2);

    // Unknown verify selector.
    CHECK(run_cli("verify nonsense") == 2);
    CHECK(run_cli("verify linalg") == 0);

    // Tiny end-to-end run writes diagnostics and summary.
    {
        std::ofstream os(tmp / "tiny.cfg");
        os << "[problem]\nid = ex1\nfinal_time = 0.0008\n[mesh]\ncells = 96\n"
           << "[phasefield]\neps = 0.4\n[run]\ncoupling_check = false\n";
    }
    fs::path out = tmp / "out_run";
    CHECK(run_cli("run --config " + (tmp / "tiny.cfg").string() + " --out " + out.string()) == 0);
    CHECK(fs::exists(out / "diagnostics.csv"));
    CHECK(fs::exists(out / "summary.txt"));
    std::string diag = slurp(out / "diagnostics.csv");
    CHECK(diag.find("m,t,n_dofs,solver_iters,residual,weighted_mass,connected") == 0);

    // A tiny two-level study produces byte-identical tables on rerun.
    {
        std::ofstream os(tmp / "study.cfg");
        os << "[problem]\nid = ex1\nfinal_time = 0.0008\n"
           << "[study]\neps_ladder = 0.4, 0.2828427124746190\ncells_ladder = 72, 102\n"
           << "[mesh]\ncells = 1\n[run]\ncoupling_check = false\n";
    }
    fs::path out1 = tmp / "study1", out2 = tmp / "study2";
    CHECK(run_cli("study --config " + (tmp / "study.cfg").string() + " --out " + out1.string()) ==
          0);
    CHECK(run_cli("study --config " + (tmp / "study.cfg").string() + " --out " + out2.string()) ==
          0);
    CHECK(fs::exists(out1 / "table.csv"));
    CHECK(fs::exists(out1 / "table.md"));
    CHECK(slurp(out1 / "table.csv") == slurp(out2 / "table.csv"));
    CHECK(slurp(out1 / "table.md") == slurp(out2 / "table.md"));

    // Mesh dump.
    fs::path dump = tmp / "mesh.txt";
    CHECK(run_cli("run --config " + (tmp / "tiny.cfg").string() + " --out " + out.string() +
                  " --dump-mesh " + dump.string()) == 0);
    CHECK(fs::exists(dump));
    {
        std::ifstream is(dump);
        int dim = 0;
        is >> dim;
        CHECK(dim == 2);
    }
}

TEST_CASE("synthetic constant study reaches the solver floor") {
    // Constant data, stationary circle: the discrete solution is exact up
    // to solver tolerance, so every error functional sits at the floor.
    class ConstProblem final : public LevelSetProblem<2> {
    public:
        ProblemId id() const override { return ProblemId::Ex1; }
        Box<2> domain() const override { return {{0.0, 0.0}, {2.4, 2.4}}; }
        double phi(const Vec<2>& x, double) const override {
            return x[0] * x[0] + x[1] * x[1] - 1.0;
        }
        Vec<2> grad_phi(const Vec<2>& x, double) const override { return {2.0 * x[0], 2.0 * x[1]}; }
        double phi_t(const Vec<2>&, double) const override { return 0.0; }
        double phi_tt(const Vec<2>&, double) const override { return 0.0; }
        Mat<2> hessian_phi(const Vec<2>&, double) const override {
            Mat<2> h;
            h(0, 0) = h(1, 1) = 2.0;
            return h;
        }
        Vec<2> velocity(const Vec<2>&, double) const override { return {0.0, 0.0}; }
        double u_exact(const Vec<2>&, double) const override { return 2.5; }
        Vec<2> grad_u_exact(const Vec<2>&, double) const override { return {0.0, 0.0}; }
        double u0(const Vec<2>&) const override { return 2.5; }
        Vec<2> surface_center(double) const override { return {0.0, 0.0}; }
        double surface_radius(double) const override { return 1.0; }
        Vec<2> fold(const Vec<2>& x, std::array<double, 2>& signs) const override {
            signs = {1.0, 1.0};
            return {std::abs(x[0]), std::abs(x[1])};
        }
        std::array<bool, 2> symmetric_lo_faces() const override { return {true, true}; }
    };

    StudySpec spec;
    spec.id = ProblemId::Ex1;
    spec.levels = {{64, 0.4}, {91, 0.2 * M_SQRT2}};
    spec.base.id = ProblemId::Ex1;
    spec.base.final_time = 0.002;
    spec.base.coupling_check = false;
    auto problem = std::make_shared<ConstProblem>();
    auto result = run_study<2>(problem, spec);
    REQUIRE(result.table.rows.size() == 2);
    for (const auto& row : result.table.rows) {
        CHECK_FALSE(row.failed);
        for (int j = 0; j < 4; ++j) CHECK(row.err[static_cast<std::size_t>(j)] < 1e-14);
    }
}
