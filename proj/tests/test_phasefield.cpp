#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bandfem/levelset.hpp"
#include "bandfem/phasefield.hpp"
#include "bandfem/verify.hpp"

using namespace bandfem;

TEST_CASE("cut-off profile values") {
    CHECK(g_eval(0.0) == 1.0);
    CHECK(g_eval(M_PI / 2.0) == 0.0);
    CHECK(g_eval(-M_PI / 2.0) == 0.0);
    CHECK(g_eval(2.0) == 0.0);
    CHECK(g_eval(M_PI / 4.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g_eval(-1.1) == g_eval(1.1));

    CHECK(g_prime(0.0) == 0.0);
    CHECK(g_prime(M_PI / 4.0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(std::abs(g_prime(1.0)) <= 2.0 * std::sqrt(g_eval(1.0)) + 1e-14);
    CHECK(g_prime(3.0) == 0.0);
}

TEST_CASE("phase fields on the unit circle") {
    auto ex1 = make_problem_2d(ProblemId::Ex1);
    const double eps = 0.4;
    CHECK(rho_from_phi(ex1->phi({1.0, 0.0}, 0.0), eps) == 1.0);

    // Support edge: phi = 0.2 pi makes the argument pi/2.
    double x_edge = std::sqrt(1.0 + 0.2 * M_PI);
    CHECK(rho_from_phi(ex1->phi({x_edge, 0.0}, 0.0), eps) == doctest::Approx(0.0).epsilon(1e-15));

    // Frozen independent evaluation: phi(1.1, 0) = 0.21, cos^2(0.21/0.4).
    double rho_val = rho_from_phi(ex1->phi({1.1, 0.0}, 0.0), eps);
    CHECK(rho_val == doctest::Approx(0.7487855239458634).epsilon(1e-13));

    // Wide field keeps half its height where the narrow field ends.
    double rt = rho_tilde_from_phi(0.2 * M_PI, eps);
    CHECK(rt == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("coupling condition") {
    auto ex1 = make_problem_2d(ProblemId::Ex1);
    auto rep = estimate_band_constants(*ex1, 0.4, 20000);

    // Benchmark row-one parameters satisfy every inequality.
    auto ok = check_coupling(4.6875e-3, 0.0025 * 0.16, 0.4, rep);
    CHECK(ok.all_ok());
    CHECK(ok.h_margin > 0.0);
    CHECK(ok.violations().empty());

    // h = tau = eps violates both band inequalities.
    auto bad = check_coupling(0.4, 0.4, 0.4, rep);
    CHECK_FALSE(bad.h_ok);
    CHECK_FALSE(bad.tau_ok);
    CHECK(bad.violations().size() >= 2);

    // tau = eps^2 sits exactly on the third boundary.
    auto edge = check_coupling(1e-4, 0.25, 0.5, rep);
    CHECK(edge.tau_eps2_ok);
    CHECK(edge.tau_eps2_margin == 0.0);
}

TEST_CASE("phasefield invariant suite") {
    auto lines = run_verify("phasefield");
    for (const auto& l : lines) {
        INFO(l.name, " measured=", l.measured, " bound=", l.bound);
        CHECK(l.pass);
    }
}
