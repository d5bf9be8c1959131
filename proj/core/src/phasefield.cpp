#include "bandfem/phasefield.hpp"

#include <cmath>
#include <limits>

#include "bandfem/levelset.hpp"

namespace bandfem {

double g_eval(double r) {
    if (std::abs(r) >= M_PI / 2.0) return 0.0;
    double c = std::cos(r);
    return c * c;
}

double g_prime(double r) {
    if (std::abs(r) >= M_PI / 2.0) return 0.0;
    return -2.0 * std::sin(r) * std::cos(r);
}

std::vector<std::string> CouplingCheck::violations() const {
    std::vector<std::string> v;
    if (!h_ok) v.push_back("h exceeds cos^2(3pi/8)/(2 c1) * eps");
    if (!tau_ok) v.push_back("tau exceeds cos^2(3pi/8)/(2 c2) * eps");
    if (!tau_eps2_ok) v.push_back("tau exceeds eps^2");
    return v;
}

CouplingCheck check_coupling(double h, double tau, double eps,
                             const BandRegularityReport& report) {
    const double c = std::cos(3.0 * M_PI / 8.0);
    const double c2_38 = c * c;
    const double safety = 1.1;
    CouplingCheck out;
    out.h_bound = c2_38 / (2.0 * safety * report.c1_est) * eps;
    out.tau_bound = report.c2_est > 0.0 ? c2_38 / (2.0 * safety * report.c2_est) * eps
                                        : std::numeric_limits<double>::infinity();
    out.h_ok = h <= out.h_bound;
    out.tau_ok = tau <= out.tau_bound;
    out.tau_eps2_ok = tau <= eps * eps;
    out.h_margin = out.h_bound - h;
    out.tau_margin = out.tau_bound - tau;
    out.tau_eps2_margin = eps * eps - tau;
    return out;
}

}  // namespace bandfem
