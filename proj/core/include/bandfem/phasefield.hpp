#ifndef BANDFEM_PHASEFIELD_HPP
#define BANDFEM_PHASEFIELD_HPP

#include <string>
#include <vector>

namespace bandfem {

// Interface-width and stabilization parameters of the diffuse-interface
// discretization. eps is the interface half-width scale, gamma the
// coefficient of the artificial-diffusion term, eps_to_h the ratio used to
// derive eps from the mesh size in convergence studies.
struct PhaseFieldParams {
    double eps = 0.0;
    double gamma = 0.01;
    double eps_to_h = 0.0;
};

// Cut-off profile: cos^2(r) inside [-pi/2, pi/2], zero outside. C^{1,1}.
double g_eval(double r);

// Derivative of the profile: -2 sin(r) cos(r) inside the support, zero
// outside. Satisfies |g'(r)| <= 2 sqrt(g(r)) and Lipschitz constant 2.
double g_prime(double r);

inline double rho_from_phi(double phi, double eps) { return g_eval(phi / eps); }
inline double rho_tilde_from_phi(double phi, double eps) { return g_eval(phi / (2.0 * eps)); }

struct BandRegularityReport;  // levelset.hpp

// Result of evaluating the grid/time-step/interface-width coupling
// inequalities. Advisory: the stepper warns on violations but proceeds.
struct CouplingCheck {
    bool h_ok = false;
    bool tau_ok = false;
    bool tau_eps2_ok = false;
    double h_bound = 0.0;    // admissible h given eps and c1
    double tau_bound = 0.0;  // admissible tau given eps and c2
    double h_margin = 0.0;   // bound - value
    double tau_margin = 0.0;
    double tau_eps2_margin = 0.0;

    bool all_ok() const { return h_ok && tau_ok && tau_eps2_ok; }
    std::vector<std::string> violations() const;
};

// Evaluates h <= cos^2(3pi/8)/(2 c1) * eps, tau <= cos^2(3pi/8)/(2 c2) * eps
// and tau <= eps^2, with a 10% safety margin on the sampled constants.
CouplingCheck check_coupling(double h, double tau, double eps, const BandRegularityReport& report);

}  // namespace bandfem

#endif
