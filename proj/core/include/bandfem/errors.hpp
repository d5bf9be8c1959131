#ifndef BANDFEM_ERRORS_HPP
#define BANDFEM_ERRORS_HPP

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bandfem/band.hpp"
#include "bandfem/levelset.hpp"

namespace bandfem {

// Running error functionals over a trajectory: E1/E3 are maxima over the
// steps m = 1..M, E2/E4 time-step weighted sums.
struct ErrorAccumulator {
    double e1 = 0.0;
    double e2 = 0.0;
    double e3 = 0.0;
    double e4 = 0.0;

    void add_band(double e1_contrib, double e2_contrib, double tau) {
        e1 = std::max(e1, e1_contrib);
        e2 += tau * e2_contrib;
    }
    void add_surface(double e3_contrib, double e4_contrib, double tau) {
        e3 = std::max(e3, e3_contrib);
        e4 += tau * e4_contrib;
    }
};

// Weighted band integrals of the difference to the interpolated
// closest-point extension of the exact solution:
//   e1 = (2/(eps pi)) int |I_h u_hat - u_h|^2 I_h rho |grad I_h phi|
//   e2 = (2/(eps pi)) int |grad(I_h u_hat - u_h)|^2 I_h rho |grad I_h phi|
template <int D>
std::pair<double, double> band_errors_step(const BandSpace<D>& band, const std::vector<double>& u,
                                           const LevelSetProblem<D>& problem);

struct SurfaceErrorSample {
    double e3 = 0.0;              // sum_l w_l |u - u_h|^2 at surface points
    double e4 = 0.0;              // sum_l w_l |grad_G u - grad_G u_h|^2
    double min_rho_tilde = 0.0;   // min interpolated wide phase field at the points
};

// Trapezoidal rule on the circle: points m(t) + (cos, sin)(2 pi l / L),
// weights 2 pi / L. Evaluation goes through the problem's fold map so that
// symmetric quarter-domain setups can serve the full circle.
SurfaceErrorSample surface_errors_step_2d(const BandSpace<2>& band, const std::vector<double>& u,
                                          const LevelSetProblem<2>& problem, int L);

// Product rule on the sphere with weights (pi/L)^2 sin(l pi / L).
SurfaceErrorSample surface_errors_step_3d(const BandSpace<3>& band, const std::vector<double>& u,
                                          const LevelSetProblem<3>& problem, int L);

// Experimental orders of convergence: rate_k = ln(E_k/E_{k+1}) / ln(h_k/h_{k+1}).
std::vector<double> eoc(const std::vector<double>& errors, const std::vector<double>& hs);

struct ConvergenceRow {
    double h = 0.0;
    double eps = 0.0;
    std::array<double, 4> err{};
    std::array<std::optional<double>, 4> rate{};
    bool failed = false;
    std::string note;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;

    // Fills the eoc columns from adjacent successful rows.
    void compute_rates();
    void to_csv(std::ostream& os) const;
    void to_markdown(std::ostream& os) const;
};

}  // namespace bandfem

#endif
