#ifndef BANDFEM_FEM_HPP
#define BANDFEM_FEM_HPP

#include <array>
#include <vector>

#include "bandfem/band.hpp"
#include "bandfem/quadrature.hpp"
#include "bandfem/sparse.hpp"
#include "bandfem/vec.hpp"

namespace bandfem {

// Volume and constant basis-function gradients of a simplex. The gradient
// of the first basis function is computed as minus the sum of the others,
// which makes the row sums of stiffness-type matrices vanish exactly.
template <int D>
struct ElementGeometry {
    double volume = 0.0;
    std::array<Vec<D>, D + 1> grad{};

    static ElementGeometry from_coords(const std::array<Vec<D>, D + 1>& v);
};

// Local matrices of the weighted terms on one element. Row index = test
// function, column = trial function. S is the stabilization kernel
// (integral of I_h rho_tilde grad u . grad v) without the gamma tau^2
// factor.
template <int D>
struct ElementContribution {
    static constexpr int N = D + 1;
    std::array<std::array<double, N>, N> M{};  // u v I_h rho |grad I_h phi|
    std::array<std::array<double, N>, N> K{};  // grad u . grad v, same weight
    std::array<std::array<double, N>, N> B{};  // u (I_h v_hat . grad v), same weight
    std::array<std::array<double, N>, N> S{};  // I_h rho_tilde grad u . grad v
    std::array<double, N> F{};                 // I_h f_hat v, same weight

    // M + tau (K - B) + gamma tau^2 S
    std::array<std::array<double, N>, N> combined(double gamma, double tau) const {
        std::array<std::array<double, N>, N> A{};
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                A[i][j] = M[i][j] + tau * (K[i][j] - B[i][j]) + gamma * tau * tau * S[i][j];
        return A;
    }
};

// Exact element integrals of the practical scheme: the interpolated level
// set is affine per element, so |grad I_h phi| is constant and every
// integrand is polynomial of degree <= 3, integrated exactly by the
// degree-3 rule.
template <int D>
ElementContribution<D> element_contribution(const std::array<Vec<D>, D + 1>& coords,
                                            const std::array<double, D + 1>& rho_n,
                                            const std::array<double, D + 1>& rho_tilde_n,
                                            const std::array<double, D + 1>& phi_n,
                                            const std::array<Vec<D>, D + 1>& vel_n,
                                            const std::array<double, D + 1>& f_n);

// Transfer load: integral of u_prev v I_h rho_prev |grad I_h phi_prev|
// over one element, given previous-step nodal data.
template <int D>
std::array<double, D + 1> element_transfer(const std::array<Vec<D>, D + 1>& coords,
                                           const std::array<double, D + 1>& u_prev_n,
                                           const std::array<double, D + 1>& rho_prev_n,
                                           const std::array<double, D + 1>& phi_prev_n);

struct AssemblyStats {
    std::int64_t n_band_elements = 0;
    std::int64_t n_transfer_elements = 0;
};

// System of the practical scheme for one implicit step:
//   A = M_w + tau (K_w - B_w) + gamma tau^2 S  over the current band,
//   b = tau * load + transfer term over elements shared with the previous
//       band (previous values fetched by lattice key).
// Throws MissingTransferDof if an element with nonzero previous weight
// references a vertex absent from the previous band space.
template <int D>
std::pair<SparseMatrix, std::vector<double>> assemble_step_system(
    const BandSpace<D>& band_m, const BandSpace<D>& band_prev, const std::vector<double>& u_prev,
    const PhaseFieldParams& params, double tau_m, int n_threads = 1,
    AssemblyStats* stats = nullptr);

// Unweighted mass system of the initial projection: M x = b with
// b_i = integral of I_h u0_hat v_i over the band.
template <int D>
std::pair<SparseMatrix, std::vector<double>> assemble_initial_projection(
    const BandSpace<D>& band, const std::vector<double>& u0_nodal, int n_threads = 1);

// Weighted mass (test function 1) and weighted squared L2 norm of a
// coefficient vector, both with the current interpolated weights.
template <int D>
double weighted_mass(const BandSpace<D>& band, const std::vector<double>& u);
template <int D>
double weighted_energy(const BandSpace<D>& band, const std::vector<double>& u);

extern template struct ElementGeometry<2>;
extern template struct ElementGeometry<3>;

}  // namespace bandfem

#endif
