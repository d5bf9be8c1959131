#include "oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "bandfem/quadrature.hpp"

namespace bandfem::oracle {

double integrate_simplex_2d(const std::array<Vec<2>, 3>& v,
                            const std::function<double(const Vec<2>&)>& f, int q) {
    std::vector<double> gn, gw;
    gauss_legendre_01(q, gn, gw);
    double a11 = v[1][0] - v[0][0], a12 = v[2][0] - v[0][0];
    double a21 = v[1][1] - v[0][1], a22 = v[2][1] - v[0][1];
    double jac = std::abs(a11 * a22 - a12 * a21);
    double acc = 0.0;
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) {
            double x = gn[static_cast<std::size_t>(i)];
            double y = gn[static_cast<std::size_t>(j)] * (1.0 - x);
            Vec<2> p = {v[0][0] + a11 * x + a12 * y, v[0][1] + a21 * x + a22 * y};
            acc += gw[static_cast<std::size_t>(i)] * gw[static_cast<std::size_t>(j)] * (1.0 - x) *
                   f(p);
        }
    return acc * jac;
}

double integrate_simplex_3d(const std::array<Vec<3>, 4>& v,
                            const std::function<double(const Vec<3>&)>& f, int q) {
    std::vector<double> gn, gw;
    gauss_legendre_01(q, gn, gw);
    double a[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a[i][j] = v[static_cast<std::size_t>(j + 1)][i] - v[0][i];
    double jac = std::abs(a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                          a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                          a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]));
    double acc = 0.0;
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j)
            for (int k = 0; k < q; ++k) {
                double x = gn[static_cast<std::size_t>(i)];
                double y = gn[static_cast<std::size_t>(j)] * (1.0 - x);
                double z = gn[static_cast<std::size_t>(k)] * (1.0 - x) *
                           (1.0 - gn[static_cast<std::size_t>(j)]);
                Vec<3> p;
                for (int d = 0; d < 3; ++d)
                    p[d] = v[0][d] + a[d][0] * x + a[d][1] * y + a[d][2] * z;
                acc += gw[static_cast<std::size_t>(i)] * gw[static_cast<std::size_t>(j)] *
                       gw[static_cast<std::size_t>(k)] * (1.0 - x) * (1.0 - x) *
                       (1.0 - gn[static_cast<std::size_t>(j)]) * f(p);
            }
    return acc * jac;
}

template <int D>
AffineBasis<D> AffineBasis<D>::build(const std::array<Vec<D>, D + 1>& v) {
    // Solve [x_j 1] a_i = delta_ij for each basis function by Gaussian
    // elimination on the shared Vandermonde matrix.
    constexpr int N = D + 1;
    double m[N][2 * N];
    for (int r = 0; r < N; ++r) {
        for (int d = 0; d < D; ++d) m[r][d] = v[static_cast<std::size_t>(r)][d];
        m[r][D] = 1.0;
        for (int c = 0; c < N; ++c) m[r][N + c] = r == c ? 1.0 : 0.0;
    }
    for (int colp = 0; colp < N; ++colp) {
        int piv = colp;
        for (int r = colp + 1; r < N; ++r)
            if (std::abs(m[r][colp]) > std::abs(m[piv][colp])) piv = r;
        if (std::abs(m[piv][colp]) < 1e-300) throw std::runtime_error("degenerate simplex");
        if (piv != colp)
            for (int c = 0; c < 2 * N; ++c) std::swap(m[piv][c], m[colp][c]);
        double d = m[colp][colp];
        for (int c = 0; c < 2 * N; ++c) m[colp][c] /= d;
        for (int r = 0; r < N; ++r) {
            if (r == colp) continue;
            double f = m[r][colp];
            for (int c = 0; c < 2 * N; ++c) m[r][c] -= f * m[colp][c];
        }
    }
    AffineBasis<D> out;
    // Coefficients of basis i live in the inverse's column i.
    for (int i = 0; i < N; ++i)
        for (int r = 0; r < N; ++r) out.coef[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)] = m[r][N + i];
    return out;
}

template struct AffineBasis<2>;
template struct AffineBasis<3>;

std::vector<double> DenseMatrix::lu_solve(std::vector<double> b) const {
    if (rows_ != cols_ || static_cast<std::int64_t>(b.size()) != rows_)
        throw std::runtime_error("lu_solve: dimension mismatch");
    const std::int64_t n = rows_;
    std::vector<double> a = a_;
    std::vector<std::int64_t> piv(static_cast<std::size_t>(n));
    for (std::int64_t k = 0; k < n; ++k) {
        std::int64_t p = k;
        for (std::int64_t r = k + 1; r < n; ++r)
            if (std::abs(a[static_cast<std::size_t>(r * n + k)]) >
                std::abs(a[static_cast<std::size_t>(p * n + k)]))
                p = r;
        piv[static_cast<std::size_t>(k)] = p;
        if (p != k)
            for (std::int64_t c = 0; c < n; ++c)
                std::swap(a[static_cast<std::size_t>(p * n + c)], a[static_cast<std::size_t>(k * n + c)]);
        double d = a[static_cast<std::size_t>(k * n + k)];
        if (d == 0.0) throw std::runtime_error("lu_solve: singular matrix");
        for (std::int64_t r = k + 1; r < n; ++r) {
            double f = a[static_cast<std::size_t>(r * n + k)] / d;
            a[static_cast<std::size_t>(r * n + k)] = f;
            for (std::int64_t c = k + 1; c < n; ++c)
                a[static_cast<std::size_t>(r * n + c)] -= f * a[static_cast<std::size_t>(k * n + c)];
        }
    }
    for (std::int64_t k = 0; k < n; ++k) {
        std::int64_t p = piv[static_cast<std::size_t>(k)];
        if (p != k) std::swap(b[static_cast<std::size_t>(p)], b[static_cast<std::size_t>(k)]);
        for (std::int64_t r = k + 1; r < n; ++r)
            b[static_cast<std::size_t>(r)] -= a[static_cast<std::size_t>(r * n + k)] * b[static_cast<std::size_t>(k)];
    }
    for (std::int64_t k = n - 1; k >= 0; --k) {
        for (std::int64_t c = k + 1; c < n; ++c)
            b[static_cast<std::size_t>(k)] -= a[static_cast<std::size_t>(k * n + c)] * b[static_cast<std::size_t>(c)];
        b[static_cast<std::size_t>(k)] /= a[static_cast<std::size_t>(k * n + k)];
    }
    return b;
}

std::vector<double> DenseMatrix::multiply(const std::vector<double>& x) const {
    std::vector<double> y(static_cast<std::size_t>(rows_), 0.0);
    for (std::int64_t r = 0; r < rows_; ++r) {
        double s = 0.0;
        for (std::int64_t c = 0; c < cols_; ++c)
            s += a_[static_cast<std::size_t>(r * cols_ + c)] * x[static_cast<std::size_t>(c)];
        y[static_cast<std::size_t>(r)] = s;
    }
    return y;
}

double composite_simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n % 2 != 0) throw std::runtime_error("composite_simpson: n must be even");
    double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

namespace {

// Nodal field reconstruction helpers: value of I_h(field) at x from nodal
// data of one element, via the independent affine basis.
template <int D>
double p1_value(const AffineBasis<D>& basis, const std::array<double, D + 1>& nodal,
                const Vec<D>& x) {
    double s = 0.0;
    for (int i = 0; i <= D; ++i) s += nodal[static_cast<std::size_t>(i)] * basis.eval(i, x);
    return s;
}

}  // namespace

template <int D>
void dense_step_system(const BandSpace<D>& band_m, const BandSpace<D>& band_prev,
                       const std::vector<double>& u_prev, const LevelSetProblem<D>& problem,
                       double gamma, double tau_m, DenseMatrix& A, std::vector<double>& b) {
    constexpr int N = D + 1;
    const auto& mesh = *band_m.mesh;
    const std::int64_t n = band_m.n_dofs();
    A = DenseMatrix(n, n);
    b.assign(static_cast<std::size_t>(n), 0.0);

    for (std::int32_t e : band_m.band_elements) {
        auto coords = mesh.element_coords(e);
        auto dofs = band_m.element_dofs(e);
        auto basis = AffineBasis<D>::build(coords);

        std::array<double, N> rho_n, rhot_n, phi_n, f_n;
        std::array<Vec<D>, N> vel_n;
        for (int i = 0; i < N; ++i) {
            auto d = static_cast<std::size_t>(dofs[static_cast<std::size_t>(i)]);
            rho_n[static_cast<std::size_t>(i)] = band_m.rho_m[d];
            rhot_n[static_cast<std::size_t>(i)] = band_m.rho_tilde_m[d];
            phi_n[static_cast<std::size_t>(i)] = band_m.phi_m[d];
            vel_n[static_cast<std::size_t>(i)] = band_m.velocity_m[d];
            f_n[static_cast<std::size_t>(i)] = band_m.f_m[d];
        }
        Vec<D> grad_phi{};
        for (int i = 0; i < N; ++i) grad_phi += phi_n[static_cast<std::size_t>(i)] * basis.gradient(i);
        const double G = norm(grad_phi);

        for (int i = 0; i < N; ++i) {
            auto row = dofs[static_cast<std::size_t>(i)];
            for (int j = 0; j < N; ++j) {
                auto colf = [&](const Vec<D>& x) {
                    double rho = p1_value<D>(basis, rho_n, x);
                    Vec<D> v{};
                    for (int kk = 0; kk < N; ++kk) v += basis.eval(kk, x) * vel_n[static_cast<std::size_t>(kk)];
                    double mass = basis.eval(j, x) * basis.eval(i, x) * rho * G;
                    double stiff = dot(basis.gradient(j), basis.gradient(i)) * rho * G;
                    double adv = basis.eval(j, x) * dot(v, basis.gradient(i)) * rho * G;
                    double rhot = p1_value<D>(basis, rhot_n, x);
                    double stab = rhot * dot(basis.gradient(j), basis.gradient(i));
                    return mass + tau_m * (stiff - adv) + gamma * tau_m * tau_m * stab;
                };
                A(row, dofs[static_cast<std::size_t>(j)]) += integrate_simplex<D>(coords, colf);
            }
            auto loadf = [&](const Vec<D>& x) {
                double rho = p1_value<D>(basis, rho_n, x);
                double f = p1_value<D>(basis, f_n, x);
                return tau_m * f * basis.eval(i, x) * rho * G;
            };
            b[static_cast<std::size_t>(row)] += integrate_simplex<D>(coords, loadf);
        }

        // Transfer term with previous-step nodal data fetched by key.
        std::array<double, N> up_n{}, rp_n{}, pp_n{};
        bool all_present = true;
        for (int i = 0; i < N; ++i) {
            auto key = band_m.dof_keys[static_cast<std::size_t>(dofs[static_cast<std::size_t>(i)])];
            auto pd = band_prev.dof_of_key(key);
            if (pd < 0) {
                all_present = false;
                continue;
            }
            up_n[static_cast<std::size_t>(i)] = u_prev[static_cast<std::size_t>(pd)];
            rp_n[static_cast<std::size_t>(i)] = band_prev.rho_m[static_cast<std::size_t>(pd)];
            pp_n[static_cast<std::size_t>(i)] = band_prev.phi_m[static_cast<std::size_t>(pd)];
        }
        double rp_max = 0.0;
        for (int i = 0; i < N; ++i) rp_max = std::max(rp_max, rp_n[static_cast<std::size_t>(i)]);
        if (rp_max <= 0.0) continue;
        if (!all_present) throw std::runtime_error("dense oracle: missing transfer dof");
        Vec<D> grad_phi_prev{};
        for (int i = 0; i < N; ++i) grad_phi_prev += pp_n[static_cast<std::size_t>(i)] * basis.gradient(i);
        const double Gp = norm(grad_phi_prev);
        for (int i = 0; i < N; ++i) {
            auto tf = [&](const Vec<D>& x) {
                double up = p1_value<D>(basis, up_n, x);
                double rp = p1_value<D>(basis, rp_n, x);
                return up * basis.eval(i, x) * rp * Gp;
            };
            b[static_cast<std::size_t>(dofs[static_cast<std::size_t>(i)])] +=
                integrate_simplex<D>(coords, tf);
        }
    }
    (void)problem;
}

template void dense_step_system<2>(const BandSpace<2>&, const BandSpace<2>&,
                                   const std::vector<double>&, const LevelSetProblem<2>&, double,
                                   double, DenseMatrix&, std::vector<double>&);
template void dense_step_system<3>(const BandSpace<3>&, const BandSpace<3>&,
                                   const std::vector<double>&, const LevelSetProblem<3>&, double,
                                   double, DenseMatrix&, std::vector<double>&);

template <int D>
void dense_initial_projection(const BandSpace<D>& band, const std::vector<double>& u0_nodal,
                              DenseMatrix& M, std::vector<double>& b) {
    constexpr int N = D + 1;
    const auto& mesh = *band.mesh;
    const std::int64_t n = band.n_dofs();
    M = DenseMatrix(n, n);
    b.assign(static_cast<std::size_t>(n), 0.0);
    for (std::int32_t e : band.band_elements) {
        auto coords = mesh.element_coords(e);
        auto dofs = band.element_dofs(e);
        auto basis = AffineBasis<D>::build(coords);
        std::array<double, N> u0_n;
        for (int i = 0; i < N; ++i)
            u0_n[static_cast<std::size_t>(i)] =
                u0_nodal[static_cast<std::size_t>(dofs[static_cast<std::size_t>(i)])];
        for (int i = 0; i < N; ++i) {
            auto row = dofs[static_cast<std::size_t>(i)];
            for (int j = 0; j < N; ++j) {
                auto mf = [&](const Vec<D>& x) { return basis.eval(i, x) * basis.eval(j, x); };
                M(row, dofs[static_cast<std::size_t>(j)]) += integrate_simplex<D>(coords, mf);
            }
            auto bf = [&](const Vec<D>& x) { return p1_value<D>(basis, u0_n, x) * basis.eval(i, x); };
            b[static_cast<std::size_t>(row)] += integrate_simplex<D>(coords, bf);
        }
    }
}

template void dense_initial_projection<2>(const BandSpace<2>&, const std::vector<double>&,
                                          DenseMatrix&, std::vector<double>&);
template void dense_initial_projection<3>(const BandSpace<3>&, const std::vector<double>&,
                                          DenseMatrix&, std::vector<double>&);

}  // namespace bandfem::oracle
