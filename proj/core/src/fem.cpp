#include "bandfem/fem.hpp"

#include <cmath>
#include <cstring>
#include <thread>

#include "bandfem/exceptions.hpp"

namespace bandfem {

template <int D>
ElementGeometry<D> ElementGeometry<D>::from_coords(const std::array<Vec<D>, D + 1>& v) {
    ElementGeometry<D> g;
    if constexpr (D == 2) {
        double a11 = v[1][0] - v[0][0], a12 = v[2][0] - v[0][0];
        double a21 = v[1][1] - v[0][1], a22 = v[2][1] - v[0][1];
        double det = a11 * a22 - a12 * a21;
        if (det <= 0.0) throw DegenerateElement("element volume not positive");
        g.volume = 0.5 * det;
        g.grad[1] = {a22 / det, -a12 / det};
        g.grad[2] = {-a21 / det, a11 / det};
    } else {
        double a[3][3];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a[i][j] = v[j + 1][i] - v[0][i];
        double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                     a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                     a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        if (det <= 0.0) throw DegenerateElement("element volume not positive");
        g.volume = det / 6.0;
        g.grad[1] = {(a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det,
                     (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det,
                     (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det};
        g.grad[2] = {(a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det,
                     (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det,
                     (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det};
        g.grad[3] = {(a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det,
                     (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det,
                     (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det};
    }
    for (int i = 1; i <= D; ++i) g.grad[0] -= g.grad[i];
    return g;
}

template struct ElementGeometry<2>;
template struct ElementGeometry<3>;

namespace {

template <int D>
double weight_gradient_norm(const ElementGeometry<D>& geo, const std::array<double, D + 1>& phi_n) {
    Vec<D> gp{};
    for (int i = 0; i <= D; ++i) gp += phi_n[static_cast<std::size_t>(i)] * geo.grad[i];
    return norm(gp);
}

}  // namespace

template <int D>
ElementContribution<D> element_contribution(const std::array<Vec<D>, D + 1>& coords,
                                            const std::array<double, D + 1>& rho_n,
                                            const std::array<double, D + 1>& rho_tilde_n,
                                            const std::array<double, D + 1>& phi_n,
                                            const std::array<Vec<D>, D + 1>& vel_n,
                                            const std::array<double, D + 1>& f_n) {
    constexpr int N = D + 1;
    ElementContribution<D> out;
    const auto geo = ElementGeometry<D>::from_coords(coords);
    const double G = weight_gradient_norm(geo, phi_n);

    // Stiffness and stabilization have constant gradients; the affine
    // weights integrate to volume * nodal mean.
    double rho_mean = 0.0, rho_tilde_mean = 0.0, rho_max = 0.0;
    for (int i = 0; i < N; ++i) {
        rho_mean += rho_n[static_cast<std::size_t>(i)];
        rho_tilde_mean += rho_tilde_n[static_cast<std::size_t>(i)];
        rho_max = std::max(rho_max, rho_n[static_cast<std::size_t>(i)]);
    }
    rho_mean /= N;
    rho_tilde_mean /= N;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            double gg = dot(geo.grad[i], geo.grad[j]) * geo.volume;
            out.K[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = gg * rho_mean * G;
            out.S[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = gg * rho_tilde_mean;
        }

    if (rho_max == 0.0) return out;  // only stabilization survives

    const QuadratureRule& rule = simplex_rule(D, 3);
    const double scale = geo.volume / rule.ref_volume() * G;
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto& lam = rule.point(q);
        double rho_q = 0.0, f_q = 0.0;
        Vec<D> v_q{};
        for (int k = 0; k < N; ++k) {
            rho_q += lam[static_cast<std::size_t>(k)] * rho_n[static_cast<std::size_t>(k)];
            f_q += lam[static_cast<std::size_t>(k)] * f_n[static_cast<std::size_t>(k)];
            v_q += lam[static_cast<std::size_t>(k)] * vel_n[static_cast<std::size_t>(k)];
        }
        const double wr = rule.weight(q) * rho_q * scale;
        std::array<double, N> vg;
        for (int i = 0; i < N; ++i) vg[static_cast<std::size_t>(i)] = dot(v_q, geo.grad[i]);
        for (int i = 0; i < N; ++i) {
            const double wli = wr * lam[static_cast<std::size_t>(i)];
            for (int j = 0; j < N; ++j) {
                out.M[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
                    wli * lam[static_cast<std::size_t>(j)];
                out.B[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
                    wr * lam[static_cast<std::size_t>(j)] * vg[static_cast<std::size_t>(i)];
            }
            out.F[static_cast<std::size_t>(i)] += wli * f_q;
        }
    }
    return out;
}

template ElementContribution<2> element_contribution<2>(const std::array<Vec<2>, 3>&,
                                                        const std::array<double, 3>&,
                                                        const std::array<double, 3>&,
                                                        const std::array<double, 3>&,
                                                        const std::array<Vec<2>, 3>&,
                                                        const std::array<double, 3>&);
template ElementContribution<3> element_contribution<3>(const std::array<Vec<3>, 4>&,
                                                        const std::array<double, 4>&,
                                                        const std::array<double, 4>&,
                                                        const std::array<double, 4>&,
                                                        const std::array<Vec<3>, 4>&,
                                                        const std::array<double, 4>&);

template <int D>
std::array<double, D + 1> element_transfer(const std::array<Vec<D>, D + 1>& coords,
                                           const std::array<double, D + 1>& u_prev_n,
                                           const std::array<double, D + 1>& rho_prev_n,
                                           const std::array<double, D + 1>& phi_prev_n) {
    constexpr int N = D + 1;
    std::array<double, N> out{};
    const auto geo = ElementGeometry<D>::from_coords(coords);
    const double G = weight_gradient_norm(geo, phi_prev_n);
    const QuadratureRule& rule = simplex_rule(D, 3);
    const double scale = geo.volume / rule.ref_volume() * G;
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto& lam = rule.point(q);
        double rho_q = 0.0, u_q = 0.0;
        for (int k = 0; k < N; ++k) {
            rho_q += lam[static_cast<std::size_t>(k)] * rho_prev_n[static_cast<std::size_t>(k)];
            u_q += lam[static_cast<std::size_t>(k)] * u_prev_n[static_cast<std::size_t>(k)];
        }
        const double w = rule.weight(q) * rho_q * u_q * scale;
        for (int i = 0; i < N; ++i) out[static_cast<std::size_t>(i)] += w * lam[static_cast<std::size_t>(i)];
    }
    return out;
}

template std::array<double, 3> element_transfer<2>(const std::array<Vec<2>, 3>&,
                                                   const std::array<double, 3>&,
                                                   const std::array<double, 3>&,
                                                   const std::array<double, 3>&);
template std::array<double, 4> element_transfer<3>(const std::array<Vec<3>, 4>&,
                                                   const std::array<double, 4>&,
                                                   const std::array<double, 4>&,
                                                   const std::array<double, 4>&);

namespace {

// Lattice offsets of the vertex stencil induced by the cell split (edges of
// the simplicial complex), including the vertex itself, sorted by key
// delta. Guarantees the CSR pattern covers every element pair.
template <int D>
std::vector<std::array<std::int64_t, D>> stencil_offsets() {
    std::vector<std::array<std::int64_t, D>> offs;
    if constexpr (D == 2) {
        offs = {{-1, -1}, {0, -1}, {-1, 0}, {0, 0}, {1, 0}, {0, 1}, {1, 1}};
    } else {
        offs = {{0, 0, 0}};
        const std::array<std::array<std::int64_t, 3>, 7> dirs = {{{1, 0, 0},
                                                                  {0, 1, 0},
                                                                  {0, 0, 1},
                                                                  {1, 1, 0},
                                                                  {1, 0, 1},
                                                                  {0, 1, 1},
                                                                  {1, 1, 1}}};
        for (const auto& d : dirs) {
            offs.push_back(d);
            offs.push_back({-d[0], -d[1], -d[2]});
        }
    }
    return offs;
}

template <int D>
struct PatternWorkspace {
    std::vector<std::int64_t> offsets;
    std::vector<std::int32_t> cols;
};

// CSR sparsity pattern from the lattice stencil restricted to band DOFs.
template <int D>
PatternWorkspace<D> build_pattern(const BandSpace<D>& band) {
    const auto& grid = band.mesh->grid;
    const std::int64_t nv = grid.verts_per_axis();
    const std::int64_t n_dofs = band.n_dofs();

    std::vector<std::int32_t> lat(static_cast<std::size_t>(grid.n_verts_total()), -1);
    for (std::int64_t d = 0; d < n_dofs; ++d)
        lat[static_cast<std::size_t>(band.dof_keys[static_cast<std::size_t>(d)])] =
            static_cast<std::int32_t>(d);

    auto offs = stencil_offsets<D>();
    std::vector<std::pair<std::int64_t, std::array<std::int64_t, D>>> deltas;
    deltas.reserve(offs.size());
    for (const auto& o : offs) {
        std::int64_t delta = 0;
        for (int i = D - 1; i >= 0; --i) delta = delta * nv + o[i];
        deltas.push_back({delta, o});
    }
    std::sort(deltas.begin(), deltas.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    PatternWorkspace<D> pw;
    pw.offsets.assign(static_cast<std::size_t>(n_dofs) + 1, 0);
    pw.cols.reserve(static_cast<std::size_t>(n_dofs) * deltas.size());
    for (std::int64_t d = 0; d < n_dofs; ++d) {
        auto iv = grid.vertex_lattice(band.dof_keys[static_cast<std::size_t>(d)]);
        for (const auto& [delta, o] : deltas) {
            bool inside = true;
            for (int i = 0; i < D; ++i) {
                std::int64_t c = iv[static_cast<std::size_t>(i)] + o[static_cast<std::size_t>(i)];
                inside = inside && c >= 0 && c < nv;
            }
            if (!inside) continue;
            std::int64_t key = static_cast<std::int64_t>(band.dof_keys[static_cast<std::size_t>(d)]) + delta;
            std::int32_t nd = lat[static_cast<std::size_t>(key)];
            if (nd >= 0) pw.cols.push_back(nd);
        }
        pw.offsets[static_cast<std::size_t>(d) + 1] = static_cast<std::int64_t>(pw.cols.size());
    }
    return pw;
}

inline void scatter_row(const std::vector<std::int64_t>& offsets,
                        const std::vector<std::int32_t>& cols, std::vector<double>& vals,
                        std::int32_t row, std::int32_t col, double v) {
    for (std::int64_t k = offsets[static_cast<std::size_t>(row)];
         k < offsets[static_cast<std::size_t>(row) + 1]; ++k) {
        if (cols[static_cast<std::size_t>(k)] == col) {
            vals[static_cast<std::size_t>(k)] += v;
            return;
        }
    }
    throw Error("assembly: entry outside sparsity pattern");
}

}  // namespace

template <int D>
std::pair<SparseMatrix, std::vector<double>> assemble_step_system(
    const BandSpace<D>& band_m, const BandSpace<D>& band_prev, const std::vector<double>& u_prev,
    const PhaseFieldParams& params, double tau_m, int n_threads, AssemblyStats* stats) {
    constexpr int N = D + 1;
    if (!band_m.mesh->grid.same_grid(band_prev.mesh->grid))
        throw GridMismatch("assemble_step_system: band spaces from different grids");
    if (static_cast<std::int64_t>(u_prev.size()) != band_prev.n_dofs())
        throw DimensionMismatch("assemble_step_system: u_prev length mismatch");

    const std::int64_t n = band_m.n_dofs();
    const auto& mesh = *band_m.mesh;

    // Previous-step data on the current DOF set, joined by lattice key.
    // DOFs absent from the previous band carry zero previous weight.
    std::vector<double> u_prev_on(static_cast<std::size_t>(n), 0.0);
    std::vector<double> rho_prev_on(static_cast<std::size_t>(n), 0.0);
    std::vector<double> phi_prev_on(static_cast<std::size_t>(n), 0.0);
    std::vector<std::uint8_t> present(static_cast<std::size_t>(n), 0);
    {
        std::size_t i = 0, j = 0;
        const auto& ka = band_m.dof_keys;
        const auto& kb = band_prev.dof_keys;
        while (i < ka.size() && j < kb.size()) {
            if (ka[i] < kb[j])
                ++i;
            else if (ka[i] > kb[j])
                ++j;
            else {
                u_prev_on[i] = u_prev[j];
                rho_prev_on[i] = band_prev.rho_m[j];
                phi_prev_on[i] = band_prev.phi_m[j];
                present[i] = 1;
                ++i;
                ++j;
            }
        }
    }

    auto pw = build_pattern(band_m);
    const std::size_t nnz = pw.cols.size();
    std::vector<double> b(static_cast<std::size_t>(n), 0.0);

    const auto& elems = band_m.band_elements;
    std::int64_t transfer_count = 0;

    auto assemble_range = [&](std::size_t e0, std::size_t e1, std::vector<double>& vals,
                              std::vector<double>& rhs, std::int64_t& tcount) {
        for (std::size_t ei = e0; ei < e1; ++ei) {
            std::int64_t e = elems[ei];
            auto coords = mesh.element_coords(e);
            auto dofs = band_m.element_dofs(e);
            std::array<double, N> rho_n, rho_tilde_n, phi_n, f_n;
            std::array<Vec<D>, N> vel_n;
            for (int i = 0; i < N; ++i) {
                auto d = static_cast<std::size_t>(dofs[static_cast<std::size_t>(i)]);
                rho_n[static_cast<std::size_t>(i)] = band_m.rho_m[d];
                rho_tilde_n[static_cast<std::size_t>(i)] = band_m.rho_tilde_m[d];
                phi_n[static_cast<std::size_t>(i)] = band_m.phi_m[d];
                vel_n[static_cast<std::size_t>(i)] = band_m.velocity_m[d];
                f_n[static_cast<std::size_t>(i)] = band_m.f_m[d];
            }
            auto c = element_contribution<D>(coords, rho_n, rho_tilde_n, phi_n, vel_n, f_n);
            auto A_loc = c.combined(params.gamma, tau_m);
            for (int i = 0; i < N; ++i) {
                auto row = dofs[static_cast<std::size_t>(i)];
                for (int j = 0; j < N; ++j)
                    scatter_row(pw.offsets, pw.cols, vals, row, dofs[static_cast<std::size_t>(j)],
                                A_loc[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
                rhs[static_cast<std::size_t>(row)] += tau_m * c.F[static_cast<std::size_t>(i)];
            }

            // Transfer term over elements shared with the previous band.
            std::array<double, N> up_n, rp_n, pp_n;
            double rp_max = 0.0;
            bool all_present = true;
            for (int i = 0; i < N; ++i) {
                auto d = static_cast<std::size_t>(dofs[static_cast<std::size_t>(i)]);
                up_n[static_cast<std::size_t>(i)] = u_prev_on[d];
                rp_n[static_cast<std::size_t>(i)] = rho_prev_on[d];
                pp_n[static_cast<std::size_t>(i)] = phi_prev_on[d];
                rp_max = std::max(rp_max, rho_prev_on[d]);
                all_present = all_present && present[d];
            }
            if (rp_max > 0.0) {
                if (!all_present)
                    throw MissingTransferDof(
                        "transfer element with nonzero previous weight references a vertex "
                        "absent from the previous band");
                auto tr = element_transfer<D>(coords, up_n, rp_n, pp_n);
                for (int i = 0; i < N; ++i)
                    rhs[static_cast<std::size_t>(dofs[static_cast<std::size_t>(i)])] +=
                        tr[static_cast<std::size_t>(i)];
                ++tcount;
            }
        }
    };

    std::vector<double> vals(nnz, 0.0);
    if (n_threads <= 1 || elems.size() < 2048) {
        assemble_range(0, elems.size(), vals, b, transfer_count);
    } else {
        const int T = n_threads;
        std::vector<std::vector<double>> tvals(static_cast<std::size_t>(T));
        std::vector<std::vector<double>> trhs(static_cast<std::size_t>(T));
        std::vector<std::int64_t> tcounts(static_cast<std::size_t>(T), 0);
        std::vector<std::thread> workers;
        std::size_t chunk = (elems.size() + static_cast<std::size_t>(T) - 1) / static_cast<std::size_t>(T);
        for (int t = 0; t < T; ++t) {
            std::size_t e0 = static_cast<std::size_t>(t) * chunk;
            std::size_t e1 = std::min(elems.size(), e0 + chunk);
            if (e0 >= e1) break;
            auto& tv = tvals[static_cast<std::size_t>(t)];
            auto& tr = trhs[static_cast<std::size_t>(t)];
            tv.assign(nnz, 0.0);
            tr.assign(static_cast<std::size_t>(n), 0.0);
            workers.emplace_back([&, e0, e1, t]() {
                assemble_range(e0, e1, tvals[static_cast<std::size_t>(t)],
                               trhs[static_cast<std::size_t>(t)], tcounts[static_cast<std::size_t>(t)]);
            });
        }
        for (auto& w : workers) w.join();
        for (std::size_t t = 0; t < tvals.size(); ++t) {
            if (tvals[t].empty()) continue;
            for (std::size_t k = 0; k < nnz; ++k) vals[k] += tvals[t][k];
            for (std::size_t k = 0; k < b.size(); ++k) b[k] += trhs[t][k];
            transfer_count += tcounts[t];
        }
    }

    if (stats) {
        stats->n_band_elements = static_cast<std::int64_t>(elems.size());
        stats->n_transfer_elements = transfer_count;
    }
    SparseMatrix A(n, n, std::move(pw.offsets), std::move(pw.cols), std::move(vals));
    return {std::move(A), std::move(b)};
}

template std::pair<SparseMatrix, std::vector<double>> assemble_step_system<2>(
    const BandSpace<2>&, const BandSpace<2>&, const std::vector<double>&, const PhaseFieldParams&,
    double, int, AssemblyStats*);
template std::pair<SparseMatrix, std::vector<double>> assemble_step_system<3>(
    const BandSpace<3>&, const BandSpace<3>&, const std::vector<double>&, const PhaseFieldParams&,
    double, int, AssemblyStats*);

template <int D>
std::pair<SparseMatrix, std::vector<double>> assemble_initial_projection(
    const BandSpace<D>& band, const std::vector<double>& u0_nodal, int n_threads) {
    constexpr int N = D + 1;
    (void)n_threads;
    if (static_cast<std::int64_t>(u0_nodal.size()) != band.n_dofs())
        throw DimensionMismatch("assemble_initial_projection: nodal vector length mismatch");
    const std::int64_t n = band.n_dofs();
    const auto& mesh = *band.mesh;
    auto pw = build_pattern(band);
    std::vector<double> vals(pw.cols.size(), 0.0);
    std::vector<double> b(static_cast<std::size_t>(n), 0.0);
    const QuadratureRule& rule = simplex_rule(D, 3);

    for (std::int64_t e : band.band_elements) {
        auto coords = mesh.element_coords(e);
        auto dofs = band.element_dofs(e);
        const auto geo = ElementGeometry<D>::from_coords(coords);
        const double scale = geo.volume / rule.ref_volume();
        std::array<std::array<double, N>, N> M{};
        std::array<double, N> rhs{};
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const auto& lam = rule.point(q);
            double u_q = 0.0;
            for (int k = 0; k < N; ++k)
                u_q += lam[static_cast<std::size_t>(k)] *
                       u0_nodal[static_cast<std::size_t>(dofs[static_cast<std::size_t>(k)])];
            const double w = rule.weight(q) * scale;
            for (int i = 0; i < N; ++i) {
                const double wli = w * lam[static_cast<std::size_t>(i)];
                for (int j = 0; j < N; ++j)
                    M[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
                        wli * lam[static_cast<std::size_t>(j)];
                rhs[static_cast<std::size_t>(i)] += wli * u_q;
            }
        }
        for (int i = 0; i < N; ++i) {
            auto row = dofs[static_cast<std::size_t>(i)];
            for (int j = 0; j < N; ++j)
                scatter_row(pw.offsets, pw.cols, vals, row, dofs[static_cast<std::size_t>(j)],
                            M[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
            b[static_cast<std::size_t>(row)] += rhs[static_cast<std::size_t>(i)];
        }
    }
    SparseMatrix M(n, n, std::move(pw.offsets), std::move(pw.cols), std::move(vals));
    return {std::move(M), std::move(b)};
}

template std::pair<SparseMatrix, std::vector<double>> assemble_initial_projection<2>(
    const BandSpace<2>&, const std::vector<double>&, int);
template std::pair<SparseMatrix, std::vector<double>> assemble_initial_projection<3>(
    const BandSpace<3>&, const std::vector<double>&, int);

template <int D>
static std::pair<double, double> weighted_mass_energy(const BandSpace<D>& band,
                                                      const std::vector<double>& u) {
    constexpr int N = D + 1;
    const auto& mesh = *band.mesh;
    const QuadratureRule& rule = simplex_rule(D, 3);
    double mass = 0.0, energy = 0.0;
    for (std::int64_t e : band.band_elements) {
        auto dofs = band.element_dofs(e);
        std::array<double, N> rho_n, phi_n, u_n;
        double rho_max = 0.0;
        for (int i = 0; i < N; ++i) {
            auto d = static_cast<std::size_t>(dofs[static_cast<std::size_t>(i)]);
            rho_n[static_cast<std::size_t>(i)] = band.rho_m[d];
            phi_n[static_cast<std::size_t>(i)] = band.phi_m[d];
            u_n[static_cast<std::size_t>(i)] = u[d];
            rho_max = std::max(rho_max, band.rho_m[d]);
        }
        if (rho_max == 0.0) continue;
        const auto geo = ElementGeometry<D>::from_coords(mesh.element_coords(e));
        const double G = weight_gradient_norm(geo, phi_n);
        const double scale = geo.volume / rule.ref_volume() * G;
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const auto& lam = rule.point(q);
            double rho_q = 0.0, u_q = 0.0;
            for (int k = 0; k < N; ++k) {
                rho_q += lam[static_cast<std::size_t>(k)] * rho_n[static_cast<std::size_t>(k)];
                u_q += lam[static_cast<std::size_t>(k)] * u_n[static_cast<std::size_t>(k)];
            }
            mass += rule.weight(q) * scale * rho_q * u_q;
            energy += rule.weight(q) * scale * rho_q * u_q * u_q;
        }
    }
    return {mass, energy};
}

template <int D>
double weighted_mass(const BandSpace<D>& band, const std::vector<double>& u) {
    return weighted_mass_energy(band, u).first;
}
template <int D>
double weighted_energy(const BandSpace<D>& band, const std::vector<double>& u) {
    return weighted_mass_energy(band, u).second;
}

template double weighted_mass<2>(const BandSpace<2>&, const std::vector<double>&);
template double weighted_mass<3>(const BandSpace<3>&, const std::vector<double>&);
template double weighted_energy<2>(const BandSpace<2>&, const std::vector<double>&);
template double weighted_energy<3>(const BandSpace<3>&, const std::vector<double>&);

}  // namespace bandfem
