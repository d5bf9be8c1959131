#include "bandfem/errors.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "bandfem/fem.hpp"
#include "bandfem/quadrature.hpp"

namespace bandfem {

template <int D>
std::pair<double, double> band_errors_step(const BandSpace<D>& band, const std::vector<double>& u,
                                           const LevelSetProblem<D>& problem) {
    constexpr int N = D + 1;
    const auto& mesh = *band.mesh;
    const QuadratureRule& rule = simplex_rule(D, 5);

    // Nodal closest-point extension of the exact solution where weighted
    // terms can see it.
    std::vector<double> uhat(static_cast<std::size_t>(band.n_dofs()), 0.0);
    for (std::int64_t d = 0; d < band.n_dofs(); ++d) {
        if (!band.data_mask[static_cast<std::size_t>(d)]) continue;
        const Vec<D>& x = mesh.vertex_coords[static_cast<std::size_t>(band.dof_to_vert[static_cast<std::size_t>(d)])];
        try {
            uhat[static_cast<std::size_t>(d)] =
                problem.u_exact(closest_point(problem, x, band.t), band.t);
        } catch (const DegeneratePoint&) {
        }
    }

    double e1 = 0.0, e2 = 0.0;
    for (std::int64_t e : band.band_elements) {
        auto dofs = band.element_dofs(e);
        std::array<double, N> diff_n, rho_n, phi_n;
        double rho_max = 0.0, rho_mean = 0.0;
        for (int i = 0; i < N; ++i) {
            auto d = static_cast<std::size_t>(dofs[static_cast<std::size_t>(i)]);
            diff_n[static_cast<std::size_t>(i)] = uhat[d] - u[d];
            rho_n[static_cast<std::size_t>(i)] = band.rho_m[d];
            phi_n[static_cast<std::size_t>(i)] = band.phi_m[d];
            rho_max = std::max(rho_max, band.rho_m[d]);
            rho_mean += band.rho_m[d];
        }
        if (rho_max == 0.0) continue;
        rho_mean /= N;
        const auto geo = ElementGeometry<D>::from_coords(mesh.element_coords(e));
        Vec<D> gphi{}, gdiff{};
        for (int i = 0; i < N; ++i) {
            gphi += phi_n[static_cast<std::size_t>(i)] * geo.grad[i];
            gdiff += diff_n[static_cast<std::size_t>(i)] * geo.grad[i];
        }
        const double G = norm(gphi);
        e2 += norm_sq(gdiff) * rho_mean * G * geo.volume;
        const double scale = geo.volume / rule.ref_volume() * G;
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const auto& lam = rule.point(q);
            double d_q = 0.0, rho_q = 0.0;
            for (int k = 0; k < N; ++k) {
                d_q += lam[static_cast<std::size_t>(k)] * diff_n[static_cast<std::size_t>(k)];
                rho_q += lam[static_cast<std::size_t>(k)] * rho_n[static_cast<std::size_t>(k)];
            }
            e1 += rule.weight(q) * scale * rho_q * d_q * d_q;
        }
    }
    const double factor = 2.0 / (band.params.eps * M_PI);
    return {factor * e1, factor * e2};
}

template std::pair<double, double> band_errors_step<2>(const BandSpace<2>&,
                                                       const std::vector<double>&,
                                                       const LevelSetProblem<2>&);
template std::pair<double, double> band_errors_step<3>(const BandSpace<3>&,
                                                       const std::vector<double>&,
                                                       const LevelSetProblem<3>&);

namespace {

template <int D>
void surface_point_update(const BandSpace<D>& band, const std::vector<double>& u,
                          const LevelSetProblem<D>& problem, const Vec<D>& x, double w,
                          SurfaceErrorSample& acc) {
    std::array<double, D> signs{};
    Vec<D> xf = problem.fold(x, signs);
    auto lp = band.mesh->locate_point(xf);
    if (!band.elem_in_band[static_cast<std::size_t>(lp.element)])
        throw PointNotCovered("surface quadrature point outside the band");

    double uh = band.eval(lp, u);
    double ue = problem.u_exact(xf, band.t);
    acc.e3 += w * (ue - uh) * (ue - uh);

    Vec<D> gh = band.eval_gradient(lp.element, u);
    Vec<D> nu = problem.grad_phi(xf, band.t);
    nu *= 1.0 / norm(nu);
    double gn = dot(gh, nu);
    for (int i = 0; i < D; ++i) gh[i] -= gn * nu[i];
    Vec<D> ge = problem.grad_gamma_u_exact(xf, band.t);
    acc.e4 += w * norm_sq(ge - gh);

    acc.min_rho_tilde = std::min(acc.min_rho_tilde, band.eval(lp, band.rho_tilde_m));
}

}  // namespace

SurfaceErrorSample surface_errors_step_2d(const BandSpace<2>& band, const std::vector<double>& u,
                                          const LevelSetProblem<2>& problem, int L) {
    SurfaceErrorSample acc;
    acc.min_rho_tilde = std::numeric_limits<double>::infinity();
    const Vec<2> c = problem.surface_center(band.t);
    const double r = problem.surface_radius(band.t);
    const double w = 2.0 * M_PI / static_cast<double>(L);
    for (int l = 0; l < L; ++l) {
        double th = 2.0 * M_PI * static_cast<double>(l) / static_cast<double>(L);
        Vec<2> x = {c[0] + r * std::cos(th), c[1] + r * std::sin(th)};
        surface_point_update(band, u, problem, x, w, acc);
    }
    return acc;
}

SurfaceErrorSample surface_errors_step_3d(const BandSpace<3>& band, const std::vector<double>& u,
                                          const LevelSetProblem<3>& problem, int L) {
    SurfaceErrorSample acc;
    acc.min_rho_tilde = std::numeric_limits<double>::infinity();
    const Vec<3> c = problem.surface_center(band.t);
    const double r = problem.surface_radius(band.t);
    const double base = (M_PI / static_cast<double>(L)) * (M_PI / static_cast<double>(L));
    for (int k = 0; k < 2 * L; ++k) {
        double ph = M_PI * static_cast<double>(k) / static_cast<double>(L);
        for (int l = 0; l < L; ++l) {
            double th = M_PI * static_cast<double>(l) / static_cast<double>(L);
            double w = base * std::sin(th);
            if (w == 0.0) continue;
            Vec<3> x = {c[0] + r * std::cos(ph) * std::sin(th),
                        c[1] + r * std::sin(ph) * std::sin(th), c[2] + r * std::cos(th)};
            surface_point_update(band, u, problem, x, w, acc);
        }
    }
    return acc;
}

std::vector<double> eoc(const std::vector<double>& errors, const std::vector<double>& hs) {
    if (errors.size() != hs.size() || errors.size() < 2)
        throw Error("eoc: need matching error/h sequences with at least two levels");
    std::vector<double> rates;
    for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
        if (errors[k] <= 0.0 || errors[k + 1] <= 0.0)
            throw NonpositiveError("eoc: errors must be positive");
        rates.push_back(std::log(errors[k] / errors[k + 1]) / std::log(hs[k] / hs[k + 1]));
    }
    return rates;
}

void ConvergenceTable::compute_rates() {
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (int j = 0; j < 4; ++j) rows[r].rate[static_cast<std::size_t>(j)].reset();
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].failed || rows[r - 1].failed) continue;
        for (int j = 0; j < 4; ++j) {
            double e0 = rows[r - 1].err[static_cast<std::size_t>(j)];
            double e1 = rows[r].err[static_cast<std::size_t>(j)];
            if (e0 > 0.0 && e1 > 0.0)
                rows[r].rate[static_cast<std::size_t>(j)] =
                    std::log(e0 / e1) / std::log(rows[r - 1].h / rows[r].h);
        }
    }
}

namespace {

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.5e", v);
    return buf;
}

std::string rate_str(const std::optional<double>& r) {
    if (!r) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", *r);
    return buf;
}

}  // namespace

void ConvergenceTable::to_csv(std::ostream& os) const {
    os << "h,eps,E1,eoc1,E2,eoc2,E3,eoc3,E4,eoc4\n";
    for (const auto& row : rows) {
        if (row.failed) {
            os << "# level h=" << sci(row.h) << " failed: " << row.note << "\n";
            continue;
        }
        os << sci(row.h) << "," << sci(row.eps);
        for (int j = 0; j < 4; ++j)
            os << "," << sci(row.err[static_cast<std::size_t>(j)]) << ","
               << rate_str(row.rate[static_cast<std::size_t>(j)]);
        os << "\n";
    }
}

void ConvergenceTable::to_markdown(std::ostream& os) const {
    auto pad = [](const std::string& s, std::size_t w) {
        return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
    };
    const std::size_t wv = 11, wr = 6;
    os << "| " << pad("h", wv) << " | " << pad("eps", wv);
    for (const char* e : {"E1", "E2", "E3", "E4"})
        os << " | " << pad(e, wv) << " | " << pad(std::string("eoc") + (e + 1), wr);
    os << " |\n";
    os << "|" << std::string(wv + 2, '-');
    os << "|" << std::string(wv + 2, '-');
    for (int j = 0; j < 4; ++j)
        os << "|" << std::string(wv + 2, '-') << "|" << std::string(wr + 2, '-');
    os << "|\n";
    for (const auto& row : rows) {
        if (row.failed) {
            os << "| " << pad(sci(row.h), wv) << " | failed: " << row.note << " |\n";
            continue;
        }
        os << "| " << pad(sci(row.h), wv) << " | " << pad(sci(row.eps), wv);
        for (int j = 0; j < 4; ++j)
            os << " | " << pad(sci(row.err[static_cast<std::size_t>(j)]), wv) << " | "
               << pad(rate_str(row.rate[static_cast<std::size_t>(j)]), wr);
        os << " |\n";
    }
}

}  // namespace bandfem
