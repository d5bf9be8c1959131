#ifndef BANDFEM_LEVELSET_HPP
#define BANDFEM_LEVELSET_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <string>

#include "bandfem/exceptions.hpp"
#include "bandfem/vec.hpp"

namespace bandfem {

enum class ProblemId { Ex1, Ex2, Ex3, Ex4 };

ProblemId problem_id_from_string(const std::string& s);
std::string to_string(ProblemId id);
int problem_dim(ProblemId id);

// Sampled bounds on the level-set function over the space-time band:
// 0 < c0_est <= |grad phi| <= c1_est and |D^2 phi|, |phi_t|, |phi_tt| <= c2_est.
struct BandRegularityReport {
    double c0_est = 0.0;
    double c1_est = 0.0;
    double c2_est = 0.0;
    int sample_count = 0;
};

// Analytic description of one benchmark problem: level set of the moving
// circle/sphere, ambient velocity extension, data and exact solution. All
// member functions are pure; instances are safe to share across threads.
template <int D>
class LevelSetProblem {
public:
    virtual ~LevelSetProblem() = default;

    virtual ProblemId id() const = 0;
    static constexpr int dim = D;

    virtual Box<D> domain() const = 0;
    virtual double final_time() const { return 0.1; }

    virtual double phi(const Vec<D>& x, double t) const = 0;
    virtual Vec<D> grad_phi(const Vec<D>& x, double t) const = 0;
    virtual double phi_t(const Vec<D>& x, double t) const = 0;
    virtual double phi_tt(const Vec<D>& x, double t) const = 0;
    virtual Mat<D> hessian_phi(const Vec<D>& x, double t) const = 0;

    virtual Vec<D> velocity(const Vec<D>& x, double t) const = 0;
    virtual double source(const Vec<D>& /*x*/, double /*t*/) const { return 0.0; }
    virtual double u_exact(const Vec<D>& x, double t) const = 0;
    virtual Vec<D> grad_u_exact(const Vec<D>& x, double t) const = 0;  // ambient gradient
    virtual double u0(const Vec<D>& x) const = 0;

    // The moving surface is a circle/sphere; center and radius drive the
    // analytic closest-point projection.
    virtual Vec<D> surface_center(double t) const = 0;
    virtual double surface_radius(double t) const = 0;

    // Closest point on Gamma(t). The default is the exact radial formula
    // for the circle/sphere families; other level sets override.
    virtual Vec<D> project_to_surface(const Vec<D>& x, double t) const {
        Vec<D> c = surface_center(t);
        Vec<D> d = x - c;
        double r = norm(d);
        if (r < 1e-13)
            throw DegeneratePoint("closest_point: point coincides with the surface center");
        double scale = surface_radius(t) / r;
        return c + scale * d;
    }

    // Tangential gradient of the exact solution: ambient gradient projected
    // with the exact normal grad phi / |grad phi|.
    Vec<D> grad_gamma_u_exact(const Vec<D>& x, double t) const {
        Vec<D> g = grad_u_exact(x, t);
        Vec<D> n = grad_phi(x, t);
        double nn = norm(n);
        n *= 1.0 / nn;
        double gn = dot(g, n);
        for (int i = 0; i < D; ++i) g[i] -= gn * n[i];
        return g;
    }

    // Domain folding for problems solved on a symmetric subdomain (identity
    // for all but the quarter-plane setup). Returns the representative point
    // and per-axis signs so that gradients can be unfolded.
    virtual Vec<D> fold(const Vec<D>& x, std::array<double, D>& signs) const {
        for (int i = 0; i < D; ++i) signs[i] = 1.0;
        return x;
    }

    // Boundary faces of the domain box that the band may legitimately touch
    // (symmetry faces with natural boundary conditions).
    virtual std::array<bool, D> symmetric_lo_faces() const { return {}; }
    virtual std::array<bool, D> symmetric_hi_faces() const { return {}; }
};

// Closest point on Gamma(t). Throws DegeneratePoint where the projection
// is undefined (e.g. the center of a circle).
template <int D>
Vec<D> closest_point(const LevelSetProblem<D>& p, const Vec<D>& x, double t) {
    return p.project_to_surface(x, t);
}

// Generic damped-Newton fallback on the characterizing conditions
// phi(p)=0, x - p parallel to grad phi(p). Not on the benchmark path.
template <int D>
Vec<D> closest_point_newton(const LevelSetProblem<D>& p, const Vec<D>& x, double t,
                            int max_iters = 50);

enum class SurfaceField { Velocity, Source, U0, UExact };

// Scalar surface data evaluated at the closest point (constant in the
// normal direction for the benchmark families).
template <int D>
double extend_scalar_from_surface(const LevelSetProblem<D>& p, SurfaceField f, const Vec<D>& x,
                                  double t) {
    Vec<D> q = closest_point(p, x, t);
    switch (f) {
        case SurfaceField::Source: return p.source(q, t);
        case SurfaceField::U0: return p.u0(q);
        case SurfaceField::UExact: return p.u_exact(q, t);
        default: throw Error("extend_scalar_from_surface: vector field requested");
    }
}

template <int D>
Vec<D> extend_velocity_from_surface(const LevelSetProblem<D>& p, const Vec<D>& x, double t) {
    return p.velocity(closest_point(p, x, t), t);
}

// I(t) = int_0^t r(s)^-2 ds for the expanding/collapsing sphere family,
// by cached adaptive Simpson quadrature (absolute tolerance 1e-12).
double exact_time_integral_ex4(double t);

// Min/max of |grad phi| and max of |D^2 phi|, |phi_t|, |phi_tt| over
// quasi-random samples of the space-time band {|phi| < 3 eps pi / 2}.
template <int D>
BandRegularityReport estimate_band_constants(const LevelSetProblem<D>& p, double eps,
                                             int n_samples, std::uint64_t seed = 0);

std::shared_ptr<const LevelSetProblem<2>> make_problem_2d(ProblemId id);
std::shared_ptr<const LevelSetProblem<3>> make_problem_3d(ProblemId id);

}  // namespace bandfem

#endif
