#include "bandfem/levelset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

namespace bandfem {

ProblemId problem_id_from_string(const std::string& s) {
    if (s == "ex1") return ProblemId::Ex1;
    if (s == "ex2") return ProblemId::Ex2;
    if (s == "ex3") return ProblemId::Ex3;
    if (s == "ex4") return ProblemId::Ex4;
    throw ConfigError("unknown problem id '" + s + "' (expected ex1..ex4)", "problem.id");
}

std::string to_string(ProblemId id) {
    switch (id) {
        case ProblemId::Ex1: return "ex1";
        case ProblemId::Ex2: return "ex2";
        case ProblemId::Ex3: return "ex3";
        case ProblemId::Ex4: return "ex4";
    }
    return "?";
}

int problem_dim(ProblemId id) { return id == ProblemId::Ex4 ? 3 : 2; }

namespace {

// Stationary unit circle, u = 1/2 e^{-4t} (x1^2 - x2^2), v = 0.
// Solved on the quarter domain with natural conditions on the symmetry axes.
class Ex1Problem final : public LevelSetProblem<2> {
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
    double u_exact(const Vec<2>& x, double t) const override {
        return 0.5 * std::exp(-4.0 * t) * (x[0] * x[0] - x[1] * x[1]);
    }
    Vec<2> grad_u_exact(const Vec<2>& x, double t) const override {
        double e = std::exp(-4.0 * t);
        return {e * x[0], -e * x[1]};
    }
    double u0(const Vec<2>& x) const override { return 0.5 * (x[0] * x[0] - x[1] * x[1]); }

    Vec<2> surface_center(double) const override { return {0.0, 0.0}; }
    double surface_radius(double) const override { return 1.0; }

    Vec<2> fold(const Vec<2>& x, std::array<double, 2>& signs) const override {
        signs = {x[0] < 0.0 ? -1.0 : 1.0, x[1] < 0.0 ? -1.0 : 1.0};
        return {std::abs(x[0]), std::abs(x[1])};
    }
    std::array<bool, 2> symmetric_lo_faces() const override { return {true, true}; }
};

// Stationary unit circle with rotational transport,
// u = e^{-4t} [x1 x2 cos(pi t) + 1/2 (x1^2 - x2^2) sin(pi t)].
class Ex2Problem final : public LevelSetProblem<2> {
public:
    ProblemId id() const override { return ProblemId::Ex2; }
    Box<2> domain() const override { return {{-2.4, -2.4}, {2.4, 2.4}}; }

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

    Vec<2> velocity(const Vec<2>& x, double) const override {
        return {0.5 * M_PI * x[1], -0.5 * M_PI * x[0]};
    }
    double u_exact(const Vec<2>& x, double t) const override {
        return std::exp(-4.0 * t) * (x[0] * x[1] * std::cos(M_PI * t) +
                                     0.5 * (x[0] * x[0] - x[1] * x[1]) * std::sin(M_PI * t));
    }
    Vec<2> grad_u_exact(const Vec<2>& x, double t) const override {
        double e = std::exp(-4.0 * t);
        double c = std::cos(M_PI * t), s = std::sin(M_PI * t);
        return {e * (c * x[1] + s * x[0]), e * (c * x[0] - s * x[1])};
    }
    double u0(const Vec<2>& x) const override { return x[0] * x[1]; }

    Vec<2> surface_center(double) const override { return {0.0, 0.0}; }
    double surface_radius(double) const override { return 1.0; }
};

// Unit circle translating with speed 2, u = e^{-4t} (x1 + 1/2 - 2t) x2.
class Ex3Problem final : public LevelSetProblem<2> {
public:
    ProblemId id() const override { return ProblemId::Ex3; }
    Box<2> domain() const override { return {{-2.4, -2.4}, {2.4, 2.4}}; }

    double phi(const Vec<2>& x, double t) const override {
        double a = x[0] + 0.5 - 2.0 * t;
        return a * a + x[1] * x[1] - 1.0;
    }
    Vec<2> grad_phi(const Vec<2>& x, double t) const override {
        return {2.0 * (x[0] + 0.5 - 2.0 * t), 2.0 * x[1]};
    }
    double phi_t(const Vec<2>& x, double t) const override {
        return -4.0 * (x[0] + 0.5 - 2.0 * t);
    }
    double phi_tt(const Vec<2>&, double) const override { return 8.0; }
    Mat<2> hessian_phi(const Vec<2>&, double) const override {
        Mat<2> h;
        h(0, 0) = h(1, 1) = 2.0;
        return h;
    }

    Vec<2> velocity(const Vec<2>&, double) const override { return {2.0, 0.0}; }
    double u_exact(const Vec<2>& x, double t) const override {
        return std::exp(-4.0 * t) * (x[0] + 0.5 - 2.0 * t) * x[1];
    }
    Vec<2> grad_u_exact(const Vec<2>& x, double t) const override {
        double e = std::exp(-4.0 * t);
        return {e * x[1], e * (x[0] + 0.5 - 2.0 * t)};
    }
    double u0(const Vec<2>& x) const override { return (x[0] + 0.5) * x[1]; }

    Vec<2> surface_center(double t) const override { return {2.0 * t - 0.5, 0.0}; }
    double surface_radius(double) const override { return 1.0; }
};

// Expanding and collapsing sphere of radius r(t) = 1 + sin^2(pi t),
// u = 2/(r^2 |x|^2) e^{-6 I(t)} x1 x3. The ambient velocity extension
// r r' x / |x|^2 matches the surface velocity on Gamma(t) and keeps the
// level-set advection identity exact throughout the band.
class Ex4Problem final : public LevelSetProblem<3> {
public:
    ProblemId id() const override { return ProblemId::Ex4; }
    Box<3> domain() const override { return {{-4.0, -4.0, -4.0}, {4.0, 4.0, 4.0}}; }

    static double r(double t) {
        double s = std::sin(M_PI * t);
        return 1.0 + s * s;
    }
    static double r_prime(double t) { return M_PI * std::sin(2.0 * M_PI * t); }
    static double r_prime2(double t) { return 2.0 * M_PI * M_PI * std::cos(2.0 * M_PI * t); }

    double phi(const Vec<3>& x, double t) const override {
        double rt = r(t);
        return norm_sq(x) - rt * rt;
    }
    Vec<3> grad_phi(const Vec<3>& x, double) const override {
        return {2.0 * x[0], 2.0 * x[1], 2.0 * x[2]};
    }
    double phi_t(const Vec<3>&, double t) const override { return -2.0 * r(t) * r_prime(t); }
    double phi_tt(const Vec<3>&, double t) const override {
        double rp = r_prime(t);
        return -2.0 * (rp * rp + r(t) * r_prime2(t));
    }
    Mat<3> hessian_phi(const Vec<3>&, double) const override {
        Mat<3> h;
        h(0, 0) = h(1, 1) = h(2, 2) = 2.0;
        return h;
    }

    Vec<3> velocity(const Vec<3>& x, double t) const override {
        double s = r(t) * r_prime(t) / norm_sq(x);
        return s * x;
    }
    double u_exact(const Vec<3>& x, double t) const override {
        double rt = r(t);
        return 2.0 / (rt * rt * norm_sq(x)) * std::exp(-6.0 * exact_time_integral_ex4(t)) *
               x[0] * x[2];
    }
    Vec<3> grad_u_exact(const Vec<3>& x, double t) const override {
        double rt = r(t);
        double n2 = norm_sq(x);
        double c = 2.0 / (rt * rt * n2) * std::exp(-6.0 * exact_time_integral_ex4(t));
        double q = 2.0 * x[0] * x[2] / n2;
        return {c * (x[2] - q * x[0]), c * (-q * x[1]), c * (x[0] - q * x[2])};
    }
    double u0(const Vec<3>& x) const override { return 2.0 * x[0] * x[2] / norm_sq(x); }

    Vec<3> surface_center(double) const override { return {0.0, 0.0, 0.0}; }
    double surface_radius(double t) const override { return r(t); }
};

double adaptive_simpson(double (*f)(double), double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double inv_r_sq(double s) {
    double r = Ex4Problem::r(s);
    return 1.0 / (r * r);
}

}  // namespace

double exact_time_integral_ex4(double t) {
    if (t == 0.0) return 0.0;
    static std::mutex mtx;
    static std::map<double, double> cache;
    {
        std::lock_guard<std::mutex> lock(mtx);
        auto it = cache.find(t);
        if (it != cache.end()) return it->second;
    }
    double fa = inv_r_sq(0.0), fb = inv_r_sq(t), fm = inv_r_sq(0.5 * t);
    double whole = t / 6.0 * (fa + 4.0 * fm + fb);
    double val = adaptive_simpson(&inv_r_sq, 0.0, t, fa, fm, fb, whole, 1e-12, 40);
    std::lock_guard<std::mutex> lock(mtx);
    cache.emplace(t, val);
    return val;
}

template <int D>
Vec<D> closest_point_newton(const LevelSetProblem<D>& p, const Vec<D>& x, double t,
                            int max_iters) {
    // Unknowns (q, lambda) solving q + lambda grad phi(q) - x = 0, phi(q) = 0.
    Vec<D> g0 = p.grad_phi(x, t);
    double g0n2 = norm_sq(g0);
    if (g0n2 < 1e-24) throw DegeneratePoint("closest_point_newton: vanishing gradient");
    double lambda = p.phi(x, t) / g0n2;
    Vec<D> q = x - lambda * g0;

    auto residual_norm = [&](const Vec<D>& qq, double ll) {
        Vec<D> g = p.grad_phi(qq, t);
        double r2 = 0.0;
        for (int i = 0; i < D; ++i) {
            double ri = qq[i] + ll * g[i] - x[i];
            r2 += ri * ri;
        }
        double ph = p.phi(qq, t);
        return std::sqrt(r2 + ph * ph);
    };

    double rn = residual_norm(q, lambda);
    for (int it = 0; it < max_iters; ++it) {
        if (rn <= 1e-14) return q;
        Vec<D> g = p.grad_phi(q, t);
        Mat<D> H = p.hessian_phi(q, t);
        // Assemble and solve the (D+1)x(D+1) Newton system by Gaussian
        // elimination with partial pivoting.
        constexpr int N = D + 1;
        double A[N][N + 1];
        for (int i = 0; i < D; ++i) {
            for (int j = 0; j < D; ++j) A[i][j] = (i == j ? 1.0 : 0.0) + lambda * H(i, j);
            A[i][D] = g[i];
            A[i][N] = -(q[i] + lambda * g[i] - x[i]);
        }
        for (int j = 0; j < D; ++j) A[D][j] = g[j];
        A[D][D] = 0.0;
        A[D][N] = -p.phi(q, t);
        for (int col = 0; col < N; ++col) {
            int piv = col;
            for (int row = col + 1; row < N; ++row)
                if (std::abs(A[row][col]) > std::abs(A[piv][col])) piv = row;
            if (std::abs(A[piv][col]) < 1e-30)
                throw NonConvergence("closest_point_newton: singular Newton system");
            if (piv != col)
                for (int k = col; k <= N; ++k) std::swap(A[piv][k], A[col][k]);
            for (int row = col + 1; row < N; ++row) {
                double f = A[row][col] / A[col][col];
                for (int k = col; k <= N; ++k) A[row][k] -= f * A[col][k];
            }
        }
        double delta[N];
        for (int row = N - 1; row >= 0; --row) {
            double s = A[row][N];
            for (int k = row + 1; k < N; ++k) s -= A[row][k] * delta[k];
            delta[row] = s / A[row][row];
        }
        // Damping: halve the step until the residual decreases.
        double step = 1.0;
        for (int halvings = 0; halvings < 40; ++halvings) {
            Vec<D> qn = q;
            for (int i = 0; i < D; ++i) qn[i] += step * delta[i];
            double ln = lambda + step * delta[D];
            double rn_new = residual_norm(qn, ln);
            if (rn_new < rn) {
                q = qn;
                lambda = ln;
                rn = rn_new;
                break;
            }
            step *= 0.5;
            if (halvings == 39)
                throw NonConvergence("closest_point_newton: line search failed");
        }
    }
    if (rn <= 1e-14) return q;
    throw NonConvergence("closest_point_newton: no convergence in iteration budget");
}

template Vec<2> closest_point_newton<2>(const LevelSetProblem<2>&, const Vec<2>&, double, int);
template Vec<3> closest_point_newton<3>(const LevelSetProblem<3>&, const Vec<3>&, double, int);

namespace {

// Halton sequence, deterministic quasi-random sampling.
double halton(std::uint64_t index, std::uint64_t base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= static_cast<double>(base);
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

}  // namespace

template <int D>
BandRegularityReport estimate_band_constants(const LevelSetProblem<D>& p, double eps,
                                             int n_samples, std::uint64_t seed) {
    static constexpr std::uint64_t bases[4] = {2, 3, 5, 7};
    const Box<D> box = p.domain();
    const double T = p.final_time();
    const double band_width = 3.0 * eps * M_PI / 2.0;  // |phi| < 3 eps pi / 2

    BandRegularityReport rep;
    rep.c0_est = std::numeric_limits<double>::infinity();
    std::uint64_t idx = 1 + seed * 1000003;
    int kept = 0;
    std::uint64_t budget = static_cast<std::uint64_t>(n_samples) * 100000ULL;
    while (kept < n_samples && budget-- > 0) {
        Vec<D> x;
        for (int i = 0; i < D; ++i)
            x[i] = box.lo[i] + box.extent(i) * halton(idx, bases[i]);
        double t = T * halton(idx, bases[D]);
        ++idx;
        if (std::abs(p.phi(x, t)) >= band_width) continue;
        ++kept;
        double gn = norm(p.grad_phi(x, t));
        rep.c0_est = std::min(rep.c0_est, gn);
        rep.c1_est = std::max(rep.c1_est, gn);
        rep.c2_est = std::max({rep.c2_est, p.hessian_phi(x, t).max_abs_entry(),
                               std::abs(p.phi_t(x, t)), std::abs(p.phi_tt(x, t))});
    }
    rep.sample_count = kept;
    return rep;
}

template BandRegularityReport estimate_band_constants<2>(const LevelSetProblem<2>&, double, int,
                                                         std::uint64_t);
template BandRegularityReport estimate_band_constants<3>(const LevelSetProblem<3>&, double, int,
                                                         std::uint64_t);

std::shared_ptr<const LevelSetProblem<2>> make_problem_2d(ProblemId id) {
    switch (id) {
        case ProblemId::Ex1: return std::make_shared<Ex1Problem>();
        case ProblemId::Ex2: return std::make_shared<Ex2Problem>();
        case ProblemId::Ex3: return std::make_shared<Ex3Problem>();
        default: throw Error("make_problem_2d: " + to_string(id) + " is three-dimensional");
    }
}

std::shared_ptr<const LevelSetProblem<3>> make_problem_3d(ProblemId id) {
    if (id != ProblemId::Ex4) throw Error("make_problem_3d: " + to_string(id) + " is planar");
    return std::make_shared<Ex4Problem>();
}

}  // namespace bandfem
