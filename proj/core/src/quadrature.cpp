#include "bandfem/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace bandfem {

QuadratureRule::QuadratureRule(int dim, int degree, std::vector<std::array<double, 4>> pts,
                               std::vector<double> wts)
    : dim_(dim), degree_(degree), points_(std::move(pts)), weights_(std::move(wts)) {
    if (points_.size() != weights_.size()) throw std::invalid_argument("quadrature size mismatch");
}

double QuadratureRule::ref_volume() const { return dim_ == 2 ? 0.5 : 1.0 / 6.0; }

void gauss_legendre_01(int q, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(q, 0.0);
    weights.assign(q, 0.0);
    for (int k = 0; k < q; ++k) {
        // root of P_q on [-1,1], Newton from the Chebyshev estimate
        double x = std::cos(M_PI * (k + 0.75) / (q + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int n = 2; n <= q; ++n) {
                double p2 = ((2 * n - 1) * x * p1 - (n - 1) * p0) / n;
                p0 = p1;
                p1 = p2;
            }
            dp = q * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = x;
        for (int n = 2; n <= q; ++n) {
            double p2 = ((2 * n - 1) * x * p1 - (n - 1) * p0) / n;
            p0 = p1;
            p1 = p2;
        }
        dp = q * (x * p1 - p0) / (x * x - 1.0);
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = 0.5 * (x + 1.0);
        weights[k] = 0.5 * w;
    }
}

QuadratureRule duffy_rule(int dim, int q) {
    std::vector<double> gn, gw;
    gauss_legendre_01(q, gn, gw);
    std::vector<std::array<double, 4>> pts;
    std::vector<double> wts;
    if (dim == 2) {
        for (int i = 0; i < q; ++i)
            for (int j = 0; j < q; ++j) {
                double x = gn[i];
                double y = gn[j] * (1.0 - gn[i]);
                double w = gw[i] * gw[j] * (1.0 - gn[i]);
                pts.push_back({1.0 - x - y, x, y, 0.0});
                wts.push_back(w);
            }
        return QuadratureRule(2, 2 * q - 2, std::move(pts), std::move(wts));
    }
    if (dim == 3) {
        for (int i = 0; i < q; ++i)
            for (int j = 0; j < q; ++j)
                for (int k = 0; k < q; ++k) {
                    double x = gn[i];
                    double y = gn[j] * (1.0 - gn[i]);
                    double z = gn[k] * (1.0 - gn[i]) * (1.0 - gn[j]);
                    double w = gw[i] * gw[j] * gw[k] * (1.0 - gn[i]) * (1.0 - gn[i]) *
                               (1.0 - gn[j]);
                    pts.push_back({1.0 - x - y - z, x, y, z});
                    wts.push_back(w);
                }
        return QuadratureRule(3, 2 * q - 3, std::move(pts), std::move(wts));
    }
    throw std::invalid_argument("duffy_rule: dim must be 2 or 3");
}

namespace {

// Strang 4-point triangle rule, degree 3. Exact rational weights.
QuadratureRule make_tri_deg3() {
    std::vector<std::array<double, 4>> pts = {
        {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0},
        {3.0 / 5.0, 1.0 / 5.0, 1.0 / 5.0, 0.0},
        {1.0 / 5.0, 3.0 / 5.0, 1.0 / 5.0, 0.0},
        {1.0 / 5.0, 1.0 / 5.0, 3.0 / 5.0, 0.0},
    };
    std::vector<double> wts = {-27.0 / 96.0, 25.0 / 96.0, 25.0 / 96.0, 25.0 / 96.0};
    return QuadratureRule(2, 3, std::move(pts), std::move(wts));
}

// Strang 7-point triangle rule, degree 5. Closed-form sqrt(15) constants.
QuadratureRule make_tri_deg5() {
    const double s = std::sqrt(15.0);
    const double a1 = (6.0 + s) / 21.0, b1 = 1.0 - 2.0 * a1;
    const double a2 = (6.0 - s) / 21.0, b2 = 1.0 - 2.0 * a2;
    const double w0 = 9.0 / 80.0;
    const double w1 = (155.0 + s) / 2400.0;
    const double w2 = (155.0 - s) / 2400.0;
    std::vector<std::array<double, 4>> pts = {
        {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0}, {a1, a1, b1, 0.0}, {a1, b1, a1, 0.0},
        {b1, a1, a1, 0.0},                      {a2, a2, b2, 0.0}, {a2, b2, a2, 0.0},
        {b2, a2, a2, 0.0},
    };
    std::vector<double> wts = {w0, w1, w1, w1, w2, w2, w2};
    return QuadratureRule(2, 5, std::move(pts), std::move(wts));
}

// Keast 5-point tetrahedron rule, degree 3. Exact rational weights.
QuadratureRule make_tet_deg3() {
    const double a = 0.5, b = 1.0 / 6.0;
    std::vector<std::array<double, 4>> pts = {
        {0.25, 0.25, 0.25, 0.25}, {a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a},
    };
    const double v = 1.0 / 6.0;
    std::vector<double> wts = {-4.0 / 5.0 * v, 9.0 / 20.0 * v, 9.0 / 20.0 * v, 9.0 / 20.0 * v,
                               9.0 / 20.0 * v};
    return QuadratureRule(3, 3, std::move(pts), std::move(wts));
}

}  // namespace

const QuadratureRule& simplex_rule(int dim, int degree) {
    static std::mutex mtx;
    static std::map<std::pair<int, int>, QuadratureRule> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto key = std::make_pair(dim, degree);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    QuadratureRule rule = [&]() {
        if (dim == 2) {
            if (degree <= 3) return make_tri_deg3();
            if (degree <= 5) return make_tri_deg5();
            return duffy_rule(2, (degree + 3) / 2);
        }
        if (dim == 3) {
            if (degree <= 3) return make_tet_deg3();
            return duffy_rule(3, (degree + 4) / 2);
        }
        throw std::invalid_argument("simplex_rule: dim must be 2 or 3");
    }();
    return cache.emplace(key, std::move(rule)).first->second;
}

}  // namespace bandfem
