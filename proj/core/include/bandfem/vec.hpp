#ifndef BANDFEM_VEC_HPP
#define BANDFEM_VEC_HPP

#include <array>
#include <cmath>
#include <cstddef>

namespace bandfem {

// Small fixed-dimension point/vector type used throughout the geometry and
// assembly kernels. D is the ambient space dimension (2 or 3).
template <int D>
struct Vec {
    std::array<double, D> c{};

    double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

    Vec& operator+=(const Vec& o) {
        for (int i = 0; i < D; ++i) c[i] += o.c[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        for (int i = 0; i < D; ++i) c[i] -= o.c[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (int i = 0; i < D; ++i) c[i] *= s;
        return *this;
    }

    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend Vec operator*(double s, Vec a) { return a *= s; }
    friend Vec operator*(Vec a, double s) { return a *= s; }

    friend double dot(const Vec& a, const Vec& b) {
        double s = 0.0;
        for (int i = 0; i < D; ++i) s += a.c[i] * b.c[i];
        return s;
    }
    friend double norm(const Vec& a) { return std::sqrt(dot(a, a)); }
    friend double norm_sq(const Vec& a) { return dot(a, a); }
};

template <int D>
struct Mat {
    std::array<std::array<double, D>, D> a{};

    double& operator()(int i, int j) { return a[i][j]; }
    double operator()(int i, int j) const { return a[i][j]; }

    double max_abs_entry() const {
        double m = 0.0;
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) m = std::max(m, std::abs(a[i][j]));
        return m;
    }
};

// Axis-aligned box.
template <int D>
struct Box {
    Vec<D> lo{}, hi{};

    double extent(int axis) const { return hi[axis] - lo[axis]; }
    bool contains(const Vec<D>& x) const {
        for (int i = 0; i < D; ++i)
            if (x[i] < lo[i] || x[i] > hi[i]) return false;
        return true;
    }
};

}  // namespace bandfem

#endif
