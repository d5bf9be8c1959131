#ifndef BANDFEM_QUADRATURE_HPP
#define BANDFEM_QUADRATURE_HPP

#include <array>
#include <vector>

namespace bandfem {

// Quadrature rule on the reference simplex {x_i >= 0, sum x_i <= 1}.
// Points are stored in barycentric coordinates (dim+1 entries used), weights
// sum to the reference element volume (1/2 for the triangle, 1/6 for the
// tetrahedron). The integral of f over a physical simplex T is
//   (|T| / ref_volume) * sum_q w_q f(lambda_q).
class QuadratureRule {
public:
    QuadratureRule(int dim, int degree, std::vector<std::array<double, 4>> pts,
                   std::vector<double> wts);

    int dim() const { return dim_; }
    int degree() const { return degree_; }
    std::size_t size() const { return weights_.size(); }
    const std::array<double, 4>& point(std::size_t q) const { return points_[q]; }
    double weight(std::size_t q) const { return weights_[q]; }
    double ref_volume() const;

private:
    int dim_;
    int degree_;
    std::vector<std::array<double, 4>> points_;
    std::vector<double> weights_;
};

// Smallest built-in rule exact at least to the requested polynomial degree.
const QuadratureRule& simplex_rule(int dim, int degree);

// Tensor Gauss-Legendre rule collapsed onto the simplex (Duffy transform),
// q points per axis. Exact to degree 2q-2 on triangles and 2q-3 on
// tetrahedra. Used where closed-form simplex rules would need fragile
// tabulated constants, and as an independent high-order oracle.
QuadratureRule duffy_rule(int dim, int q);

// Gauss-Legendre nodes and weights on [0,1], computed by Newton iteration.
void gauss_legendre_01(int q, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace bandfem

#endif
