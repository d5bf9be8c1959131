#ifndef BANDFEM_SPARSE_HPP
#define BANDFEM_SPARSE_HPP

#include <cstdint>
#include <vector>

namespace bandfem {

struct Triplet {
    std::int32_t row;
    std::int32_t col;
    double value;
};

// Compressed-row sparse matrix. Column indices are sorted and unique per
// row; duplicate triplets are summed on construction. Immutable after
// construction.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(std::int64_t n_rows, std::int64_t n_cols, std::vector<std::int64_t> row_offsets,
                 std::vector<std::int32_t> col_indices, std::vector<double> values);

    static SparseMatrix from_triplets(std::int64_t n_rows, std::int64_t n_cols,
                                      std::vector<Triplet> entries);
    static SparseMatrix from_triplets(std::int64_t n, std::vector<Triplet> entries) {
        return from_triplets(n, n, std::move(entries));
    }

    std::int64_t n_rows() const { return n_rows_; }
    std::int64_t n_cols() const { return n_cols_; }
    std::int64_t n_nonzeros() const { return static_cast<std::int64_t>(values_.size()); }

    const std::vector<std::int64_t>& row_offsets() const { return offsets_; }
    const std::vector<std::int32_t>& col_indices() const { return cols_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& mutable_values() { return values_; }

    // y = A x, row-major with index-ascending summation per row.
    void matvec(const std::vector<double>& x, std::vector<double>& y, int n_threads = 1) const;
    std::vector<double> matvec(const std::vector<double>& x) const;

    std::vector<double> diagonal() const;
    double coeff(std::int32_t row, std::int32_t col) const;

private:
    std::int64_t n_rows_ = 0;
    std::int64_t n_cols_ = 0;
    std::vector<std::int64_t> offsets_;
    std::vector<std::int32_t> cols_;
    std::vector<double> values_;
};

struct SolveStats {
    int iterations = 0;       // total inner iterations
    int restarts = 0;
    double residual = 0.0;    // final true residual norm ||b - A x||
    double rel_residual = 0.0;
    bool converged = false;
    bool max_iters_exceeded = false;
};

enum class PrecondKind { None, Jacobi, Ssor };

struct GmresOptions {
    double rel_tol = 1e-10;
    int restart = 30;
    int max_iters = 10000;
    PrecondKind precond = PrecondKind::Jacobi;
    double ssor_omega = 1.8;

    bool diag_precond() const { return precond != PrecondKind::None; }
};

// Restarted GMRES with optional left Jacobi preconditioning. The initial
// guess is the zero vector unless x0 is given (warm start). The
// convergence contract is on the unpreconditioned residual:
// ||b - A x|| <= rel_tol ||b||. Throws ZeroDiagonal when preconditioning
// meets a zero diagonal entry; an exhausted iteration budget returns the
// best iterate with the max_iters_exceeded flag set.
std::vector<double> solve_gmres(const SparseMatrix& A, const std::vector<double>& b,
                                const GmresOptions& opts, SolveStats& stats, int n_threads = 1,
                                const std::vector<double>* x0 = nullptr);

}  // namespace bandfem

#endif
