#include "bandfem/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "bandfem/exceptions.hpp"

namespace bandfem {

SparseMatrix::SparseMatrix(std::int64_t n_rows, std::int64_t n_cols,
                           std::vector<std::int64_t> row_offsets,
                           std::vector<std::int32_t> col_indices, std::vector<double> values)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      offsets_(std::move(row_offsets)),
      cols_(std::move(col_indices)),
      values_(std::move(values)) {}

SparseMatrix SparseMatrix::from_triplets(std::int64_t n_rows, std::int64_t n_cols,
                                         std::vector<Triplet> entries) {
    for (const auto& t : entries) {
        if (t.row < 0 || t.row >= n_rows || t.col < 0 || t.col >= n_cols)
            throw IndexOutOfRange("from_triplets: entry (" + std::to_string(t.row) + "," +
                                  std::to_string(t.col) + ") out of range");
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<std::int64_t> offsets(static_cast<std::size_t>(n_rows) + 1, 0);
    std::vector<std::int32_t> cols;
    std::vector<double> vals;
    cols.reserve(entries.size());
    vals.reserve(entries.size());
    std::size_t i = 0;
    while (i < entries.size()) {
        std::size_t j = i;
        double s = 0.0;
        while (j < entries.size() && entries[j].row == entries[i].row &&
               entries[j].col == entries[i].col) {
            s += entries[j].value;
            ++j;
        }
        cols.push_back(entries[i].col);
        vals.push_back(s);
        ++offsets[static_cast<std::size_t>(entries[i].row) + 1];
        i = j;
    }
    for (std::size_t r = 0; r < static_cast<std::size_t>(n_rows); ++r) offsets[r + 1] += offsets[r];
    return SparseMatrix(n_rows, n_cols, std::move(offsets), std::move(cols), std::move(vals));
}

void SparseMatrix::matvec(const std::vector<double>& x, std::vector<double>& y,
                          int n_threads) const {
    if (static_cast<std::int64_t>(x.size()) != n_cols_)
        throw DimensionMismatch("matvec: vector length does not match matrix columns");
    y.assign(static_cast<std::size_t>(n_rows_), 0.0);
    auto run = [&](std::int64_t r0, std::int64_t r1) {
        for (std::int64_t r = r0; r < r1; ++r) {
            double s = 0.0;
            for (std::int64_t k = offsets_[static_cast<std::size_t>(r)];
                 k < offsets_[static_cast<std::size_t>(r) + 1]; ++k)
                s += values_[static_cast<std::size_t>(k)] *
                     x[static_cast<std::size_t>(cols_[static_cast<std::size_t>(k)])];
            y[static_cast<std::size_t>(r)] = s;
        }
    };
    if (n_threads <= 1 || n_rows_ < 4096) {
        run(0, n_rows_);
        return;
    }
    std::vector<std::thread> workers;
    std::int64_t chunk = (n_rows_ + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
        std::int64_t r0 = t * chunk;
        std::int64_t r1 = std::min<std::int64_t>(n_rows_, r0 + chunk);
        if (r0 >= r1) break;
        workers.emplace_back(run, r0, r1);
    }
    for (auto& w : workers) w.join();
}

std::vector<double> SparseMatrix::matvec(const std::vector<double>& x) const {
    std::vector<double> y;
    matvec(x, y);
    return y;
}

std::vector<double> SparseMatrix::diagonal() const {
    std::vector<double> d(static_cast<std::size_t>(std::min(n_rows_, n_cols_)), 0.0);
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(d.size()); ++r) {
        for (std::int64_t k = offsets_[static_cast<std::size_t>(r)];
             k < offsets_[static_cast<std::size_t>(r) + 1]; ++k) {
            if (cols_[static_cast<std::size_t>(k)] == r) {
                d[static_cast<std::size_t>(r)] = values_[static_cast<std::size_t>(k)];
                break;
            }
        }
    }
    return d;
}

double SparseMatrix::coeff(std::int32_t row, std::int32_t col) const {
    for (std::int64_t k = offsets_[static_cast<std::size_t>(row)];
         k < offsets_[static_cast<std::size_t>(row) + 1]; ++k)
        if (cols_[static_cast<std::size_t>(k)] == col) return values_[static_cast<std::size_t>(k)];
    return 0.0;
}

namespace {

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

std::vector<double> solve_gmres(const SparseMatrix& A, const std::vector<double>& b,
                                const GmresOptions& opts, SolveStats& stats, int n_threads,
                                const std::vector<double>* x0) {
    if (A.n_rows() != A.n_cols()) throw DimensionMismatch("solve_gmres: matrix must be square");
    if (static_cast<std::int64_t>(b.size()) != A.n_rows())
        throw DimensionMismatch("solve_gmres: right-hand side length mismatch");
    if (x0 && x0->size() != b.size())
        throw DimensionMismatch("solve_gmres: initial guess length mismatch");
    const std::size_t n = b.size();
    stats = SolveStats{};

    std::vector<double> inv_diag;
    if (opts.diag_precond()) {
        inv_diag = A.diagonal();
        for (std::size_t i = 0; i < n; ++i) {
            if (inv_diag[i] == 0.0)
                throw ZeroDiagonal("solve_gmres: zero diagonal entry at row " + std::to_string(i));
            inv_diag[i] = 1.0 / inv_diag[i];
        }
    }
    const auto& off = A.row_offsets();
    const auto& col = A.col_indices();
    const auto& val = A.values();
    const double omega = opts.ssor_omega;
    auto precond = [&](std::vector<double>& v) {
        switch (opts.precond) {
            case PrecondKind::None: return;
            case PrecondKind::Jacobi:
                for (std::size_t i = 0; i < n; ++i) v[i] *= inv_diag[i];
                return;
            case PrecondKind::Ssor:
                // (D/w + L) y = v;  y := (D/w) y;  (D/w + U) z = y
                for (std::size_t r = 0; r < n; ++r) {
                    double s = v[r];
                    for (std::int64_t k = off[r]; k < off[r + 1]; ++k) {
                        auto cI = static_cast<std::size_t>(col[static_cast<std::size_t>(k)]);
                        if (cI < r) s -= val[static_cast<std::size_t>(k)] * v[cI];
                    }
                    v[r] = s * omega * inv_diag[r];
                }
                for (std::size_t r = 0; r < n; ++r) v[r] /= omega * inv_diag[r];
                for (std::size_t r = n; r-- > 0;) {
                    double s = v[r];
                    for (std::int64_t k = off[r]; k < off[r + 1]; ++k) {
                        auto cI = static_cast<std::size_t>(col[static_cast<std::size_t>(k)]);
                        if (cI > r) s -= val[static_cast<std::size_t>(k)] * v[cI];
                    }
                    v[r] = s * omega * inv_diag[r];
                }
                return;
        }
    };

    std::vector<double> x = x0 ? *x0 : std::vector<double>(n, 0.0);
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        x.assign(n, 0.0);
        stats.converged = true;
        return x;
    }
    const double target = opts.rel_tol * bnorm;

    std::vector<double> pb = b;
    precond(pb);
    const double pbnorm = norm2(pb);

    const int m = std::max(1, opts.restart);
    std::vector<std::vector<double>> V;
    std::vector<double> H(static_cast<std::size_t>((m + 1) * m), 0.0);
    auto Hat = [&](int i, int j) -> double& { return H[static_cast<std::size_t>(i * m + j)]; };
    std::vector<double> cs(static_cast<std::size_t>(m)), sn(static_cast<std::size_t>(m)),
        gvec(static_cast<std::size_t>(m) + 1);
    std::vector<double> w(n), r(n);

    while (true) {
        // True (unpreconditioned) residual drives the outer loop.
        A.matvec(x, r, n_threads);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
        stats.residual = norm2(r);
        stats.rel_residual = stats.residual / bnorm;
        if (stats.residual <= target) {
            stats.converged = true;
            return x;
        }
        if (stats.iterations >= opts.max_iters) {
            stats.max_iters_exceeded = true;
            return x;
        }

        precond(r);
        double beta = norm2(r);
        if (beta == 0.0) {
            stats.converged = true;
            return x;
        }
        V.assign(1, r);
        for (std::size_t i = 0; i < n; ++i) V[0][i] /= beta;
        std::fill(gvec.begin(), gvec.end(), 0.0);
        gvec[0] = beta;
        std::fill(H.begin(), H.end(), 0.0);

        int k = 0;
        for (; k < m && stats.iterations < opts.max_iters; ++k) {
            ++stats.iterations;
            A.matvec(V[static_cast<std::size_t>(k)], w, n_threads);
            precond(w);
            // Modified Gram-Schmidt
            for (int i = 0; i <= k; ++i) {
                double h = 0.0;
                const auto& vi = V[static_cast<std::size_t>(i)];
                for (std::size_t j = 0; j < n; ++j) h += w[j] * vi[j];
                Hat(i, k) = h;
                for (std::size_t j = 0; j < n; ++j) w[j] -= h * vi[j];
            }
            double hkk = norm2(w);
            // Apply accumulated Givens rotations to the new column.
            for (int i = 0; i < k; ++i) {
                double t1 = cs[static_cast<std::size_t>(i)] * Hat(i, k) +
                            sn[static_cast<std::size_t>(i)] * Hat(i + 1, k);
                double t2 = -sn[static_cast<std::size_t>(i)] * Hat(i, k) +
                            cs[static_cast<std::size_t>(i)] * Hat(i + 1, k);
                Hat(i, k) = t1;
                Hat(i + 1, k) = t2;
            }
            double denom = std::hypot(Hat(k, k), hkk);
            if (denom == 0.0) {
                // Exact breakdown: the Krylov space is invariant.
                break;
            }
            cs[static_cast<std::size_t>(k)] = Hat(k, k) / denom;
            sn[static_cast<std::size_t>(k)] = hkk / denom;
            Hat(k, k) = denom;
            gvec[static_cast<std::size_t>(k) + 1] = -sn[static_cast<std::size_t>(k)] *
                                                    gvec[static_cast<std::size_t>(k)];
            gvec[static_cast<std::size_t>(k)] *= cs[static_cast<std::size_t>(k)];

            bool happy = hkk <= 1e-32 * beta;
            if (!happy) {
                V.emplace_back(w);
                auto& vk = V.back();
                for (std::size_t j = 0; j < n; ++j) vk[j] /= hkk;
            }
            double inner_res = std::abs(gvec[static_cast<std::size_t>(k) + 1]);
            if (happy || inner_res <= opts.rel_tol * pbnorm) {
                ++k;
                break;
            }
        }

        // Back substitution for the least-squares coefficients, then update x.
        int kk = std::min<int>(k, static_cast<int>(V.size()));
        std::vector<double> y(static_cast<std::size_t>(kk), 0.0);
        for (int i = kk - 1; i >= 0; --i) {
            double s = gvec[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < kk; ++j) s -= Hat(i, j) * y[static_cast<std::size_t>(j)];
            y[static_cast<std::size_t>(i)] = s / Hat(i, i);
        }
        for (int i = 0; i < kk; ++i) {
            const auto& vi = V[static_cast<std::size_t>(i)];
            double yi = y[static_cast<std::size_t>(i)];
            for (std::size_t j = 0; j < n; ++j) x[j] += yi * vi[j];
        }
        ++stats.restarts;
    }
}

}  // namespace bandfem
