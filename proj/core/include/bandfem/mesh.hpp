#ifndef BANDFEM_MESH_HPP
#define BANDFEM_MESH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <type_traits>
#include <vector>

#include "bandfem/exceptions.hpp"
#include "bandfem/vec.hpp"

namespace bandfem {

// Uniform virtual grid over a square/cubic domain. Only cells near the
// current band are ever materialized; the grid itself stores no cell data.
template <int D>
class VirtualGrid {
public:
    VirtualGrid() = default;

    static VirtualGrid from_cells(const Box<D>& box, std::int64_t cells_per_axis) {
        VirtualGrid g;
        g.box_ = box;
        g.n_ = cells_per_axis;
        for (int i = 1; i < D; ++i) {
            if (std::abs(box.extent(i) - box.extent(0)) > 1e-12 * box.extent(0))
                throw Error("VirtualGrid: domain box must have equal extents per axis");
        }
        if (cells_per_axis <= 0) throw Error("VirtualGrid: cells_per_axis must be positive");
        g.w_ = box.extent(0) / static_cast<double>(cells_per_axis);
        return g;
    }

    // n = round(2^level); half-integer levels give the sqrt(2) ladder.
    static VirtualGrid from_level(const Box<D>& box, double level) {
        return from_cells(box, static_cast<std::int64_t>(std::llround(std::pow(2.0, level))));
    }

    // Target maximum element diameter h (cell width h / sqrt(D)).
    static VirtualGrid from_target_diameter(const Box<D>& box, double h) {
        double w = h / std::sqrt(static_cast<double>(D));
        return from_cells(box, static_cast<std::int64_t>(std::llround(box.extent(0) / w)));
    }

    const Box<D>& box() const { return box_; }
    std::int64_t cells_per_axis() const { return n_; }
    std::int64_t verts_per_axis() const { return n_ + 1; }
    double cell_width() const { return w_; }
    double max_element_diameter() const { return w_ * std::sqrt(static_cast<double>(D)); }

    std::int64_t n_cells_total() const {
        std::int64_t t = 1;
        for (int i = 0; i < D; ++i) t *= n_;
        return t;
    }
    std::int64_t n_verts_total() const {
        std::int64_t t = 1;
        for (int i = 0; i < D; ++i) t *= n_ + 1;
        return t;
    }

    // Lattice vertex key: linear index with axis 0 fastest. Keys identify
    // the same spatial point at every time step.
    std::uint64_t vertex_key(const std::array<std::int64_t, D>& iv) const {
        std::uint64_t k = 0;
        for (int i = D - 1; i >= 0; --i)
            k = k * static_cast<std::uint64_t>(n_ + 1) + static_cast<std::uint64_t>(iv[i]);
        return k;
    }
    std::array<std::int64_t, D> vertex_lattice(std::uint64_t key) const {
        std::array<std::int64_t, D> iv{};
        for (int i = 0; i < D; ++i) {
            iv[i] = static_cast<std::int64_t>(key % static_cast<std::uint64_t>(n_ + 1));
            key /= static_cast<std::uint64_t>(n_ + 1);
        }
        return iv;
    }
    Vec<D> vertex_coord(const std::array<std::int64_t, D>& iv) const {
        Vec<D> x;
        for (int i = 0; i < D; ++i) x[i] = box_.lo[i] + w_ * static_cast<double>(iv[i]);
        return x;
    }

    std::uint64_t cell_id(const std::array<std::int64_t, D>& ic) const {
        std::uint64_t k = 0;
        for (int i = D - 1; i >= 0; --i)
            k = k * static_cast<std::uint64_t>(n_) + static_cast<std::uint64_t>(ic[i]);
        return k;
    }
    std::array<std::int64_t, D> cell_lattice(std::uint64_t id) const {
        std::array<std::int64_t, D> ic{};
        for (int i = 0; i < D; ++i) {
            ic[i] = static_cast<std::int64_t>(id % static_cast<std::uint64_t>(n_));
            id /= static_cast<std::uint64_t>(n_);
        }
        return ic;
    }

    bool same_grid(const VirtualGrid& other) const {
        return n_ == other.n_ && std::abs(w_ - other.w_) < 1e-15 &&
               norm(box_.lo - other.box_.lo) < 1e-15 && norm(box_.hi - other.box_.hi) < 1e-15;
    }

private:
    Box<D> box_{};
    std::int64_t n_ = 0;
    double w_ = 0.0;
};

namespace detail {

// Sub-simplex corner tables. Corner c of a cell has offset bit k of c along
// axis k. 2D: two triangles split by the (0,0)-(1,1) diagonal. 3D: the
// six-tetrahedra split sharing the main diagonal, reordered so every
// element has positive volume.
template <int D>
struct CellSplit;

template <>
struct CellSplit<2> {
    static constexpr int nsub = 2;
    static constexpr std::array<std::array<int, 3>, 2> corners = {{{0, 1, 3}, {0, 3, 2}}};
};

template <>
struct CellSplit<3> {
    static constexpr int nsub = 6;
    // Permutations (p0,p1,p2) in lexicographic order; odd permutations have
    // their middle vertices swapped for positive orientation.
    static constexpr std::array<std::array<int, 4>, 6> corners = {{
        {0, 1, 3, 7},  // (0,1,2) even
        {0, 5, 1, 7},  // (0,2,1) odd
        {0, 3, 2, 7},  // (1,0,2) odd
        {0, 2, 6, 7},  // (1,2,0) even
        {0, 4, 5, 7},  // (2,0,1) even
        {0, 6, 4, 7},  // (2,1,0) odd
    }};
};

}  // namespace detail

struct LocatedPoint {
    std::int64_t element = -1;
    std::array<double, 4> bary{};
};

// Simplicial mesh covering the materialized cells of a virtual grid.
// Elements are listed cell by cell in ascending cell order; vertices are
// listed in ascending lattice-key order. Immutable after construction.
template <int D>
class BandMesh {
public:
    static constexpr int nsub = detail::CellSplit<D>::nsub;

    VirtualGrid<D> grid;
    std::vector<std::uint64_t> cells;  // ascending cell ids
    std::vector<std::array<std::int32_t, D + 1>> elements;  // local vertex indices
    std::vector<std::uint64_t> vertex_keys;                 // ascending
    std::vector<Vec<D>> vertex_coords;
    double h_max = 0.0;

    std::int64_t n_elements() const { return static_cast<std::int64_t>(elements.size()); }
    std::int64_t n_vertices() const { return static_cast<std::int64_t>(vertex_keys.size()); }
    bool empty() const { return elements.empty(); }

    std::uint64_t global_simplex_id(std::int64_t e) const {
        return cells[static_cast<std::size_t>(e / nsub)] * static_cast<std::uint64_t>(nsub) +
               static_cast<std::uint64_t>(e % nsub);
    }

    // Position of a cell id in `cells`, or -1.
    std::int64_t find_cell(std::uint64_t cell) const {
        auto it = std::lower_bound(cells.begin(), cells.end(), cell);
        if (it == cells.end() || *it != cell) return -1;
        return it - cells.begin();
    }

    std::int64_t find_vertex(std::uint64_t key) const {
        auto it = std::lower_bound(vertex_keys.begin(), vertex_keys.end(), key);
        if (it == vertex_keys.end() || *it != key) return -1;
        return it - vertex_keys.begin();
    }

    std::array<Vec<D>, D + 1> element_coords(std::int64_t e) const {
        std::array<Vec<D>, D + 1> c;
        const auto& el = elements[static_cast<std::size_t>(e)];
        for (int i = 0; i <= D; ++i) c[i] = vertex_coords[static_cast<std::size_t>(el[i])];
        return c;
    }

    LocatedPoint locate_point(const Vec<D>& x) const;
};

// Barycentric coordinates of x in the simplex with the given vertices.
template <int D>
std::array<double, 4> barycentric(const std::array<Vec<D>, D + 1>& v, const Vec<D>& x) {
    std::array<double, 4> lam{};
    if constexpr (D == 2) {
        double a11 = v[1][0] - v[0][0], a12 = v[2][0] - v[0][0];
        double a21 = v[1][1] - v[0][1], a22 = v[2][1] - v[0][1];
        double det = a11 * a22 - a12 * a21;
        double b1 = x[0] - v[0][0], b2 = x[1] - v[0][1];
        lam[1] = (b1 * a22 - a12 * b2) / det;
        lam[2] = (a11 * b2 - b1 * a21) / det;
        lam[0] = 1.0 - lam[1] - lam[2];
    } else {
        double a[3][3], b[3];
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) a[i][j] = v[j + 1][i] - v[0][i];
            b[i] = x[i] - v[0][i];
        }
        double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                     a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                     a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        double inv[3][3];
        inv[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
        inv[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
        inv[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
        inv[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
        inv[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
        inv[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
        inv[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
        inv[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
        inv[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
        for (int i = 0; i < 3; ++i) {
            lam[i + 1] = inv[i][0] * b[0] + inv[i][1] * b[1] + inv[i][2] * b[2];
        }
        lam[0] = 1.0 - lam[1] - lam[2] - lam[3];
    }
    return lam;
}

template <int D>
LocatedPoint BandMesh<D>::locate_point(const Vec<D>& x) const {
    if (!grid.box().contains(x)) throw PointNotCovered("locate_point: outside domain box");
    std::array<std::int64_t, D> ic;
    for (int i = 0; i < D; ++i) {
        auto v = static_cast<std::int64_t>(std::floor((x[i] - grid.box().lo[i]) / grid.cell_width()));
        ic[i] = std::clamp<std::int64_t>(v, 0, grid.cells_per_axis() - 1);
    }
    std::int64_t cpos = find_cell(grid.cell_id(ic));
    if (cpos < 0) throw PointNotCovered("locate_point: containing cell not materialized");

    const double tol = 1e-12;
    LocatedPoint best;
    double best_min = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < nsub; ++s) {
        std::int64_t e = cpos * nsub + s;
        auto lam = barycentric<D>(element_coords(e), x);
        double mn = lam[0];
        for (int i = 1; i <= D; ++i) mn = std::min(mn, lam[i]);
        if (mn > best_min) {
            best_min = mn;
            best.element = e;
            best.bary = lam;
        }
        if (mn >= -tol) break;
    }
    if (best_min < -tol) throw PointNotCovered("locate_point: no containing sub-simplex");
    for (int i = 0; i <= D; ++i)
        if (best.bary[i] < 0.0 && best.bary[i] >= -tol) best.bary[i] = 0.0;
    return best;
}

// Materializes every grid cell with at least one corner where the predicate
// holds, plus a one-cell padding ring. Throws BandTouchesBoundary if a
// materialized cell touches a boundary face not declared symmetric.
template <int D, typename Pred>
BandMesh<D> materialize_band_mesh(const VirtualGrid<D>& grid, Pred&& pred,
                                  std::type_identity_t<std::array<bool, D>> symmetric_lo = {},
                                  std::type_identity_t<std::array<bool, D>> symmetric_hi = {}) {
    const std::int64_t n = grid.cells_per_axis();
    const std::int64_t nv = grid.verts_per_axis();
    const std::int64_t nverts = grid.n_verts_total();
    const std::int64_t ncells = grid.n_cells_total();

    std::vector<std::uint8_t> vflag(static_cast<std::size_t>(nverts));
    {
        std::array<std::int64_t, D> iv{};
        for (std::int64_t k = 0; k < nverts; ++k) {
            vflag[static_cast<std::size_t>(k)] = pred(grid.vertex_coord(iv)) ? 1 : 0;
            for (int i = 0; i < D; ++i) {
                if (++iv[i] < nv) break;
                iv[i] = 0;
            }
        }
    }

    // Vertex strides in the vertex lattice and corner offsets per cell.
    std::array<std::int64_t, D> vstride;
    vstride[0] = 1;
    for (int i = 1; i < D; ++i) vstride[i] = vstride[i - 1] * nv;
    std::array<std::int64_t, (1 << D)> corner_off{};
    for (int c = 0; c < (1 << D); ++c)
        for (int i = 0; i < D; ++i)
            if (c & (1 << i)) corner_off[static_cast<std::size_t>(c)] += vstride[i];

    auto vertex_base_of_cell = [&](const std::array<std::int64_t, D>& ic) {
        std::int64_t b = 0;
        for (int i = 0; i < D; ++i) b += ic[i] * vstride[i];
        return b;
    };

    // A cell is flagged when the predicate holds at one of its corners or
    // at its center (so a region strictly inside a single cell still
    // materializes that cell).
    std::vector<std::uint8_t> cflag(static_cast<std::size_t>(ncells));
    {
        std::array<std::int64_t, D> ic{};
        for (std::int64_t k = 0; k < ncells; ++k) {
            std::int64_t base = vertex_base_of_cell(ic);
            std::uint8_t f = 0;
            for (int c = 0; c < (1 << D); ++c)
                f |= vflag[static_cast<std::size_t>(base + corner_off[static_cast<std::size_t>(c)])];
            if (!f) {
                Vec<D> center = grid.vertex_coord(ic);
                for (int i = 0; i < D; ++i) center[i] += 0.5 * grid.cell_width();
                f = pred(center) ? 1 : 0;
            }
            cflag[static_cast<std::size_t>(k)] = f;
            for (int i = 0; i < D; ++i) {
                if (++ic[i] < n) break;
                ic[i] = 0;
            }
        }
    }

    // One-cell padding ring (dilation clamped to the domain).
    std::vector<std::uint8_t> cpad(cflag);
    {
        std::array<std::int64_t, D> ic{};
        for (std::int64_t k = 0; k < ncells; ++k) {
            if (cflag[static_cast<std::size_t>(k)]) {
                std::array<std::int64_t, D> lo, hi;
                for (int i = 0; i < D; ++i) {
                    lo[i] = std::max<std::int64_t>(0, ic[i] - 1);
                    hi[i] = std::min<std::int64_t>(n - 1, ic[i] + 1);
                }
                std::array<std::int64_t, D> jc = lo;
                while (true) {
                    cpad[static_cast<std::size_t>(grid.cell_id(jc))] = 1;
                    int ax = 0;
                    for (; ax < D; ++ax) {
                        if (++jc[ax] <= hi[ax]) break;
                        jc[ax] = lo[ax];
                    }
                    if (ax == D) break;
                }
            }
            for (int i = 0; i < D; ++i) {
                if (++ic[i] < n) break;
                ic[i] = 0;
            }
        }
    }

    BandMesh<D> mesh;
    mesh.grid = grid;
    mesh.h_max = grid.max_element_diameter();

    // Collect cells in ascending order, check boundary contact, mark
    // vertices used by materialized cells.
    std::vector<std::int32_t> vlocal(static_cast<std::size_t>(nverts), -1);
    {
        std::array<std::int64_t, D> ic{};
        for (std::int64_t k = 0; k < ncells; ++k) {
            if (cpad[static_cast<std::size_t>(k)]) {
                for (int i = 0; i < D; ++i) {
                    if (ic[i] == 0 && !symmetric_lo[i])
                        throw BandTouchesBoundary("band touches lo boundary on axis " +
                                                  std::to_string(i));
                    if (ic[i] == n - 1 && !symmetric_hi[i])
                        throw BandTouchesBoundary("band touches hi boundary on axis " +
                                                  std::to_string(i));
                }
                mesh.cells.push_back(static_cast<std::uint64_t>(k));
                std::int64_t base = vertex_base_of_cell(ic);
                for (int c = 0; c < (1 << D); ++c)
                    vlocal[static_cast<std::size_t>(base + corner_off[static_cast<std::size_t>(c)])] = 0;
            }
            for (int i = 0; i < D; ++i) {
                if (++ic[i] < n) break;
                ic[i] = 0;
            }
        }
    }

    // Vertex list in ascending key order; lattice vertex index equals key.
    {
        std::array<std::int64_t, D> iv{};
        for (std::int64_t k = 0; k < nverts; ++k) {
            if (vlocal[static_cast<std::size_t>(k)] == 0) {
                vlocal[static_cast<std::size_t>(k)] =
                    static_cast<std::int32_t>(mesh.vertex_keys.size());
                mesh.vertex_keys.push_back(static_cast<std::uint64_t>(k));
                mesh.vertex_coords.push_back(grid.vertex_coord(iv));
            }
            for (int i = 0; i < D; ++i) {
                if (++iv[i] < nv) break;
                iv[i] = 0;
            }
        }
    }

    mesh.elements.reserve(mesh.cells.size() * detail::CellSplit<D>::nsub);
    for (std::uint64_t cell : mesh.cells) {
        auto ic = grid.cell_lattice(cell);
        std::int64_t base = vertex_base_of_cell(ic);
        for (const auto& sub : detail::CellSplit<D>::corners) {
            std::array<std::int32_t, D + 1> el;
            for (int i = 0; i <= D; ++i)
                el[i] = vlocal[static_cast<std::size_t>(
                    base + corner_off[static_cast<std::size_t>(sub[i])])];
            mesh.elements.push_back(el);
        }
    }
    return mesh;
}

// Nodal interpolation: coefficient vector over the mesh vertices.
template <int D, typename F>
std::vector<double> nodal_interpolate(const BandMesh<D>& mesh, F&& func) {
    std::vector<double> out(mesh.vertex_coords.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = func(mesh.vertex_coords[i]);
    return out;
}

template <int D>
void dump_mesh(const BandMesh<D>& mesh, std::ostream& os) {
    os << D << " " << mesh.n_vertices() << " " << mesh.n_elements() << "\n";
    for (std::int64_t i = 0; i < mesh.n_vertices(); ++i) {
        os << mesh.vertex_keys[static_cast<std::size_t>(i)];
        for (int d = 0; d < D; ++d) os << " " << mesh.vertex_coords[static_cast<std::size_t>(i)][d];
        os << "\n";
    }
    for (const auto& el : mesh.elements) {
        for (int i = 0; i <= D; ++i)
            os << (i ? " " : "") << mesh.vertex_keys[static_cast<std::size_t>(el[i])];
        os << "\n";
    }
}

}  // namespace bandfem

#endif
