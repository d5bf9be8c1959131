#include "bandfem/band.hpp"

#include <array>
#include <cstring>
#include <map>
#include <numeric>

namespace bandfem {

template <int D>
Vec<D> BandSpace<D>::eval_gradient(std::int64_t element, const std::vector<double>& dof_values) const {
    auto coords = mesh->element_coords(element);
    auto dofs = element_dofs(element);
    // Gradients of the barycentric basis; g_0 = -sum g_i keeps the exact
    // zero row sum.
    std::array<Vec<D>, D + 1> g{};
    if constexpr (D == 2) {
        double a11 = coords[1][0] - coords[0][0], a12 = coords[2][0] - coords[0][0];
        double a21 = coords[1][1] - coords[0][1], a22 = coords[2][1] - coords[0][1];
        double det = a11 * a22 - a12 * a21;
        g[1] = {a22 / det, -a12 / det};
        g[2] = {-a21 / det, a11 / det};
    } else {
        double a[3][3];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a[i][j] = coords[j + 1][i] - coords[0][i];
        double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                     a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                     a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        g[1] = {(a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det,
                (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det,
                (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det};
        g[2] = {(a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det,
                (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det,
                (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det};
        g[3] = {(a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det,
                (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det,
                (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det};
    }
    for (int i = 1; i <= D; ++i) g[0] -= g[i];
    Vec<D> grad{};
    for (int i = 0; i <= D; ++i) grad += dof_values[static_cast<std::size_t>(dofs[i])] * g[i];
    return grad;
}

template <int D>
BandSpace<D> extract_band(std::shared_ptr<const BandMesh<D>> mesh, const LevelSetProblem<D>& problem,
                          const PhaseFieldParams& params, double t, int m) {
    BandSpace<D> band;
    band.m = m;
    band.t = t;
    band.params = params;
    band.mesh = mesh;

    const auto& msh = *mesh;
    const std::size_t nv = msh.vertex_coords.size();
    const std::size_t ne = msh.elements.size();

    std::vector<double> phi_all(nv), rho_all(nv), rho_tilde_all(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        double ph = problem.phi(msh.vertex_coords[i], t);
        phi_all[i] = ph;
        rho_all[i] = rho_from_phi(ph, params.eps);
        rho_tilde_all[i] = rho_tilde_from_phi(ph, params.eps);
    }

    band.elem_in_band.assign(ne, 0);
    band.vert_to_dof.assign(nv, -1);
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& el = msh.elements[e];
        bool in = false;
        for (int i = 0; i <= D; ++i) in = in || rho_tilde_all[static_cast<std::size_t>(el[i])] > 0.0;
        if (in) {
            band.elem_in_band[e] = 1;
            band.band_elements.push_back(static_cast<std::int32_t>(e));
            for (int i = 0; i <= D; ++i) band.vert_to_dof[static_cast<std::size_t>(el[i])] = 0;
        }
    }
    if (band.band_elements.empty()) throw EmptyBand("extract_band: no element has rho_tilde > 0");

    for (std::size_t v = 0; v < nv; ++v) {
        if (band.vert_to_dof[v] == 0) {
            band.vert_to_dof[v] = static_cast<std::int32_t>(band.dof_to_vert.size());
            band.dof_to_vert.push_back(static_cast<std::int32_t>(v));
            band.dof_keys.push_back(msh.vertex_keys[v]);
        }
    }

    const std::size_t nd = band.dof_to_vert.size();
    band.phi_m.resize(nd);
    band.rho_m.resize(nd);
    band.rho_tilde_m.resize(nd);
    band.velocity_m.assign(nd, Vec<D>{});
    band.f_m.assign(nd, 0.0);
    band.data_mask.assign(nd, 0);
    for (std::size_t d = 0; d < nd; ++d) {
        auto v = static_cast<std::size_t>(band.dof_to_vert[d]);
        band.phi_m[d] = phi_all[v];
        band.rho_m[d] = rho_all[v];
        band.rho_tilde_m[d] = rho_tilde_all[v];
    }

    // Closest-point data is needed only on elements carrying nonzero nodal
    // rho; elsewhere the weighted terms vanish and the projection may be
    // ill-defined (deep-band vertices near the surface center).
    for (std::int32_t e : band.band_elements) {
        const auto& el = msh.elements[static_cast<std::size_t>(e)];
        bool has_rho = false;
        for (int i = 0; i <= D; ++i) has_rho = has_rho || rho_all[static_cast<std::size_t>(el[i])] > 0.0;
        if (!has_rho) continue;
        for (int i = 0; i <= D; ++i) {
            auto d = static_cast<std::size_t>(band.vert_to_dof[static_cast<std::size_t>(el[i])]);
            band.data_mask[d] = 1;
        }
    }
    for (std::size_t d = 0; d < nd; ++d) {
        if (!band.data_mask[d]) continue;
        const Vec<D>& x = msh.vertex_coords[static_cast<std::size_t>(band.dof_to_vert[d])];
        try {
            Vec<D> p = closest_point(problem, x, t);
            band.velocity_m[d] = problem.velocity(p, t);
            band.f_m[d] = problem.source(p, t);
        } catch (const DegeneratePoint&) {
            // Under-resolved regime only: an element reaches from the
            // projection singularity into the weighted region. Zero data
            // at the singular vertex keeps the step well defined.
            band.velocity_m[d] = Vec<D>{};
            band.f_m[d] = 0.0;
        }
    }
    return band;
}

namespace {

// Face-adjacency tables for the fixed cell splits, derived at startup by
// brute force on a small probe mesh. For sub-simplex s and the face
// opposite local vertex f, the table stores the neighbor's cell offset and
// sub index (or offset 0 and the neighboring sub within the same cell);
// sub = -1 marks a domain-boundary face of the probe.
template <int D>
struct FaceNeighbor {
    std::array<std::int64_t, D> cell_offset;
    int sub;
};

template <int D>
std::array<std::array<FaceNeighbor<D>, D + 1>, detail::CellSplit<D>::nsub> derive_face_table() {
    constexpr int nsub = detail::CellSplit<D>::nsub;
    Box<D> box;
    for (int i = 0; i < D; ++i) {
        box.lo[i] = 0.0;
        box.hi[i] = 3.0;
    }
    auto grid = VirtualGrid<D>::from_cells(box, 3);
    std::array<bool, D> sym_lo, sym_hi;
    sym_lo.fill(true);
    sym_hi.fill(true);
    auto mesh = materialize_band_mesh(grid, [](const Vec<D>&) { return true; }, sym_lo, sym_hi);

    // Map sorted face vertex tuples to (element, opposite local vertex).
    std::map<std::array<std::int32_t, D>, std::vector<std::pair<std::int64_t, int>>> faces;
    for (std::int64_t e = 0; e < mesh.n_elements(); ++e) {
        const auto& el = mesh.elements[static_cast<std::size_t>(e)];
        for (int f = 0; f <= D; ++f) {
            std::array<std::int32_t, D> face{};
            int k = 0;
            for (int i = 0; i <= D; ++i)
                if (i != f) face[k++] = el[i];
            std::sort(face.begin(), face.end());
            faces[face].push_back({e, f});
        }
    }

    std::array<std::int64_t, D> center{};
    center.fill(1);
    std::int64_t cpos = mesh.find_cell(grid.cell_id(center));

    std::array<std::array<FaceNeighbor<D>, D + 1>, nsub> table{};
    for (int s = 0; s < nsub; ++s) {
        std::int64_t e = cpos * nsub + s;
        const auto& el = mesh.elements[static_cast<std::size_t>(e)];
        for (int f = 0; f <= D; ++f) {
            std::array<std::int32_t, D> face{};
            int k = 0;
            for (int i = 0; i <= D; ++i)
                if (i != f) face[k++] = el[i];
            std::sort(face.begin(), face.end());
            const auto& owners = faces[face];
            FaceNeighbor<D> nb{};
            nb.sub = -1;
            for (const auto& [oe, of] : owners) {
                if (oe == e) continue;
                auto ocell = mesh.grid.cell_lattice(mesh.cells[static_cast<std::size_t>(oe / nsub)]);
                for (int i = 0; i < D; ++i) nb.cell_offset[i] = ocell[i] - center[i];
                nb.sub = static_cast<int>(oe % nsub);
            }
            table[static_cast<std::size_t>(s)][static_cast<std::size_t>(f)] = nb;
        }
    }
    return table;
}

template <int D>
const std::array<std::array<FaceNeighbor<D>, D + 1>, detail::CellSplit<D>::nsub>& face_table() {
    static const auto table = derive_face_table<D>();
    return table;
}

struct UnionFind {
    std::vector<std::int32_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    std::int32_t find(std::int32_t a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    }
    void unite(std::int32_t a, std::int32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
};

}  // namespace

template <int D>
bool check_connected(const BandSpace<D>& band) {
    constexpr int nsub = BandMesh<D>::nsub;
    const auto& mesh = *band.mesh;
    const auto& table = face_table<D>();
    const std::int64_t n = mesh.grid.cells_per_axis();

    // Band-element index per mesh element (-1 outside the band).
    std::vector<std::int32_t> band_idx(mesh.elements.size(), -1);
    for (std::size_t i = 0; i < band.band_elements.size(); ++i)
        band_idx[static_cast<std::size_t>(band.band_elements[i])] = static_cast<std::int32_t>(i);

    UnionFind uf(band.band_elements.size());
    for (std::size_t i = 0; i < band.band_elements.size(); ++i) {
        std::int64_t e = band.band_elements[i];
        auto ic = mesh.grid.cell_lattice(mesh.cells[static_cast<std::size_t>(e / nsub)]);
        int s = static_cast<int>(e % nsub);
        for (int f = 0; f <= D; ++f) {
            const auto& nb = table[static_cast<std::size_t>(s)][static_cast<std::size_t>(f)];
            if (nb.sub < 0) continue;
            std::array<std::int64_t, D> jc;
            bool inside = true;
            for (int a = 0; a < D; ++a) {
                jc[a] = ic[a] + nb.cell_offset[a];
                inside = inside && jc[a] >= 0 && jc[a] < n;
            }
            if (!inside) continue;
            std::int64_t cpos = mesh.find_cell(mesh.grid.cell_id(jc));
            if (cpos < 0) continue;
            std::int64_t oe = cpos * nsub + nb.sub;
            std::int32_t oi = band_idx[static_cast<std::size_t>(oe)];
            if (oi >= 0) uf.unite(static_cast<std::int32_t>(i), oi);
        }
    }
    std::int32_t root = uf.find(0);
    for (std::size_t i = 1; i < band.band_elements.size(); ++i)
        if (uf.find(static_cast<std::int32_t>(i)) != root) return false;
    return true;
}

template <int D>
std::vector<std::pair<std::int32_t, std::int32_t>> shared_dofs(const BandSpace<D>& a,
                                                               const BandSpace<D>& b) {
    if (!a.mesh->grid.same_grid(b.mesh->grid))
        throw GridMismatch("shared_dofs: band spaces come from different grids");
    std::vector<std::pair<std::int32_t, std::int32_t>> out;
    std::size_t i = 0, j = 0;
    while (i < a.dof_keys.size() && j < b.dof_keys.size()) {
        if (a.dof_keys[i] < b.dof_keys[j])
            ++i;
        else if (a.dof_keys[i] > b.dof_keys[j])
            ++j;
        else {
            out.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(j));
            ++i;
            ++j;
        }
    }
    return out;
}

template struct BandSpace<2>;
template struct BandSpace<3>;
template BandSpace<2> extract_band<2>(std::shared_ptr<const BandMesh<2>>, const LevelSetProblem<2>&,
                                      const PhaseFieldParams&, double, int);
template BandSpace<3> extract_band<3>(std::shared_ptr<const BandMesh<3>>, const LevelSetProblem<3>&,
                                      const PhaseFieldParams&, double, int);
template bool check_connected<2>(const BandSpace<2>&);
template bool check_connected<3>(const BandSpace<3>&);
template std::vector<std::pair<std::int32_t, std::int32_t>> shared_dofs<2>(const BandSpace<2>&,
                                                                           const BandSpace<2>&);
template std::vector<std::pair<std::int32_t, std::int32_t>> shared_dofs<3>(const BandSpace<3>&,
                                                                           const BandSpace<3>&);

}  // namespace bandfem
