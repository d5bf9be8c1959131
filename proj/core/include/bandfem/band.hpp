#ifndef BANDFEM_BAND_HPP
#define BANDFEM_BAND_HPP

#include <cassert>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "bandfem/levelset.hpp"
#include "bandfem/mesh.hpp"
#include "bandfem/phasefield.hpp"

namespace bandfem {

// Time-indexed finite element space on the narrow band: the subset of mesh
// elements having a vertex where the wide phase field is positive, with a
// dense DOF numbering and precomputed nodal data. DOF indices are local to
// the step; cross-step identification goes through lattice keys.
template <int D>
struct BandSpace {
    int m = 0;
    double t = 0.0;
    PhaseFieldParams params;
    std::shared_ptr<const BandMesh<D>> mesh;

    std::vector<std::int32_t> band_elements;  // ascending mesh element ids
    std::vector<std::uint8_t> elem_in_band;   // per mesh element
    std::vector<std::int32_t> vert_to_dof;    // per mesh vertex, -1 outside
    std::vector<std::int32_t> dof_to_vert;
    std::vector<std::uint64_t> dof_keys;      // ascending

    // Nodal values at DOFs (exact evaluations; Lagrange interpolation data).
    std::vector<double> phi_m;
    std::vector<double> rho_m;
    std::vector<double> rho_tilde_m;
    std::vector<Vec<D>> velocity_m;  // closest-point extended
    std::vector<double> f_m;         // closest-point extended
    std::vector<std::uint8_t> data_mask;  // 1 where extended data was evaluated

    std::int64_t n_dofs() const { return static_cast<std::int64_t>(dof_keys.size()); }

    std::int32_t dof_of_key(std::uint64_t key) const {
        auto it = std::lower_bound(dof_keys.begin(), dof_keys.end(), key);
        if (it == dof_keys.end() || *it != key) return -1;
        return static_cast<std::int32_t>(it - dof_keys.begin());
    }

    std::array<std::int32_t, D + 1> element_dofs(std::int64_t e) const {
        const auto& el = mesh->elements[static_cast<std::size_t>(e)];
        std::array<std::int32_t, D + 1> d;
        for (int i = 0; i <= D; ++i) d[i] = vert_to_dof[static_cast<std::size_t>(el[i])];
        return d;
    }

    // Whether the given global simplex (cell id * nsub + sub) is a band
    // element of this space.
    bool contains_global_simplex(std::uint64_t gid) const {
        const auto nsub = static_cast<std::uint64_t>(BandMesh<D>::nsub);
        std::int64_t cpos = mesh->find_cell(gid / nsub);
        if (cpos < 0) return false;
        std::int64_t e = cpos * BandMesh<D>::nsub + static_cast<std::int64_t>(gid % nsub);
        return elem_in_band[static_cast<std::size_t>(e)] != 0;
    }

    // P1 evaluation helpers at a located point.
    double eval(const LocatedPoint& lp, const std::vector<double>& dof_values) const {
        auto dofs = element_dofs(lp.element);
        double s = 0.0;
        for (int i = 0; i <= D; ++i) s += lp.bary[i] * dof_values[static_cast<std::size_t>(dofs[i])];
        return s;
    }
    Vec<D> eval_gradient(std::int64_t element, const std::vector<double>& dof_values) const;
};

// Extracts the band space at time t from a mesh materialized with the
// predicate rho_tilde(., t) > 0 (plus padding). Throws EmptyBand if no
// element qualifies.
template <int D>
BandSpace<D> extract_band(std::shared_ptr<const BandMesh<D>> mesh, const LevelSetProblem<D>& problem,
                          const PhaseFieldParams& params, double t, int m);

// True iff the face-adjacency graph of the band elements has one component.
template <int D>
bool check_connected(const BandSpace<D>& band);

// Pairs (dof in a, dof in b) with equal lattice keys. Throws GridMismatch
// if the spaces come from different virtual grids.
template <int D>
std::vector<std::pair<std::int32_t, std::int32_t>> shared_dofs(const BandSpace<D>& a,
                                                               const BandSpace<D>& b);

extern template struct BandSpace<2>;
extern template struct BandSpace<3>;
extern template BandSpace<2> extract_band<2>(std::shared_ptr<const BandMesh<2>>,
                                             const LevelSetProblem<2>&, const PhaseFieldParams&,
                                             double, int);
extern template BandSpace<3> extract_band<3>(std::shared_ptr<const BandMesh<3>>,
                                             const LevelSetProblem<3>&, const PhaseFieldParams&,
                                             double, int);
extern template bool check_connected<2>(const BandSpace<2>&);
extern template bool check_connected<3>(const BandSpace<3>&);
extern template std::vector<std::pair<std::int32_t, std::int32_t>> shared_dofs<2>(
    const BandSpace<2>&, const BandSpace<2>&);
extern template std::vector<std::pair<std::int32_t, std::int32_t>> shared_dofs<3>(
    const BandSpace<3>&, const BandSpace<3>&);

}  // namespace bandfem

#endif
