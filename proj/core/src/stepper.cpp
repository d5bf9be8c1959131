#include "bandfem/stepper.hpp"

#include <cmath>
#include <limits>

namespace bandfem {

template <int D>
Stepper<D>::Stepper(std::shared_ptr<const LevelSetProblem<D>> problem, const RunConfig& config)
    : problem_(std::move(problem)), config_(config) {
    const Box<D> box = problem_->domain();
    int sources = (config.cells ? 1 : 0) + (config.level ? 1 : 0) + (config.target_h ? 1 : 0);
    if (sources != 1)
        throw ConfigError("exactly one of mesh.cells, mesh.level, mesh.target_h must be set",
                          "mesh.cells");
    if (config.cells)
        grid_ = VirtualGrid<D>::from_cells(box, *config.cells);
    else if (config.level)
        grid_ = VirtualGrid<D>::from_level(box, *config.level);
    else
        grid_ = VirtualGrid<D>::from_target_diameter(box, *config.target_h);

    const double hh = grid_.max_element_diameter();
    params_.gamma = config.gamma;
    params_.eps_to_h = config.eps_to_h.value_or(D == 2 ? 85.33 : 1.85);
    params_.eps = config.eps_override.value_or(params_.eps_to_h * hh);
    if (params_.eps <= 0.0) throw ConfigError("eps must be positive", "phasefield.eps");

    switch (config.rule) {
        case TimeStepRule::EpsSq: tau_ = 0.0025 * params_.eps * params_.eps; break;
        case TimeStepRule::HSq: tau_ = 0.5 * hh * hh; break;
        case TimeStepRule::Explicit:
            if (!config.tau_explicit)
                throw ConfigError("time.tau required for the explicit rule", "time.tau");
            tau_ = *config.tau_explicit;
            break;
    }
    if (tau_ <= 0.0) throw ConfigError("derived time step must be positive", "time.tau");

    T_ = config.final_time.value_or(problem_->final_time());
    if (T_ < 0.0) throw ConfigError("final time must be nonnegative", "problem.final_time");
    M_ = T_ == 0.0 ? 0 : std::max(1, static_cast<int>(std::ceil(T_ / tau_ - 1e-9)));
}

template <int D>
double Stepper<D>::time_of_step(int m) const {
    if (m >= M_) return T_;
    return static_cast<double>(m) * tau_;
}

template <int D>
std::shared_ptr<const BandSpace<D>> Stepper<D>::extract_at(double t, int m) const {
    const double width = params_.eps * M_PI;  // rho_tilde support: |phi| < eps pi
    const auto& prob = *problem_;
    auto mesh = std::make_shared<BandMesh<D>>(materialize_band_mesh(
        grid_, [&prob, t, width](const Vec<D>& x) { return std::abs(prob.phi(x, t)) < width; },
        prob.symmetric_lo_faces(), prob.symmetric_hi_faces()));
    return std::make_shared<BandSpace<D>>(extract_band<D>(mesh, prob, params_, t, m));
}

template <int D>
StepState<D> Stepper<D>::initial_state() const {
    StepState<D> st;
    st.m = 0;
    st.t = 0.0;
    auto band = extract_at(0.0, 0);

    // Nodal closest-point extension of the initial data over the whole
    // band. At an exact center hit the projection is undefined and the
    // value is irrelevant (zero weight in every functional); use 0.
    std::vector<double> u0_nodal(static_cast<std::size_t>(band->n_dofs()), 0.0);
    for (std::int64_t d = 0; d < band->n_dofs(); ++d) {
        const Vec<D>& x =
            band->mesh->vertex_coords[static_cast<std::size_t>(band->dof_to_vert[static_cast<std::size_t>(d)])];
        try {
            u0_nodal[static_cast<std::size_t>(d)] = problem_->u0(closest_point(*problem_, x, 0.0));
        } catch (const DegeneratePoint&) {
            u0_nodal[static_cast<std::size_t>(d)] = 0.0;
        }
    }

    auto [M, b] = assemble_initial_projection<D>(*band, u0_nodal, config_.threads);
    st.u = solve_gmres(M, b, config_.solver, st.solver, config_.threads);
    st.band = band;
    st.connected = check_connected(*band);
    st.weighted_mass = weighted_mass(*band, st.u);
    st.energy = weighted_energy(*band, st.u);
    return st;
}

template <int D>
StepState<D> Stepper<D>::advance(const StepState<D>& prev) const {
    StepState<D> st;
    st.m = prev.m + 1;
    st.t = time_of_step(st.m);
    const double tau_m = st.t - prev.t;
    auto band = extract_at(st.t, st.m);
    st.connected = check_connected(*band);

    // Every previous-band element still carrying weight must be a band
    // element now, otherwise transferred mass is lost.
    st.prev_support_covered = true;
    {
        const auto& pb = *prev.band;
        constexpr int N = D + 1;
        for (std::int32_t e : pb.band_elements) {
            auto dofs = pb.element_dofs(e);
            bool has_rho = false;
            for (int i = 0; i < N; ++i)
                has_rho = has_rho || pb.rho_m[static_cast<std::size_t>(dofs[static_cast<std::size_t>(i)])] > 0.0;
            if (has_rho && !band->contains_global_simplex(pb.mesh->global_simplex_id(e))) {
                st.prev_support_covered = false;
                break;
            }
        }
    }

    auto [A, b] = assemble_step_system<D>(*band, *prev.band, prev.u, params_, tau_m,
                                          config_.threads, nullptr);
    if (config_.warm_start) {
        std::vector<double> x0(static_cast<std::size_t>(band->n_dofs()), 0.0);
        for (auto [i, j] : shared_dofs(*band, *prev.band))
            x0[static_cast<std::size_t>(i)] = prev.u[static_cast<std::size_t>(j)];
        st.u = solve_gmres(A, b, config_.solver, st.solver, config_.threads, &x0);
    } else {
        st.u = solve_gmres(A, b, config_.solver, st.solver, config_.threads);
    }
    st.band = band;
    st.weighted_mass = weighted_mass(*band, st.u);
    st.energy = weighted_energy(*band, st.u);
    return st;
}

template <int D>
TrajectorySummary Stepper<D>::run(const Observer& observer) const {
    TrajectorySummary sum;
    sum.h = h();
    sum.eps = params_.eps;
    sum.tau = tau_;
    sum.steps = M_;

    if (config_.coupling_check) {
        sum.regularity =
            estimate_band_constants(*problem_, params_.eps, config_.coupling_samples, config_.seed);
        sum.coupling = check_coupling(h(), tau_, params_.eps, sum.regularity);
    }

    StepState<D> state = initial_state();
    sum.mass_scale = [&]() {
        std::vector<double> au(state.u.size());
        for (std::size_t i = 0; i < au.size(); ++i) au[i] = std::abs(state.u[i]);
        return std::max(weighted_mass(*state.band, au), 1e-300);
    }();
    sum.initial_energy = state.energy;
    sum.max_energy = state.energy;
    sum.min_surface_rho_tilde = std::numeric_limits<double>::infinity();

    auto record_of = [](const StepState<D>& s) {
        StepRecord r;
        r.m = s.m;
        r.t = s.t;
        r.n_dofs = s.band->n_dofs();
        r.solver_iters = s.solver.iterations;
        r.solver_residual = s.solver.residual;
        r.weighted_mass = s.weighted_mass;
        r.energy = s.energy;
        r.connected = s.connected;
        r.prev_support_covered = s.prev_support_covered;
        return r;
    };

    sum.records.push_back(record_of(state));
    sum.max_dofs = state.band->n_dofs();
    sum.all_connected = state.connected;
    if (observer) observer(state);

    for (int m = 1; m <= M_; ++m) {
        StepState<D> next = advance(state);
        const double tau_m = next.t - state.t;
        StepRecord rec = record_of(next);

        if (config_.compute_errors) {
            auto [e1c, e2c] = band_errors_step(*next.band, next.u, *problem_);
            sum.errors.add_band(e1c, e2c, tau_m);
            rec.e1_contrib = e1c;
            rec.e2_contrib = e2c;
            SurfaceErrorSample se;
            if constexpr (D == 2)
                se = surface_errors_step_2d(*next.band, next.u, *problem_, config_.surface_quad_L);
            else
                se = surface_errors_step_3d(*next.band, next.u, *problem_, config_.surface_quad_L);
            sum.errors.add_surface(se.e3, se.e4, tau_m);
            rec.e3_contrib = se.e3;
            rec.e4_contrib = se.e4;
            sum.min_surface_rho_tilde = std::min(sum.min_surface_rho_tilde, se.min_rho_tilde);
        }

        double drift = std::abs(next.weighted_mass - state.weighted_mass) / sum.mass_scale;
        sum.max_step_mass_drift = std::max(sum.max_step_mass_drift, drift);
        sum.max_energy = std::max(sum.max_energy, next.energy);
        sum.max_dofs = std::max(sum.max_dofs, next.band->n_dofs());
        sum.all_connected = sum.all_connected && next.connected;
        sum.all_covered = sum.all_covered && next.prev_support_covered;
        sum.solver_all_converged = sum.solver_all_converged && next.solver.converged;
        sum.records.push_back(rec);
        if (observer) observer(next);
        state = std::move(next);
    }
    if (M_ > 0)
        sum.cumulative_mass_drift =
            std::abs(sum.records.back().weighted_mass - sum.records.front().weighted_mass) /
            sum.mass_scale;
    return sum;
}

template <int D>
double Stepper<D>::surface_l2_error(const StepState<D>& state) const {
    SurfaceErrorSample se;
    if constexpr (D == 2)
        se = surface_errors_step_2d(*state.band, state.u, *problem_, config_.surface_quad_L);
    else
        se = surface_errors_step_3d(*state.band, state.u, *problem_, config_.surface_quad_L);
    return std::sqrt(se.e3);
}

template class Stepper<2>;
template class Stepper<3>;

}  // namespace bandfem
