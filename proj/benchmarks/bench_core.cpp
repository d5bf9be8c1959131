#include <benchmark/benchmark.h>

#include "bandfem/band.hpp"
#include "bandfem/fem.hpp"
#include "bandfem/levelset.hpp"
#include "bandfem/mesh.hpp"
#include "bandfem/sparse.hpp"

using namespace bandfem;

namespace {

struct CoarseSetup {
    std::shared_ptr<const LevelSetProblem<2>> problem;
    PhaseFieldParams params{0.4, 0.01, 0.0};
    std::shared_ptr<const BandMesh<2>> mesh;
    BandSpace<2> band;

    explicit CoarseSetup(std::int64_t cells) : problem(make_problem_2d(ProblemId::Ex1)) {
        auto grid = VirtualGrid<2>::from_cells(problem->domain(), cells);
        const auto& p = *problem;
        const double w = params.eps * M_PI;
        mesh = std::make_shared<BandMesh<2>>(materialize_band_mesh(
            grid, [&p, w](const Vec<2>& x) { return std::abs(p.phi(x, 0.0)) < w; },
            p.symmetric_lo_faces(), p.symmetric_hi_faces()));
        band = extract_band<2>(mesh, p, params, 0.0, 0);
    }
};

void BM_element_contribution_2d(benchmark::State& state) {
    std::array<Vec<2>, 3> coords = {{{0.0, 0.0}, {0.01, 0.0}, {0.0, 0.01}}};
    std::array<double, 3> rho = {0.4, 0.9, 0.7};
    std::array<double, 3> rhot = {0.8, 1.0, 0.95};
    std::array<double, 3> phi = {0.01, 0.03, -0.02};
    std::array<Vec<2>, 3> vel = {{{1.0, 0.2}, {0.9, 0.1}, {1.1, 0.3}}};
    std::array<double, 3> f = {0.0, 0.0, 0.0};
    for (auto _ : state) {
        auto c = element_contribution<2>(coords, rho, rhot, phi, vel, f);
        benchmark::DoNotOptimize(c);
    }
}
BENCHMARK(BM_element_contribution_2d);

void BM_materialize_band(benchmark::State& state) {
    auto problem = make_problem_2d(ProblemId::Ex1);
    auto grid = VirtualGrid<2>::from_cells(problem->domain(), state.range(0));
    const auto& p = *problem;
    for (auto _ : state) {
        auto mesh = materialize_band_mesh(
            grid, [&p](const Vec<2>& x) { return std::abs(p.phi(x, 0.0)) < 0.4 * M_PI; },
            p.symmetric_lo_faces(), p.symmetric_hi_faces());
        benchmark::DoNotOptimize(mesh.n_elements());
    }
}
BENCHMARK(BM_materialize_band)->Arg(256)->Arg(724)->Unit(benchmark::kMillisecond);

void BM_assemble_step(benchmark::State& state) {
    CoarseSetup s(state.range(0));
    std::vector<double> u_prev(static_cast<std::size_t>(s.band.n_dofs()), 1.0);
    for (auto _ : state) {
        auto [A, b] = assemble_step_system<2>(s.band, s.band, u_prev, s.params, 4e-4, 1, nullptr);
        benchmark::DoNotOptimize(b.back());
    }
}
BENCHMARK(BM_assemble_step)->Arg(256)->Arg(724)->Unit(benchmark::kMillisecond);

void BM_gmres_step(benchmark::State& state) {
    CoarseSetup s(state.range(0));
    std::vector<double> u_prev(static_cast<std::size_t>(s.band.n_dofs()), 1.0);
    auto [A, b] = assemble_step_system<2>(s.band, s.band, u_prev, s.params, 4e-4, 1, nullptr);
    GmresOptions opts;
    for (auto _ : state) {
        SolveStats stats;
        auto x = solve_gmres(A, b, opts, stats);
        benchmark::DoNotOptimize(x.back());
        state.counters["iters"] = stats.iterations;
    }
}
BENCHMARK(BM_gmres_step)->Arg(256)->Arg(724)->Unit(benchmark::kMillisecond);

void BM_matvec(benchmark::State& state) {
    CoarseSetup s(state.range(0));
    std::vector<double> u_prev(static_cast<std::size_t>(s.band.n_dofs()), 1.0);
    auto [A, b] = assemble_step_system<2>(s.band, s.band, u_prev, s.params, 4e-4, 1, nullptr);
    std::vector<double> y;
    for (auto _ : state) {
        A.matvec(b, y);
        benchmark::DoNotOptimize(y.back());
    }
}
BENCHMARK(BM_matvec)->Arg(724);

}  // namespace

BENCHMARK_MAIN();
