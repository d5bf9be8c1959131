#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bandfem/levelset.hpp"
#include "bandfem/mesh.hpp"
#include "bandfem/verify.hpp"

using namespace bandfem;

TEST_CASE("virtual grid construction") {
    Box<2> box{{0.0, 0.0}, {2.4, 2.4}};
    auto g = VirtualGrid<2>::from_cells(box, 96);
    CHECK(g.cell_width() == doctest::Approx(0.025).epsilon(1e-15));
    CHECK(g.max_element_diameter() == doctest::Approx(0.025 * M_SQRT2).epsilon(1e-15));

    auto g2 = VirtualGrid<2>::from_level(box, 9.0);
    CHECK(g2.cells_per_axis() == 512);
    auto g3 = VirtualGrid<2>::from_level(box, 9.5);
    CHECK(g3.cells_per_axis() == 724);

    // Target diameter chooses the cell count so that w * sqrt(2) ~ h.
    auto g4 = VirtualGrid<2>::from_target_diameter(box, 4.6875e-3);
    CHECK(g4.cells_per_axis() == 724);

    // Keys round-trip through lattice coordinates.
    auto key = g.vertex_key({13, 57});
    auto iv = g.vertex_lattice(key);
    CHECK(iv[0] == 13);
    CHECK(iv[1] == 57);
}

TEST_CASE("empty and tiny materializations") {
    Box<2> box{{0.0, 0.0}, {2.4, 2.4}};
    auto g = VirtualGrid<2>::from_cells(box, 96);

    auto empty = materialize_band_mesh(g, [](const Vec<2>&) { return false; });
    CHECK(empty.empty());
    CHECK(empty.n_vertices() == 0);

    // A region inside a single interior cell materializes that cell plus
    // its 8-neighbor padding ring: 9 cells, 18 triangles.
    Vec<2> c = g.vertex_coord({40, 40});
    c[0] += 0.5 * g.cell_width();
    c[1] += 0.5 * g.cell_width();
    auto one = materialize_band_mesh(g, [&](const Vec<2>& x) { return norm(x - c) < 1e-9; });
    CHECK(one.n_elements() == 18);
    CHECK(one.cells.size() == 9);
    CHECK(one.n_vertices() == 16);

    CHECK_THROWS_AS(materialize_band_mesh(g, [](const Vec<2>& x) { return x[0] > 2.35; }),
                    BandTouchesBoundary);
}

TEST_CASE("locate point") {
    Box<2> box{{0.0, 0.0}, {2.4, 2.4}};
    auto g = VirtualGrid<2>::from_cells(box, 96);
    Vec<2> c = g.vertex_coord({40, 40});
    c[0] += 0.5 * g.cell_width();
    c[1] += 0.5 * g.cell_width();
    auto mesh = materialize_band_mesh(g, [&](const Vec<2>& x) { return norm(x - c) < 1e-9; });

    // Element vertex: unit barycentric coordinate.
    auto coords = mesh.element_coords(0);
    auto lp = mesh.locate_point(coords[1]);
    bool unit = false;
    for (int i = 0; i <= 2; ++i)
        unit = unit || std::abs(lp.bary[static_cast<std::size_t>(i)] - 1.0) < 1e-12;
    CHECK(unit);

    // Element centroid: equal coordinates.
    Vec<2> centroid = (1.0 / 3.0) * (coords[0] + coords[1] + coords[2]);
    auto lc = mesh.locate_point(centroid);
    for (int i = 0; i <= 2; ++i)
        CHECK(lc.bary[static_cast<std::size_t>(i)] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(mesh.locate_point(Vec<2>{0.1, 0.1}), PointNotCovered);
    CHECK_THROWS_AS(mesh.locate_point(Vec<2>{5.0, 5.0}), PointNotCovered);
}

TEST_CASE("nodal interpolation") {
    Box<2> box{{0.0, 0.0}, {2.4, 2.4}};
    auto g = VirtualGrid<2>::from_cells(box, 48);
    auto ex1 = make_problem_2d(ProblemId::Ex1);
    auto mesh = materialize_band_mesh(
        g, [&](const Vec<2>& x) { return std::abs(ex1->phi(x, 0.0)) < 0.4 * M_PI; },
        ex1->symmetric_lo_faces(), ex1->symmetric_hi_faces());

    auto ones = nodal_interpolate(mesh, [](const Vec<2>&) { return 1.0; });
    for (double v : ones) CHECK(v == 1.0);

    auto phi_nodal = nodal_interpolate(mesh, [&](const Vec<2>& x) { return ex1->phi(x, 0.0); });
    for (std::int64_t i = 0; i < mesh.n_vertices(); ++i)
        CHECK(phi_nodal[static_cast<std::size_t>(i)] ==
              ex1->phi(mesh.vertex_coords[static_cast<std::size_t>(i)], 0.0));
}

TEST_CASE("kuhn split in three dimensions") {
    Box<3> box{{0.0, 0.0, 0.0}, {3.0, 3.0, 3.0}};
    auto g = VirtualGrid<3>::from_cells(box, 3);
    std::array<bool, 3> sym{true, true, true};
    auto mesh = materialize_band_mesh(g, [](const Vec<3>&) { return true; }, sym, sym);
    CHECK(mesh.n_elements() == 27 * 6);
    CHECK(mesh.n_vertices() == 64);
    CHECK(mesh.h_max == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));

    // Every tetrahedron has positive volume 1/6 of the cell.
    for (std::int64_t e = 0; e < mesh.n_elements(); ++e) {
        auto c = mesh.element_coords(e);
        Vec<3> a = c[1] - c[0], b = c[2] - c[0], d = c[3] - c[0];
        double det = a[0] * (b[1] * d[2] - b[2] * d[1]) - a[1] * (b[0] * d[2] - b[2] * d[0]) +
                     a[2] * (b[0] * d[1] - b[1] * d[0]);
        CHECK(det == doctest::Approx(1.0).epsilon(1e-13));
    }

    // The cube volume is exactly covered.
    double vol = 0.0;
    for (std::int64_t e = 0; e < mesh.n_elements(); ++e) {
        auto c = mesh.element_coords(e);
        Vec<3> a = c[1] - c[0], b = c[2] - c[0], d = c[3] - c[0];
        vol += (a[0] * (b[1] * d[2] - b[2] * d[1]) - a[1] * (b[0] * d[2] - b[2] * d[0]) +
                a[2] * (b[0] * d[1] - b[1] * d[0])) /
               6.0;
    }
    CHECK(vol == doctest::Approx(27.0).epsilon(1e-13));

    // Random points reconstruct through barycentric coordinates.
    for (int k = 0; k < 200; ++k) {
        Vec<3> x = {3.0 * std::fmod(0.137 * k + 0.41, 1.0), 3.0 * std::fmod(0.517 * k + 0.13, 1.0),
                    3.0 * std::fmod(0.871 * k + 0.77, 1.0)};
        auto lp = mesh.locate_point(x);
        auto c = mesh.element_coords(lp.element);
        Vec<3> rec{};
        double s = 0.0;
        for (int i = 0; i <= 3; ++i) {
            rec += lp.bary[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(i)];
            s += lp.bary[static_cast<std::size_t>(i)];
        }
        CHECK(norm(rec - x) < 1e-12);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("mesh dump format") {
    Box<2> box{{0.0, 0.0}, {2.4, 2.4}};
    auto g = VirtualGrid<2>::from_cells(box, 96);
    Vec<2> c = g.vertex_coord({40, 40});
    c[0] += 0.5 * g.cell_width();
    c[1] += 0.5 * g.cell_width();
    auto mesh = materialize_band_mesh(g, [&](const Vec<2>& x) { return norm(x - c) < 1e-9; });
    std::ostringstream os;
    dump_mesh(mesh, os);
    std::istringstream is(os.str());
    int dim, nv, ne;
    is >> dim >> nv >> ne;
    CHECK(dim == 2);
    CHECK(nv == mesh.n_vertices());
    CHECK(ne == mesh.n_elements());
}

TEST_CASE("mesh invariant suite") {
    auto lines = run_verify("mesh");
    for (const auto& l : lines) {
        INFO(l.name, " measured=", l.measured, " bound=", l.bound);
        CHECK(l.pass);
    }
}
