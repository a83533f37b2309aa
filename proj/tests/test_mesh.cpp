#include <catch2/catch_amalgamated.hpp>

#include <memory>

#include "quasihom/mesh.hpp"
#include "quasihom/rng.hpp"

using namespace quasihom;

TEST_CASE("element volumes fill the box") {
  for (int dim : {1, 2, 3}) {
    for (int n : {2, 5}) {
      CellMesh mesh(dim, n, 1.0);
      CHECK(mesh.element_volume() * mesh.element_count() == Catch::Approx(1.0).epsilon(1e-12));
    }
  }
  CellMesh scaled(2, 4, 2.0);
  CHECK(scaled.element_volume() * scaled.element_count() == Catch::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("boundary vertices are exactly the lattice boundary") {
  CellMesh mesh(2, 4);
  // Criss-cross: 25 lattice vertices plus 16 square centers, all centers interior.
  CHECK(mesh.vertex_count() == 25 + 16);
  int boundary = 0;
  for (int v = 0; v < mesh.vertex_count(); ++v)
    if (mesh.is_boundary_vertex(v)) ++boundary;
  CHECK(boundary == 16);
  CHECK(mesh.interior_count() == 9 + 16);

  // Every cell keeps at least one unpinned vertex, so no gradient is frozen
  // by the zero boundary condition.
  for (int e = 0; e < mesh.element_count(); ++e) {
    bool has_interior = false;
    for (int k = 0; k <= mesh.dim(); ++k)
      if (!mesh.is_boundary_vertex(mesh.element_vertex(e, k))) has_interior = true;
    CHECK(has_interior);
  }
}

TEST_CASE("gradients of interpolated affine fields are exact") {
  Rng rng(3);
  for (int dim : {1, 2, 3}) {
    auto mesh = std::make_shared<CellMesh>(dim, 3, 1.0);
    int m = dim;  // square case is the one the laminates use
    MatrixMN G(m, dim);
    for (double& v : G.entries()) v = rng.normal();
    DisplacementField f(mesh, m);
    for (int v = 0; v < mesh->vertex_count(); ++v) {
      auto x = mesh->vertex_coords(v);
      for (int c = 0; c < m; ++c) {
        double s = 0.0;
        for (int d = 0; d < dim; ++d) s += G(c, d) * x[static_cast<size_t>(d)];
        f.values[static_cast<size_t>(v) * m + c] = s;
      }
    }
    MatrixMN base(m, dim), out(m, dim);
    for (int e = 0; e < mesh->element_count(); ++e) {
      mesh->gradient_on(e, f.values, m, base, out);
      for (size_t q = 0; q < out.size(); ++q)
        CHECK(out.data()[q] == Catch::Approx(G.data()[q]).margin(1e-11));
    }
  }
}

TEST_CASE("point evaluation reproduces vertex interpolation") {
  auto mesh = std::make_shared<CellMesh>(2, 4, 1.0);
  DisplacementField f(mesh, 2);
  Rng rng(11);
  for (double& v : f.values) v = rng.normal();
  // At vertices the interpolant matches the stored values.
  for (int v = 0; v < mesh->vertex_count(); ++v) {
    auto x = mesh->vertex_coords(v);
    auto val = f.eval(x);
    CHECK(val[0] == Catch::Approx(f.values[static_cast<size_t>(v) * 2]).margin(1e-12));
    CHECK(val[1] == Catch::Approx(f.values[static_cast<size_t>(v) * 2 + 1]).margin(1e-12));
  }
}

TEST_CASE("nested-mesh resampling is exact") {
  auto coarse = std::make_shared<CellMesh>(2, 4, 1.0);
  auto fine = std::make_shared<CellMesh>(2, 8, 1.0);
  DisplacementField fc(coarse, 2);
  Rng rng(5);
  for (int v = 0; v < coarse->vertex_count(); ++v)
    if (!coarse->is_boundary_vertex(v))
      for (int c = 0; c < 2; ++c) fc.values[static_cast<size_t>(v) * 2 + c] = rng.normal();
  DisplacementField ff(fine, 2);
  resample_field(fc, ff);
  // The piecewise-linear function is unchanged, so sampling anywhere agrees.
  Rng rs(17);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> x{rs.uniform01(), rs.uniform01()};
    auto a = fc.eval(x);
    auto b = ff.eval(x);
    CHECK(a[0] == Catch::Approx(b[0]).margin(1e-11));
    CHECK(a[1] == Catch::Approx(b[1]).margin(1e-11));
  }
}

TEST_CASE("vertex incidence covers every element corner once") {
  CellMesh mesh(2, 3);
  int total = 0;
  for (int v = 0; v < mesh.vertex_count(); ++v) total += static_cast<int>(mesh.incident_end(v) - mesh.incident_begin(v));
  CHECK(total == mesh.element_count() * 3);
}
