#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "quasihom/laminate.hpp"

using namespace quasihom;

namespace {
std::multiset<double> leaf_det_set(const LaminateTree& tree, double tol = 1e-10) {
  std::multiset<double> dets;
  for (auto [frac, idx] : tree.leaves()) {
    (void)frac;
    double d = det(tree.nodes[static_cast<size_t>(idx)].matrix);
    // Round onto a tolerance lattice so set comparison is robust.
    dets.insert(std::round(d / tol) * tol);
  }
  return dets;
}
}  // namespace

TEST_CASE("identity laminated onto {0.5, 2}") {
  auto tree = det_target_laminate(MatrixMN::identity(2), 0.5, 2.0);
  CHECK(tree.depth == 1);
  const auto& root = tree.root();
  CHECK_FALSE(root.is_leaf);
  CHECK(root.axis == 0);  // canonical first axis wins the tie
  CHECK(root.s_minus == Catch::Approx(-0.5));
  CHECK(root.s_plus == Catch::Approx(1.0));
  CHECK(root.lambda == Catch::Approx(2.0 / 3.0));
  auto dets = leaf_det_set(tree);
  CHECK(dets.count(0.5) == 1);
  CHECK(dets.count(2.0) == 1);
}

TEST_CASE("zero-average splits reconstruct the root matrix") {
  auto check_barycenter = [](const MatrixMN& xi, double t1, double t2) {
    auto tree = det_target_laminate(xi, t1, t2);
    MatrixMN bc = tree.barycenter();
    for (size_t q = 0; q < bc.size(); ++q)
      CHECK(bc.data()[q] == Catch::Approx(xi.data()[q]).margin(1e-12));
    double fr = 0.0;
    for (auto [f, idx] : tree.leaves()) fr += f;
    CHECK(fr == Catch::Approx(1.0).margin(1e-14));
  };
  check_barycenter(MatrixMN::identity(2), 0.5, 2.0);
  check_barycenter(MatrixMN::diag({1.5, 1.0}), 0.5, 2.0);
  check_barycenter(MatrixMN(2, 2, {0.3, -0.7, 1.1, 0.2}), -2.0, 2.0);
  check_barycenter(MatrixMN(2, 2), -1.0, 1.0);
}

TEST_CASE("generic matrix inside the slab laminated at depth 1") {
  auto tree = det_target_laminate(MatrixMN::diag({1.5, 1.0}), 0.5, 2.0);
  CHECK(tree.depth == 1);
  auto dets = leaf_det_set(tree);
  CHECK(dets.count(0.5) == 1);
  CHECK(dets.count(2.0) == 1);
}

TEST_CASE("zero matrix needs the determinant-preserving presplit") {
  auto tree = det_target_laminate(MatrixMN(2, 2), -1.0, 1.0);
  CHECK(tree.depth == 2);
  const auto& root = tree.root();
  CHECK_FALSE(root.is_leaf);
  CHECK(root.lambda == Catch::Approx(0.5));
  CHECK(root.s_minus == Catch::Approx(-1.0));
  CHECK(root.s_plus == Catch::Approx(1.0));
  auto dets = leaf_det_set(tree, 1e-8);
  CHECK(dets.count(-1.0) == 2);
  CHECK(dets.count(1.0) == 2);
}

TEST_CASE("laminate preconditions are enforced") {
  CHECK_THROWS_AS(det_target_laminate(MatrixMN::identity(2), 2.0, 3.0), InvalidInput);
  CHECK_THROWS_AS(det_target_laminate(MatrixMN::identity(2), -1.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(det_target_laminate(MatrixMN(2, 3), 0.0, 1.0), InvalidInput);
}

TEST_CASE("leaf determinants match targets on a matrix grid") {
  // Diagonal grid over [-2,2]^2; only matrices with det strictly inside the
  // slab participate.
  int built = 0;
  for (int iu = 0; iu <= 8; ++iu)
    for (int iv = 0; iv <= 8; ++iv) {
      double u = -2.0 + 0.5 * iu;
      double v = -2.0 + 0.5 * iv;
      MatrixMN xi = MatrixMN::diag({u, v});
      if (!(std::fabs(u * v) < 2.0)) continue;
      auto tree = det_target_laminate(xi, -2.0, 2.0);
      ++built;
      CHECK(tree.depth <= 2);
      for (auto [frac, idx] : tree.leaves()) {
        (void)frac;
        double d = det(tree.nodes[static_cast<size_t>(idx)].matrix);
        double err = std::min(std::fabs(d - 2.0), std::fabs(d + 2.0));
        CHECK(err <= 1e-8);
      }
    }
  CHECK(built > 40);
}

TEST_CASE("field build realizes the two-valued determinant histogram") {
  auto xi = MatrixMN::identity(2);
  auto tree = det_target_laminate(xi, 0.5, 2.0);
  auto lam = laminate_field_build(xi, tree, 64, 0.1);
  CHECK(lam.layer_volume <= 0.1);

  const CellMesh& mesh = *lam.field.mesh;
  MatrixMN g(2, 2);
  int pure = 0;
  for (int e = 0; e < mesh.element_count(); ++e) {
    int leaf = lam.cell_leaf[static_cast<size_t>(e)];
    if (leaf < 0) continue;
    ++pure;
    mesh.gradient_on(e, lam.field.values, 2, xi, g);
    double d = det(g);
    double err = std::min(std::fabs(d - 0.5), std::fabs(d - 2.0));
    CHECK(err <= 1e-8);
  }
  CHECK(pure >= static_cast<int>(0.9 * mesh.element_count()));

  // Zero trace at every boundary vertex.
  for (int v = 0; v < mesh.vertex_count(); ++v)
    if (mesh.is_boundary_vertex(v)) {
      CHECK(lam.field.values[static_cast<size_t>(v) * 2] == 0.0);
      CHECK(lam.field.values[static_cast<size_t>(v) * 2 + 1] == 0.0);
    }
}

TEST_CASE("trivial tree gives the zero field") {
  LaminateTree tree;
  tree.nodes.push_back({});
  tree.nodes[0].matrix = MatrixMN::identity(2);
  tree.nodes[0].is_leaf = true;
  tree.depth = 0;
  auto lam = laminate_field_build(MatrixMN::identity(2), tree, 8, 0.5);
  CHECK(lam.layer_volume == 0.0);
  for (double v : lam.field.values) CHECK(v == 0.0);
}

TEST_CASE("coarse meshes still meet a generous layer budget") {
  auto xi = MatrixMN::identity(2);
  auto tree = det_target_laminate(xi, 0.5, 2.0);
  auto lam = laminate_field_build(xi, tree, 8, 0.5);
  CHECK(lam.layer_volume <= 0.5);
  CHECK_THROWS_AS(laminate_field_build(xi, tree, 8, 1e-4), InfeasibleMesh);
}

TEST_CASE("growth certificate branches") {
  auto spec = make_hform(2, 2.0, 1.0, 1.0, constant_coeff(1.0, 2));

  // Polynomial branch: |det| over the threshold.
  auto c1 = growth_certificate(spec, MatrixMN::diag({3.0, 1.0}));
  CHECK_FALSE(c1.via_laminate);
  CHECK(c1.bound == Catch::Approx(11.0));

  // Laminate branch at the identity.
  auto c2 = growth_certificate(spec, MatrixMN::identity(2));
  CHECK(c2.via_laminate);
  CHECK(is_finite(c2.bound));
  REQUIRE(c2.field.has_value());

  // Laminate branch at zero (needs the presplit).
  auto c3 = growth_certificate(spec, MatrixMN(2, 2));
  CHECK(c3.via_laminate);
  CHECK(is_finite(c3.bound));
}
