#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "quasihom/envelope.hpp"
#include "quasihom/hull1d.hpp"

using namespace quasihom;

namespace {
IntegrandSpec dw1d() { return make_double_well(1, 1, 1.0, constant_coeff(1.0, 1)); }
IntegrandSpec hform2d() { return make_hform(2, 2.0, 1.0, 1.0, constant_coeff(1.0, 2)); }
IntegrandSpec power2d() { return make_coeff_power(2, 2, 2.0, constant_coeff(1.0, 2)); }

MatrixMN scalar(double v) { return MatrixMN(1, 1, {v}); }
}  // namespace

TEST_CASE("cell energy of the zero field is the density itself") {
  auto spec = hform2d();
  auto mesh = std::make_shared<CellMesh>(2, 8, 1.0);
  DisplacementField zero(mesh, 2);
  std::vector<double> x{0.0, 0.0};
  CHECK(cell_energy(spec, x, MatrixMN::identity(2), zero) == Catch::Approx(3.0));
  CHECK(cell_energy(spec, x, MatrixMN(2, 2), zero) == kInf);
}

TEST_CASE("quadratic energy splits into macroscopic and fluctuation parts") {
  auto spec = power2d();
  auto mesh = std::make_shared<CellMesh>(2, 8, 1.0);
  std::vector<double> x{0.0, 0.0};
  Rng rng(23);
  DisplacementField f(mesh, 2);
  for (int v = 0; v < mesh->vertex_count(); ++v)
    if (!mesh->is_boundary_vertex(v))
      for (int c = 0; c < 2; ++c) f.values[static_cast<size_t>(v) * 2 + c] = 0.05 * rng.normal();
  MatrixMN xi = MatrixMN::identity(2);
  // Zero-mean gradients kill the cross term, so the energy is |xi|^2 plus the
  // squared gradient norm of the fluctuation.
  MatrixMN zero(2, 2), g(2, 2);
  double grad2 = 0.0;
  for (int e = 0; e < mesh->element_count(); ++e) {
    mesh->gradient_on(e, f.values, 2, zero, g);
    grad2 += mesh->element_volume() * g.frobenius() * g.frobenius();
  }
  double energy = cell_energy(spec, x, xi, f);
  CHECK(energy == Catch::Approx(2.0 + grad2).margin(1e-10));
  CHECK(energy >= 2.0);
}

TEST_CASE("laminate fields have finite singular energy") {
  auto spec = hform2d();
  MatrixMN xi = MatrixMN::identity(2);
  auto cert = growth_certificate(spec, xi, 32);
  REQUIRE(cert.field.has_value());
  double e = cell_energy(spec, {0.0, 0.0}, xi, cert.field->field);
  // The pure cells carry determinants +/-2; only the layer can blow up.
  CHECK(e >= 0.0);
}

TEST_CASE("convex integrands keep the zero field optimal") {
  auto spec = power2d();
  auto est = zf_estimate(spec, {0.0, 0.0}, MatrixMN::identity(2), 8, 6, 1234);
  CHECK(est.value == Catch::Approx(2.0).margin(1e-6));
  CHECK(est.value <= 2.0 + 1e-12);
}

TEST_CASE("double-well estimate collapses at the well midpoint") {
  auto spec = dw1d();
  auto est = zf_estimate(spec, {0.0}, scalar(0.0), 64, 8, 7);
  CHECK(est.value <= 0.05);
  CHECK(est.per_start.size() >= 8);
}

TEST_CASE("estimates never exceed the pointwise density") {
  auto spec = hform2d();
  auto est = zf_estimate(spec, {0.0, 0.0}, MatrixMN::identity(2), 8, 4, 3);
  CHECK(est.value <= 3.0 + 1e-12);
}

TEST_CASE("refinement chains are nonincreasing") {
  auto spec = dw1d();
  auto est = zf_refine(spec, {0.0}, scalar(0.0), {8, 16, 32}, 6, 11);
  REQUIRE(est.chain.size() == 3);
  for (size_t i = 1; i < est.chain.size(); ++i) CHECK(est.chain[i].second <= est.chain[i - 1].second + 1e-12);
  CHECK(est.chain.back().second <= 0.02);

  auto convex = power2d();
  auto estc = zf_refine(convex, {0.0, 0.0}, MatrixMN::identity(2), {4, 8}, 4, 2);
  CHECK(estc.chain.front().second == Catch::Approx(2.0).margin(1e-9));
  CHECK(estc.chain.back().second == Catch::Approx(2.0).margin(1e-9));
}

TEST_CASE("singular estimates stay finite near the slab via the laminate start") {
  auto spec = make_hform(2, 2.0, 1.0, 1.0, constant_coeff(1.0, 2));
  MatrixMN xi = MatrixMN::diag({0.5, 0.2});  // det 0.1, deep inside (-2, 2)
  auto est = zf_refine(spec, {0.0, 0.0}, xi, {8, 16}, 6, 5);
  CHECK(is_finite(est.chain.front().second));
  CHECK(is_finite(est.value));
  for (size_t i = 1; i < est.chain.size(); ++i) CHECK(est.chain[i].second <= est.chain[i - 1].second + 1e-12);
}

TEST_CASE("bad refinement chains are rejected") {
  auto spec = dw1d();
  CHECK_THROWS_AS(zf_refine(spec, {0.0}, scalar(0.0), {8, 12}, 2, 1), InvalidInput);
  CHECK_THROWS_AS(zf_refine(spec, {0.0}, scalar(0.0), {16, 8}, 2, 1), InvalidInput);
}

TEST_CASE("quasiconvexity probe on convex and nonconvex slices") {
  std::function<double(const MatrixMN&)> convex = [](const MatrixMN& g) {
    return g.frobenius() * g.frobenius();
  };
  auto probe_c = quasiconvexity_probe(convex, MatrixMN::identity(2), 4, 8, 21);
  CHECK_FALSE(probe_c.violated);

  std::function<double(const MatrixMN&)> dw = [](const MatrixMN& g) {
    double w = g(0, 0) * g(0, 0) - 1.0;
    return w * w;
  };
  auto probe_d = quasiconvexity_probe(dw, MatrixMN(1, 1, {0.0}), 4, 64, 22);
  CHECK(probe_d.violated);
  CHECK(probe_d.gap >= 0.5);
  REQUIRE(probe_d.witness.has_value());

  // The hull of the double well is quasiconvex, so the probe finds nothing.
  auto hull = conv_envelope_1d([](double t) { double w = t * t - 1.0; return w * w; }, -3.0, 3.0, 121);
  std::function<double(const MatrixMN&)> hull_slice = [&](const MatrixMN& g) {
    return hull.eval(g(0, 0));
  };
  auto probe_h = quasiconvexity_probe(hull_slice, MatrixMN(1, 1, {0.0}), 4, 64, 23, 0.05);
  CHECK_FALSE(probe_h.violated);
}

TEST_CASE("domain invariance of the relaxed value") {
  auto spec = dw1d();
  auto [val_y, val_d] = domain_invariance_check(spec, {0.0}, scalar(0.0), 2.0, 64, 6, 31);
  CHECK(std::fabs(val_y - val_d) <= 0.05);

  auto hspec = hform2d();
  auto [hy, hd] = domain_invariance_check(hspec, {0.0, 0.0}, MatrixMN::identity(2), 0.5, 8, 4, 32);
  CHECK(std::fabs(hy - hd) <= 0.1 * (1.0 + hy));
}

TEST_CASE("x-continuity propagates to the estimates") {
  auto spec = make_hform(2, 2.0, 1.0, 1.0, sinusoidal_coeff(2.0, 1.0, 0, 2));
  MatrixMN xi = MatrixMN::diag({1.5, 1.0});
  std::vector<double> x1{0.1, 0.0}, x2{0.35, 0.0};
  auto e1 = zf_refine(spec, x1, xi, {8, 16}, 4, 41);
  auto e2 = zf_refine(spec, x2, xi, {8, 16}, 4, 41);
  double gap1 = e1.chain.front().second - e1.chain.back().second;
  double gap2 = e2.chain.front().second - e2.chain.back().second;
  double tol = 2.0 * (std::fabs(gap1) + std::fabs(gap2));
  double w = spec.omega(0.25);
  CHECK(e1.value <= w * (1.0 + e2.value) + e2.value + tol + 1e-9);
  CHECK(e2.value <= w * (1.0 + e1.value) + e1.value + tol + 1e-9);
}
