#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "quasihom/gamma.hpp"

using namespace quasihom;

namespace {
IntegrandSpec piecewise_quadratic_1d() {
  return make_coeff_power(1, 1, 2.0, piecewise_coeff({1.0, 4.0}, 2, 1));
}
MatrixMN scalar(double v) { return MatrixMN(1, 1, {v}); }
}  // namespace

TEST_CASE("oscillating minimum matches the layered oracle at whole periods") {
  auto spec = piecewise_quadratic_1d();
  double v = ieps_minimize(spec, scalar(1.0), 4, 64, 4, 7);
  CHECK(v == Catch::Approx(1.6).epsilon(0.01));
}

TEST_CASE("x-independent convex density: affine data is optimal at every eps") {
  auto spec = make_coeff_power(2, 2, 2.0, constant_coeff(1.0, 2));
  double v1 = ieps_minimize(spec, MatrixMN::identity(2), 1, 8, 3, 3);
  double v2 = ieps_minimize(spec, MatrixMN::identity(2), 2, 8, 3, 3);
  CHECK(v1 == Catch::Approx(2.0).margin(1e-8));
  CHECK(v2 == Catch::Approx(v1).margin(1e-12));  // identical problems, same seed
}

TEST_CASE("zero data with a coercive density vanishing at zero gives zero") {
  auto spec = piecewise_quadratic_1d();
  double v = ieps_minimize(spec, scalar(0.0), 2, 32, 3, 11);
  CHECK(v == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("period misalignment is rejected") {
  auto spec = piecewise_quadratic_1d();
  CHECK_THROWS_AS(ieps_minimize(spec, scalar(1.0), 3, 32, 2, 1), InvalidInput);
  CHECK_THROWS_AS(ieps_minimize(spec, scalar(1.0), 0, 32, 2, 1), InvalidInput);
}

TEST_CASE("coercivity bounds every reported minimum") {
  auto spec = piecewise_quadratic_1d();
  double v = ieps_minimize(spec, scalar(1.0), 2, 32, 3, 17);
  CHECK(v >= 0.0);
  CHECK(v >= 1.0 - 1e-6);  // W >= |xi'|^2 and the data forces mean gradient 1
}

TEST_CASE("layered 1d run: minima sit on the homogenized value at whole periods") {
  auto spec = piecewise_quadratic_1d();
  auto report = gamma_run(spec, scalar(1.0), {1, 2, 4}, 64, 3, 4, 23);
  REQUIRE(report.runs.size() == 3);
  CHECK(report.reference == Catch::Approx(1.6).epsilon(0.02));
  for (const auto& r : report.runs) {
    CHECK(r.relative_gap <= 0.02);
    CHECK(r.min_energy >= 0.0);
  }
}

TEST_CASE("x-independent double well: minima collapse to the relaxed value") {
  auto spec = make_double_well(1, 1, 1.0, constant_coeff(1.0, 1));
  auto report = gamma_run(spec, scalar(0.0), {1, 2}, 32, 2, 6, 29);
  CHECK(report.reference <= 0.05);
  for (const auto& r : report.runs) CHECK(r.min_energy <= 0.05);
}

TEST_CASE("eps lists must decrease strictly") {
  auto spec = piecewise_quadratic_1d();
  CHECK_THROWS_AS(gamma_run(spec, scalar(1.0), {2, 2}, 16, 1, 2, 1), InvalidInput);
  CHECK_THROWS_AS(gamma_run(spec, scalar(1.0), {4, 2}, 16, 1, 2, 1), InvalidInput);
  CHECK_THROWS_AS(gamma_run(spec, scalar(1.0), {}, 16, 1, 2, 1), InvalidInput);
}
