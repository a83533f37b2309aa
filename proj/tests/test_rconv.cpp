#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "quasihom/hull1d.hpp"
#include "quasihom/laminate.hpp"
#include "quasihom/rconv.hpp"

using namespace quasihom;

namespace {
MatrixGridSpec grid_1d(double lo, double hi, int nodes) {
  MatrixGridSpec g;
  g.m = 1;
  g.N = 1;
  g.lo = {lo};
  g.hi = {hi};
  g.nodes = nodes;
  return g;
}

MatrixGridSpec grid_2x2(double lo, double hi, int nodes) {
  MatrixGridSpec g;
  g.m = 2;
  g.N = 2;
  g.lo.assign(4, lo);
  g.hi.assign(4, hi);
  g.nodes = nodes;
  return g;
}
}  // namespace

TEST_CASE("convex functions are fixed points of the lattice iteration") {
  auto f = [](const MatrixMN& m) { return m.frobenius() * m.frobenius(); };
  auto env = rconv_lattice(f, grid_2x2(-2.0, 2.0, 5), 20, 1e-10);
  CHECK(env.converged);
  CHECK(env.iterations <= 2);  // nothing to mix, first sweep already fixed
  auto node = env.find_node(MatrixMN::identity(2));
  REQUIRE(node.has_value());
  CHECK(env.values[*node] == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("scalar lattice envelope matches the convex hull oracle") {
  auto dw = [](const MatrixMN& m) {
    double w = m(0, 0) * m(0, 0) - 1.0;
    return w * w;
  };
  auto env = rconv_lattice(dw, grid_1d(-2.0, 2.0, 41), 60, 1e-10);
  CHECK(env.converged);
  auto hull = conv_envelope_1d([](double t) { double w = t * t - 1.0; return w * w; }, -2.0, 2.0, 41);
  for (size_t node = 0; node < env.values.size(); ++node) {
    double x = env.node_matrix(node)(0, 0);
    // The lattice restricts mixing to grid points, so it sits on or above
    // the hull, within the grid resolution.
    CHECK(env.values[node] >= hull.eval(x) - 1e-10);
    CHECK(env.values[node] <= hull.eval(x) + 0.05);
  }
  auto zero = env.find_node(MatrixMN(1, 1, {0.0}));
  REQUIRE(zero.has_value());
  CHECK(env.values[*zero] == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("values never increase across iterations") {
  auto bumpy = [](const MatrixMN& m) {
    return std::cos(3.0 * m(0, 0)) + 0.2 * m(0, 0) * m(0, 0) + 1.5;
  };
  auto g = grid_1d(-3.0, 3.0, 31);
  auto env1 = rconv_lattice(bumpy, g, 1, 0.0);
  auto env2 = rconv_lattice(bumpy, g, 2, 0.0);
  auto env9 = rconv_lattice(bumpy, g, 9, 0.0);
  for (size_t n = 0; n < env1.values.size(); ++n) {
    double f0 = bumpy(env1.node_matrix(n));
    CHECK(env1.values[n] <= f0 + 1e-12);
    CHECK(env2.values[n] <= env1.values[n] + 1e-12);
    CHECK(env9.values[n] <= env2.values[n] + 1e-12);
  }
}

TEST_CASE("singular slice relaxes to finite values on the lattice") {
  auto spec = make_hform(2, 2.0, 1.0, 1.0, constant_coeff(1.0, 2));
  std::vector<double> x{0.0, 0.0};
  auto slice = [&](const MatrixMN& m) { return spec.eval_unchecked(x, m); };
  auto env = rconv_lattice(slice, grid_2x2(-2.5, 2.5, 9), 30, 1e-8);

  auto zero = env.find_node(MatrixMN(2, 2));
  REQUIRE(zero.has_value());
  CHECK(slice(MatrixMN(2, 2)) == kInf);
  CHECK(is_finite(env.values[*zero]));

  auto cert = growth_certificate(spec, MatrixMN(2, 2));
  CHECK(env.values[*zero] <= cert.bound);
}

TEST_CASE("grid validation rejects nonuniform steps") {
  MatrixGridSpec g;
  g.m = 1;
  g.N = 2;
  g.lo = {-1.0, -2.0};
  g.hi = {1.0, 2.0};
  g.nodes = 5;
  auto f = [](const MatrixMN&) { return 1.0; };
  CHECK_THROWS_AS(rconv_lattice(f, g, 5, 1e-9), InvalidInput);
}
