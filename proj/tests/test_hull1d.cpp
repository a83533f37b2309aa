#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "quasihom/hull1d.hpp"

using namespace quasihom;

namespace {
// Independent oracle: lower envelope via a double Legendre transform on the
// same sample grid.
FunctionTable1D biconjugate(const std::function<double(double)>& f, double lo, double hi,
                            int samples) {
  std::vector<double> xs(static_cast<size_t>(samples)), fx(static_cast<size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    xs[static_cast<size_t>(i)] = lo + (hi - lo) * i / (samples - 1);
    fx[static_cast<size_t>(i)] = f(xs[static_cast<size_t>(i)]);
  }
  // Slopes: all chords between finite sample pairs.
  std::vector<double> slopes;
  for (size_t i = 0; i < xs.size(); ++i)
    for (size_t j = i + 1; j < xs.size(); ++j)
      if (is_finite(fx[i]) && is_finite(fx[j])) slopes.push_back((fx[j] - fx[i]) / (xs[j] - xs[i]));
  slopes.push_back(0.0);
  FunctionTable1D out;
  out.xs = xs;
  out.values.assign(xs.size(), kInf);
  for (size_t i = 0; i < xs.size(); ++i) {
    double best = -kInf;
    for (double s : slopes) {
      // f*(s) = sup_x (s x - f(x)); value = s x_i - f*(s)
      double conj = -kInf;
      for (size_t j = 0; j < xs.size(); ++j)
        if (is_finite(fx[j])) conj = std::max(conj, s * xs[j] - fx[j]);
      best = std::max(best, s * xs[i] - conj);
    }
    out.values[i] = best;
  }
  return out;
}
}  // namespace

TEST_CASE("convex functions are fixed points of the hull") {
  auto table = conv_envelope_1d([](double x) { return x * x; }, -2.0, 2.0, 41);
  CHECK(table.eval(1.0) == Catch::Approx(1.0).margin(1e-12));
  CHECK(table.eval(0.0) == Catch::Approx(0.0).margin(1e-12));
  CHECK(table.eval(-2.0) == Catch::Approx(4.0).margin(1e-12));
}

TEST_CASE("double well hull flattens between the wells") {
  auto dw = [](double x) { double w = x * x - 1.0; return w * w; };
  auto table = conv_envelope_1d(dw, -2.0, 2.0, 41);
  CHECK(table.eval(0.0) == Catch::Approx(0.0).margin(1e-12));
  CHECK(table.eval(0.5) == Catch::Approx(0.0).margin(1e-12));
  CHECK(table.eval(2.0) == Catch::Approx(9.0).margin(1e-12));
  CHECK(table.eval(1.5) == Catch::Approx(dw(1.5)).margin(1e-12));
}

TEST_CASE("hull bridges across infinite samples") {
  auto f = [](double x) {
    if (x == 0.0) return kInf;
    double d = std::fabs(x) - 1.0;
    return d * d;
  };
  auto table = conv_envelope_1d(f, -2.0, 2.0, 41);
  CHECK(is_finite(table.eval(0.0)));
  CHECK(table.eval(0.0) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("hull agrees with the double Legendre transform") {
  auto f = [](double x) { return std::cos(3.0 * x) + 0.3 * x * x; };
  int n = 33;
  auto hull = conv_envelope_1d(f, -2.0, 2.0, n);
  auto oracle = biconjugate(f, -2.0, 2.0, n);
  for (size_t i = 0; i < hull.xs.size(); ++i)
    CHECK(hull.values[i] == Catch::Approx(oracle.values[i]).margin(1e-9));
}

TEST_CASE("hull output is convex and below the samples") {
  auto f = [](double x) { return std::sin(5.0 * x) + x * x * 0.1; };
  auto hull = conv_envelope_1d(f, -3.0, 3.0, 61);
  for (size_t i = 0; i < hull.xs.size(); ++i) CHECK(hull.values[i] <= f(hull.xs[i]) + 1e-12);
  for (size_t i = 1; i + 1 < hull.xs.size(); ++i) {
    double mid = 0.5 * (hull.values[i - 1] + hull.values[i + 1]);
    CHECK(hull.values[i] <= mid + 1e-10);
  }
}

TEST_CASE("degenerate inputs are rejected") {
  CHECK_THROWS_AS(conv_envelope_1d([](double) { return kInf; }, 0.0, 1.0, 11), DegenerateInput);
  CHECK_THROWS_AS(conv_envelope_1d([](double x) { return x; }, 1.0, 0.0, 11), InvalidInput);
}
