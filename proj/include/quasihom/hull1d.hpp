#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "quasihom/common.hpp"

namespace quasihom {

/// Piecewise-linear function on a uniform grid; +inf marks points outside the
/// effective domain.
struct FunctionTable1D {
  std::vector<double> xs;
  std::vector<double> values;

  double eval(double x) const {
    if (xs.empty()) return kInf;
    if (x < xs.front() || x > xs.back()) return kInf;
    size_t i = static_cast<size_t>(std::lower_bound(xs.begin(), xs.end(), x) - xs.begin());
    if (i == 0) return values[0];
    if (xs[i] == x) return values[i];
    double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    double a = values[i - 1], b = values[i];
    if (a == kInf || b == kInf) return kInf;
    return (1.0 - t) * a + t * b;
  }
};

/// Lower convex envelope of the sampled graph of f over [lo, hi]. Infinite
/// samples are simply absent from the hull, so the envelope bridges across
/// singular points; in one dimension this is the common value of every
/// convexification notion used here, which makes it the reference oracle.
inline FunctionTable1D conv_envelope_1d(const std::function<double(double)>& f, double lo,
                                        double hi, int samples) {
  if (samples < 2 || !(lo < hi)) throw InvalidInput("conv_envelope_1d: bad domain or sample count");
  FunctionTable1D table;
  table.xs.resize(static_cast<size_t>(samples));
  std::vector<double> fx(static_cast<size_t>(samples));
  int finite = 0;
  for (int i = 0; i < samples; ++i) {
    double x = lo + (hi - lo) * i / (samples - 1);
    table.xs[static_cast<size_t>(i)] = x;
    double v = f(x);
    fx[static_cast<size_t>(i)] = v;
    if (is_finite(v)) ++finite;
  }
  if (finite < 2) throw DegenerateInput("conv_envelope_1d: fewer than two finite samples");

  // Monotone-chain lower hull over the finite samples.
  std::vector<size_t> hull;
  auto cross_keeps = [&](size_t a, size_t b, size_t c) {
    // Keep b if a -> b -> c turns strictly left, i.e. b lies below chord ac.
    double x1 = table.xs[b] - table.xs[a], y1 = fx[b] - fx[a];
    double x2 = table.xs[c] - table.xs[a], y2 = fx[c] - fx[a];
    return x1 * y2 - y1 * x2 > 0.0;
  };
  for (size_t i = 0; i < fx.size(); ++i) {
    if (!is_finite(fx[i])) continue;
    while (hull.size() >= 2 && !cross_keeps(hull[hull.size() - 2], hull.back(), i)) hull.pop_back();
    hull.push_back(i);
  }

  table.values.assign(fx.size(), kInf);
  size_t seg = 0;
  for (size_t i = 0; i < fx.size(); ++i) {
    double x = table.xs[i];
    if (x < table.xs[hull.front()] || x > table.xs[hull.back()]) continue;  // outside hull domain
    while (seg + 1 < hull.size() && table.xs[hull[seg + 1]] < x) ++seg;
    size_t a = hull[seg];
    size_t b = (seg + 1 < hull.size()) ? hull[seg + 1] : hull[seg];
    if (a == b || table.xs[b] == table.xs[a]) {
      table.values[i] = fx[a];
    } else {
      double t = (x - table.xs[a]) / (table.xs[b] - table.xs[a]);
      table.values[i] = (1.0 - t) * fx[a] + t * fx[b];
    }
  }
  return table;
}

}  // namespace quasihom
