#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "quasihom/common.hpp"
#include "quasihom/matrix.hpp"
#include "quasihom/rng.hpp"

namespace quasihom {

// ---------------------------------------------------------------------------
// Determinant penalty profile h : R -> [0,+inf].
// ---------------------------------------------------------------------------

enum class HKind { Barrier, None, CustomTable };

/// The built-in profile takes the value T left of -T, +inf on the compression
/// band [-T,0], and decays like t^{-s} for t > 0. Custom tables are piecewise
/// constant from the left with the same t^{-s} tail right of the last
/// breakpoint; pieces may be +inf but must be pointwise evaluable.
struct HProfile {
  HKind kind = HKind::None;
  double T = 0.0;  // nonnegative
  double s = 1.0;  // positive
  std::vector<double> breakpoints;  // strictly increasing; custom-table only
  std::vector<double> values;       // values[i] on [breakpoints[i], breakpoints[i+1])

  double eval(double t) const {
    switch (kind) {
      case HKind::None:
        return 0.0;
      case HKind::Barrier:
        if (t < -T) return T;
        if (t <= 0.0) return kInf;
        return std::pow(t, -s);
      case HKind::CustomTable: {
        if (breakpoints.empty()) return 0.0;
        if (t < breakpoints.front()) return values.front();
        if (t >= breakpoints.back()) return std::pow(t, -s);
        size_t i = static_cast<size_t>(std::upper_bound(breakpoints.begin(), breakpoints.end(), t) -
                                       breakpoints.begin()) -
                   1;
        return values[i];
      }
    }
    return 0.0;
  }

  bool has_infinite_band() const {
    if (kind == HKind::Barrier) return true;  // [-T,0] always maps to +inf
    if (kind == HKind::CustomTable)
      for (double v : values)
        if (v == kInf) return true;
    return false;
  }

  // Interval of t-values mapped to +inf (empty when none).
  std::optional<std::pair<double, double>> infinite_band() const {
    if (kind == HKind::Barrier) return std::pair<double, double>{-T, 0.0};
    if (kind == HKind::CustomTable) {
      double lo = kInf, hi = -kInf;
      for (size_t i = 0; i < values.size(); ++i)
        if (values[i] == kInf) {
          lo = std::min(lo, breakpoints[i]);
          hi = std::max(hi, i + 1 < breakpoints.size() ? breakpoints[i + 1] : breakpoints.back());
        }
      if (lo <= hi) return std::pair<double, double>{lo, hi};
    }
    return std::nullopt;
  }

  // Bounded-tail constants: h(t) <= delta whenever |t| >= gamma.
  std::optional<std::pair<double, double>> tail_bound() const {
    if (kind == HKind::None) return std::pair<double, double>{1.0, 0.0};
    if (kind == HKind::Barrier) {
      double gamma = T > 0.0 ? 2.0 * T : 1.0;
      double delta = std::max(std::pow(gamma, -s), T);
      return std::pair<double, double>{gamma, delta};
    }
    // Custom table: outside [-gamma, gamma] only the first piece and the
    // decaying tail remain; both must be finite.
    if (breakpoints.empty()) return std::pair<double, double>{1.0, 0.0};
    double gamma = std::max({std::fabs(breakpoints.front()), std::fabs(breakpoints.back()), 1e-12});
    double first = values.front();
    double tail = std::pow(std::max(breakpoints.back(), 1e-12), -s);
    if (first == kInf) return std::nullopt;
    return std::pair<double, double>{gamma, std::max(first, tail)};
  }
};

// ---------------------------------------------------------------------------
// 1-periodic coefficient field a : R^N -> [eta, sup.
// ---------------------------------------------------------------------------

enum class CoeffKind { Constant, Sinusoidal, PiecewiseGrid };

struct CoefficientField {
  CoeffKind kind = CoeffKind::Constant;
  int dim = 1;

  double value = 1.0;  // constant

  double offset = 2.0;  // sinusoidal: offset + amplitude * sin(2*pi*frequency*x[axis])
  double amplitude = 1.0;
  int axis = 0;
  int frequency = 1;

  int resolution = 1;          // piecewise-grid: resolution cells per axis
  std::vector<double> cells;   // resolution^dim values, row-major in axis order

  double eval(const std::vector<double>& x) const {
    switch (kind) {
      case CoeffKind::Constant:
        return value;
      case CoeffKind::Sinusoidal:
        // Reduce first so periodicity is exact in floating point.
        return offset + amplitude * std::sin(6.283185307179586476925286766559 * frequency *
                                             frac01(x[static_cast<size_t>(axis)]));
      case CoeffKind::PiecewiseGrid: {
        size_t idx = 0;
        for (int d = 0; d < dim; ++d) {
          int c = static_cast<int>(frac01(x[static_cast<size_t>(d)]) * resolution);
          if (c >= resolution) c = resolution - 1;
          idx = idx * static_cast<size_t>(resolution) + static_cast<size_t>(c);
        }
        return cells[idx];
      }
    }
    return value;
  }

  double lower_bound() const {
    switch (kind) {
      case CoeffKind::Constant:
        return value;
      case CoeffKind::Sinusoidal:
        return offset - std::fabs(amplitude);
      case CoeffKind::PiecewiseGrid:
        return *std::min_element(cells.begin(), cells.end());
    }
    return value;
  }

  double sup_norm() const {
    switch (kind) {
      case CoeffKind::Constant:
        return value;
      case CoeffKind::Sinusoidal:
        return offset + std::fabs(amplitude);
      case CoeffKind::PiecewiseGrid:
        return *std::max_element(cells.begin(), cells.end());
    }
    return value;
  }

  // sup { |a(x1)-a(x2)| : |x1-x2| <= t }, as a closed-form envelope.
  double oscillation(double t) const {
    if (t <= 0.0) return 0.0;
    switch (kind) {
      case CoeffKind::Constant:
        return 0.0;
      case CoeffKind::Sinusoidal: {
        double lip = 6.283185307179586476925286766559 * frequency * std::fabs(amplitude);
        return std::min(2.0 * std::fabs(amplitude), lip * t);
      }
      case CoeffKind::PiecewiseGrid:
        return sup_norm() - lower_bound();  // jumps at cell faces
    }
    return 0.0;
  }

  bool continuous() const { return kind != CoeffKind::PiecewiseGrid || resolution == 1; }

  // Coarsest lattice whose cells have constant a; meshes must align with it
  // for centroid quadrature to be exact.
  int discontinuity_lattice() const { return kind == CoeffKind::PiecewiseGrid ? resolution : 1; }
};

// ---------------------------------------------------------------------------
// Integrand spec.
// ---------------------------------------------------------------------------

enum class Form { HForm, Custom };
enum class CustomKind { CoeffPower, CoeffDoubleWell };

/// W(x, xi):
///   H-form:            |xi|^p + a(x) h(det xi)          (requires m == N)
///   coeff-power:       a(x) |xi|^p
///   coeff-double-well: a(x) (|xi|^2 - r^2)^2
/// |.| is the Frobenius norm. A programmatic callable can override the custom
/// branch for tests; it does not serialize.
struct IntegrandSpec {
  int m = 1;
  int N = 1;
  double p = 2.0;
  Form form = Form::HForm;
  CoefficientField a;
  HProfile h;
  double coercivity_C = 1.0;
  std::optional<double> growth_c;
  std::optional<double> alpha;  // declared polynomial-bound threshold on |det|
  std::optional<double> beta;   // declared polynomial-bound constant
  CustomKind custom_kind = CustomKind::CoeffPower;
  double well_radius = 1.0;

  std::function<double(const std::vector<double>&, const MatrixMN&)> custom_fn;  // optional

  void validate_shape(const MatrixMN& xi) const {
    if (xi.rows() != m || xi.cols() != N)
      throw InvalidInput("eval: matrix dimensions do not match the integrand spec");
    if (form == Form::HForm && m != N)
      throw InvalidInput("eval: determinant form requires square matrices (m == N)");
  }

  double eval(const std::vector<double>& x, const MatrixMN& xi) const {
    validate_shape(xi);
    return eval_unchecked(x, xi);
  }

  // Hot path used by the minimizers; shape is validated once by the caller.
  double eval_unchecked(const std::vector<double>& x, const MatrixMN& xi) const {
    if (form == Form::HForm) {
      double nrm = xi.frobenius();
      double hv = h.eval(det(xi));
      if (hv == kInf) return kInf;
      return std::pow(nrm, p) + a.eval(x) * hv;
    }
    if (custom_fn) return custom_fn(x, xi);
    double nrm2 = 0.0;
    for (double v : xi.entries()) nrm2 += v * v;
    if (custom_kind == CustomKind::CoeffPower) return a.eval(x) * std::pow(std::sqrt(nrm2), p);
    double w = nrm2 - well_radius * well_radius;
    return a.eval(x) * w * w;
  }

  // Search surrogate: finite values are clamped at the cap; inside the
  // infinite determinant band the value slopes upward with the distance to
  // the nearest band edge, which lets a descent walk trapped cells out of
  // the band one coordinate at a time. Never used for reported energies.
  double eval_guided(const std::vector<double>& x, const MatrixMN& xi, double cap) const {
    if (form == Form::HForm) {
      double d = det(xi);
      double hv = h.eval(d);
      if (hv == kInf) {
        auto band = h.infinite_band();
        double dist = 0.5;
        if (band && band->second > band->first) {
          double w = band->second - band->first;
          dist = std::min(d - band->first, band->second - d) / w;
          if (dist < 0.0) dist = 0.0;
        }
        double nrm = xi.frobenius();
        return cap * (1.0 + dist) + std::pow(nrm, p);
      }
      double v = std::pow(xi.frobenius(), p) + a.eval(x) * hv;
      return v < cap ? v : cap;
    }
    double v = eval_unchecked(x, xi);
    return v < cap ? v : cap;
  }

  // Polynomial upper-bound constants (alpha, beta): declared ones win; for the
  // determinant form they follow from the profile's tail bound,
  //   alpha = gamma,  beta = max{1, delta * sup a}.
  std::optional<std::pair<double, double>> chat2_constants() const {
    if (alpha && beta) return std::pair<double, double>{*alpha, *beta};
    if (form == Form::HForm) {
      auto tb = h.tail_bound();
      if (!tb) return std::nullopt;
      return std::pair<double, double>{tb->first, std::max(1.0, tb->second * a.sup_norm())};
    }
    return std::nullopt;
  }

  bool singular() const { return form == Form::HForm && h.has_infinite_band(); }

  // Continuity-in-x modulus: f(x1,xi) <= omega(|x1-x2|)(1+f(x2,xi)) + f(x2,xi).
  double omega(double t) const {
    double eta = a.lower_bound();
    if (eta <= 0.0) return kInf;
    return a.oscillation(t) / eta;
  }
};

// Convenience constructors for the specs exercised throughout the suite.

inline IntegrandSpec make_hform(int n, double p, double T, double s, CoefficientField a = {}) {
  IntegrandSpec spec;
  spec.m = n;
  spec.N = n;
  spec.p = p;
  spec.form = Form::HForm;
  spec.a = a;
  spec.a.dim = n;
  spec.h.kind = HKind::Barrier;
  spec.h.T = T;
  spec.h.s = s;
  spec.coercivity_C = 1.0;
  return spec;
}

inline IntegrandSpec make_coeff_power(int m, int n, double p, CoefficientField a = {}) {
  IntegrandSpec spec;
  spec.m = m;
  spec.N = n;
  spec.p = p;
  spec.form = Form::Custom;
  spec.custom_kind = CustomKind::CoeffPower;
  spec.a = a;
  spec.a.dim = n;
  spec.coercivity_C = std::max(a.lower_bound(), 1e-12);
  return spec;
}

inline IntegrandSpec make_double_well(int m, int n, double radius, CoefficientField a = {}) {
  IntegrandSpec spec;
  spec.m = m;
  spec.N = n;
  spec.p = 4.0;  // growth exponent of the quartic well
  spec.form = Form::Custom;
  spec.custom_kind = CustomKind::CoeffDoubleWell;
  spec.well_radius = radius;
  spec.a = a;
  spec.a.dim = n;
  spec.coercivity_C = 0.01;  // nominal; the well bottoms genuinely violate coercivity
  return spec;
}

inline CoefficientField constant_coeff(double v, int dim = 1) {
  CoefficientField a;
  a.kind = CoeffKind::Constant;
  a.value = v;
  a.dim = dim;
  return a;
}

inline CoefficientField sinusoidal_coeff(double offset, double amplitude, int axis, int dim,
                                         int frequency = 1) {
  CoefficientField a;
  a.kind = CoeffKind::Sinusoidal;
  a.offset = offset;
  a.amplitude = amplitude;
  a.axis = axis;
  a.frequency = frequency;
  a.dim = dim;
  return a;
}

inline CoefficientField piecewise_coeff(std::vector<double> cells, int resolution, int dim) {
  CoefficientField a;
  a.kind = CoeffKind::PiecewiseGrid;
  a.resolution = resolution;
  a.cells = std::move(cells);
  a.dim = dim;
  return a;
}

// ---------------------------------------------------------------------------
// Structural condition checks.
// ---------------------------------------------------------------------------

/// Sampled verification record. Every boolean refers to the (sample_size,
/// seed) pair stored here, so any reported failure is reproducible.
struct ConditionReport {
  int sample_size = 0;
  std::uint64_t seed = 0;

  bool coercivity_ok = false;
  double worst_coercivity_ratio = kInf;  // min f / (C |xi|^p) over finite samples

  bool periodicity_ok = false;

  bool c1_ok = false;
  bool omega_vanishes = false;
  std::vector<std::pair<double, double>> omega_envelope;  // (t, empirical omega(t))

  std::optional<std::pair<double, double>> chat2;  // (alpha, beta)
  bool chat2_declared_or_derived = false;
  bool chat2_ok = false;  // polynomial bound verified on the sample

  std::vector<std::string> notes;
};

namespace detail {

inline MatrixMN sample_matrix(int m, int n, Rng& rng) {
  MatrixMN xi(m, n);
  double scale = std::exp(rng.uniform(-1.0, 1.2));  // spans gentle to large gradients
  for (double& v : xi.entries()) v = scale * rng.normal();
  return xi;
}

// Sample points sit on a dyadic lattice so that adding a whole period is an
// exact floating-point operation; otherwise x+1 rounds away low bits of x and
// no implementation could satisfy the periodicity identity bit-for-bit.
inline std::vector<double> sample_point(int n, Rng& rng) {
  std::vector<double> x(static_cast<size_t>(n));
  for (double& v : x) v = static_cast<double>(rng.next_u64() >> 38) * 0x1.0p-26;
  return x;
}

}  // namespace detail

inline ConditionReport check_conditions(const IntegrandSpec& spec, int sample_size,
                                        std::uint64_t seed) {
  ConditionReport rep;
  rep.sample_size = sample_size;
  rep.seed = seed;
  Rng rng(seed);

  // Coercivity and periodicity on a common sample.
  rep.coercivity_ok = true;
  rep.periodicity_ok = true;
  rep.worst_coercivity_ratio = kInf;
  for (int it = 0; it < sample_size; ++it) {
    auto x = detail::sample_point(spec.N, rng);
    MatrixMN xi = detail::sample_matrix(spec.m, spec.N, rng);
    double f = spec.eval(x, xi);
    double nrm = xi.frobenius();
    if (is_finite(f) && nrm > 1e-9) {
      double ratio = f / (spec.coercivity_C * std::pow(nrm, spec.p));
      rep.worst_coercivity_ratio = std::min(rep.worst_coercivity_ratio, ratio);
      if (ratio < 1.0 - 1e-12) rep.coercivity_ok = false;
    }
    for (int i = 0; i < spec.N; ++i) {
      auto xs = x;
      xs[static_cast<size_t>(i)] += 1.0;
      double fs = spec.eval(xs, xi);
      if (!(fs == f || (std::isinf(fs) && std::isinf(f)))) rep.periodicity_ok = false;
    }
  }

  // Serrin-type continuity in x: empirical oscillation envelope plus the
  // inequality check with the analytic modulus.
  rep.c1_ok = true;
  const int buckets = 8;
  std::vector<double> bucket_t(buckets), bucket_osc(buckets, 0.0);
  double diam = std::sqrt(static_cast<double>(spec.N));
  for (int b = 0; b < buckets; ++b) bucket_t[static_cast<size_t>(b)] = diam * (b + 1) / buckets;
  double eta = spec.a.lower_bound();
  for (int it = 0; it < sample_size; ++it) {
    auto x1 = detail::sample_point(spec.N, rng);
    auto x2 = detail::sample_point(spec.N, rng);
    double d = 0.0;
    for (int i = 0; i < spec.N; ++i) {
      double dd = x1[static_cast<size_t>(i)] - x2[static_cast<size_t>(i)];
      d += dd * dd;
    }
    d = std::sqrt(d);
    double osc = std::fabs(spec.a.eval(x1) - spec.a.eval(x2));
    for (int b = 0; b < buckets; ++b)
      if (d <= bucket_t[static_cast<size_t>(b)])
        bucket_osc[static_cast<size_t>(b)] = std::max(bucket_osc[static_cast<size_t>(b)], osc);

    MatrixMN xi = detail::sample_matrix(spec.m, spec.N, rng);
    double f2 = spec.eval(x2, xi);
    if (!is_finite(f2)) continue;  // vacuous branch
    double f1 = spec.eval(x1, xi);
    double w = spec.omega(d);
    if (is_finite(w) && f1 > w * (1.0 + f2) + f2 + 1e-9 * (1.0 + f2)) rep.c1_ok = false;
  }
  for (int b = 0; b < buckets; ++b)
    rep.omega_envelope.emplace_back(bucket_t[static_cast<size_t>(b)],
                                    eta > 0 ? bucket_osc[static_cast<size_t>(b)] / eta : kInf);
  rep.omega_vanishes = spec.a.continuous();
  if (!rep.omega_vanishes) {
    rep.c1_ok = false;
    rep.notes.push_back("coefficient field is discontinuous: modulus does not vanish at 0");
  }

  // Polynomial bound above the determinant threshold.
  auto cc = spec.chat2_constants();
  rep.chat2 = cc;
  rep.chat2_declared_or_derived = cc.has_value();
  if (cc) {
    rep.chat2_ok = true;
    if (spec.m == spec.N) {
      for (int it = 0; it < sample_size; ++it) {
        auto x = detail::sample_point(spec.N, rng);
        MatrixMN xi = detail::sample_matrix(spec.m, spec.N, rng);
        if (std::fabs(det(xi)) < cc->first) continue;
        double f = spec.eval(x, xi);
        double bound = cc->second * (1.0 + std::pow(xi.frobenius(), spec.p));
        if (!(f <= bound * (1.0 + 1e-12))) rep.chat2_ok = false;
      }
    }
  } else if (spec.m == spec.N) {
    // Search a candidate threshold on the sample.
    for (double alpha_try : {0.5, 1.0, 2.0, 4.0}) {
      double beta_found = 0.0;
      bool any = false, all_finite = true;
      Rng r2 = rng.fork(91);
      for (int it = 0; it < sample_size; ++it) {
        auto x = detail::sample_point(spec.N, r2);
        MatrixMN xi = detail::sample_matrix(spec.m, spec.N, r2);
        if (std::fabs(det(xi)) < alpha_try) continue;
        any = true;
        double f = spec.eval(x, xi);
        if (!is_finite(f)) {
          all_finite = false;
          break;
        }
        beta_found = std::max(beta_found, f / (1.0 + std::pow(xi.frobenius(), spec.p)));
      }
      if (any && all_finite) {
        rep.chat2 = std::pair<double, double>{alpha_try, beta_found * 1.05};
        rep.chat2_ok = true;
        rep.notes.push_back("polynomial-bound constants found by sampling, not declared");
        break;
      }
    }
  }

  if (!rep.coercivity_ok)
    rep.notes.push_back("coercivity fails on the sample; declared constant C is not a lower bound");
  return rep;
}

}  // namespace quasihom
