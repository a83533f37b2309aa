#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "quasihom/common.hpp"
#include "quasihom/descent.hpp"
#include "quasihom/integrand.hpp"
#include "quasihom/laminate.hpp"
#include "quasihom/matrix.hpp"
#include "quasihom/mesh.hpp"
#include "quasihom/rng.hpp"

namespace quasihom {

// ---------------------------------------------------------------------------
// Element energy models.
// ---------------------------------------------------------------------------

/// Unit-cell energy with x held fixed: the relaxation integral freezes the
/// spatial argument, so quadrature in x is exact and only the gradient varies.
struct FrozenXEnergy {
  const IntegrandSpec* spec;
  const std::vector<double>* x;
  double operator()(int, const MatrixMN& g) const { return spec->eval_unchecked(*x, g); }
  double guided(int, const MatrixMN& g, double cap) const { return spec->eval_guided(*x, g, cap); }
};

struct SliceEnergy {
  const std::function<double(const MatrixMN&)>* f;
  double operator()(int, const MatrixMN& g) const { return (*f)(g); }
};

// ---------------------------------------------------------------------------
// Estimates.
// ---------------------------------------------------------------------------

struct EnvelopeEstimate {
  std::vector<double> x;
  MatrixMN xi;
  double value = kInf;
  int mesh_n = 0;
  int starts_used = 0;
  DisplacementField best_field;
  std::vector<double> per_start;                  // final energy per start
  std::vector<std::pair<int, double>> chain;      // (mesh_n, value) per refinement level
  bool converged = false;
  std::string diagnostic;
};

namespace detail {

// Sawtooth displacement along the most determinant-sensitive axis: the
// canonical microstructure seed. Slopes are +/- amplitude with two teeth.
inline DisplacementField sawtooth_start(std::shared_ptr<const CellMesh> mesh, int m,
                                        const MatrixMN& xi, double amplitude) {
  const CellMesh& msh = *mesh;
  int axis = 0;
  std::vector<double> dir(static_cast<size_t>(m), 0.0);
  dir[0] = 1.0;
  if (xi.square()) {
    MatrixMN cof = cofactor(xi);
    double best = 0.0;
    for (int j = 0; j < xi.cols(); ++j) {
      double nrm = 0.0;
      for (int i = 0; i < xi.rows(); ++i) nrm += cof(i, j) * cof(i, j);
      if (nrm > best) {
        best = nrm;
        axis = j;
        for (int i = 0; i < xi.rows(); ++i) dir[static_cast<size_t>(i)] = cof(i, j);
      }
    }
    double nrm = 0.0;
    for (double v : dir) nrm += v * v;
    if (nrm > 1e-24) {
      nrm = std::sqrt(nrm);
      for (double& v : dir) v /= nrm;
    } else {
      dir.assign(static_cast<size_t>(m), 0.0);
      dir[0] = 1.0;
      axis = 0;
    }
  }
  DisplacementField f(mesh, m);
  const int teeth = 2;
  const double w = msh.length() / teeth;
  for (int v = 0; v < msh.vertex_count(); ++v) {
    double t = msh.vertex_coords(v)[static_cast<size_t>(axis)];
    double tp = t - w * std::floor(t / w);
    double psi = amplitude * ((tp < 0.5 * w) ? tp : (w - tp));
    for (int c = 0; c < m; ++c)
      f.values[static_cast<size_t>(v) * m + c] = psi * dir[static_cast<size_t>(c)];
  }
  f.zero_boundary();
  return f;
}

inline DisplacementField random_start(std::shared_ptr<const CellMesh> mesh, int m, Rng rng) {
  DisplacementField f(mesh, m);
  double amp = mesh->spacing();
  for (int v = 0; v < mesh->vertex_count(); ++v) {
    if (mesh->is_boundary_vertex(v)) continue;
    for (int c = 0; c < m; ++c) f.values[static_cast<size_t>(v) * m + c] = amp * rng.normal();
  }
  return f;
}

/// The ordered start list: the zero field, sawtooths at three amplitudes,
/// then seeded Gaussian fields; a supplied structured field (laminate or
/// prolonged coarse minimizer) is always appended.
inline std::vector<DisplacementField> build_starts(std::shared_ptr<const CellMesh> mesh, int m,
                                                   const MatrixMN& xi, int starts, Rng rng,
                                                   const std::vector<const DisplacementField*>& extra) {
  std::vector<DisplacementField> out;
  out.emplace_back(mesh, m);  // zero field
  const double amps[3] = {1.0, 0.5, 2.0};
  for (int k = 0; k < 3 && static_cast<int>(out.size()) < starts; ++k)
    out.push_back(sawtooth_start(mesh, m, xi, amps[k]));
  int ri = 0;
  while (static_cast<int>(out.size()) < starts) out.push_back(random_start(mesh, m, rng.fork(static_cast<std::uint64_t>(ri++))));
  for (const DisplacementField* e : extra) {
    if (!e) continue;
    if (e->mesh.get() == mesh.get()) {
      out.push_back(*e);
    } else {
      DisplacementField r(mesh, m);
      resample_field(*e, r);
      out.push_back(std::move(r));
    }
  }
  return out;
}

/// Structured seeds for singular integrands. Besides the polynomial-bound
/// lamination (determinant pushed to +/-alpha), points inside the infinite
/// band get laminates hugging the band edges at several margins: the optimal
/// microstructure concentrates near the cheap side of the band, which the
/// wide lamination misses.
inline std::vector<LaminateField> singular_starts(const IntegrandSpec& spec,
                                                  const std::vector<double>& x, const MatrixMN& xi,
                                                  int mesh_n) {
  std::vector<LaminateField> out;
  if (spec.m != spec.N || !spec.singular()) return out;
  auto cc = spec.chat2_constants();
  if (!cc) return out;
  double d = det(xi);
  if (std::fabs(d) >= cc->first) return out;

  auto try_targets = [&](double t1, double t2) {
    if (!(t1 < d && d < t2)) return;
    try {
      auto tree = det_target_laminate(xi, t1, t2);
      out.push_back(laminate_field_build(xi, tree, mesh_n, /*layer_budget=*/0.5));
    } catch (const std::runtime_error&) {
    }
  };
  try_targets(-cc->first, cc->first);

  auto band = spec.h.infinite_band();
  if (band && d >= band->first && d <= band->second) {
    double w = std::max(band->second - band->first, 1.0);
    for (double margin : {0.25, 0.5, 1.0})
      try_targets(band->first - margin * w, band->second + margin * w);

    // Optimal two-point laminate: grid-search the pair of determinant
    // targets minimizing the ideal mixture energy
    //   lambda f(leaf-) + (1-lambda) f(leaf+),
    // then materialize that lamination. This homes in on mixtures hugging
    // the cheap side of the band, which fixed targets miss.
    MatrixMN cof = cofactor(xi);
    double c1 = 0.0;
    std::vector<double> dir_a(static_cast<size_t>(spec.m), 0.0), dir_b(static_cast<size_t>(spec.N), 0.0);
    for (int j = 0; j < spec.N; ++j) {
      double nrm = 0.0;
      for (int i = 0; i < spec.m; ++i) nrm += cof(i, j) * cof(i, j);
      nrm = std::sqrt(nrm);
      if (nrm > std::fabs(c1)) {
        c1 = nrm;
        std::fill(dir_a.begin(), dir_a.end(), 0.0);
        std::fill(dir_b.begin(), dir_b.end(), 0.0);
        for (int i = 0; i < spec.m; ++i) dir_a[static_cast<size_t>(i)] = cof(i, j) / nrm;
        dir_b[static_cast<size_t>(j)] = 1.0;
      }
    }
    if (c1 > 1e-10) {
      double best = kInf, best_t1 = 0.0, best_t2 = 0.0;
      MatrixMN leaf(spec.m, spec.N);
      for (int i1 = 0; i1 < 14; ++i1)
        for (int i2 = 0; i2 < 14; ++i2) {
          double t1 = band->first - w * (0.02 + 2.0 * i1 / 13.0);
          double t2 = band->second + w * (0.02 + 2.0 * i2 / 13.0);
          double s1 = (t1 - d) / c1, s2 = (t2 - d) / c1;
          double s_lo = std::min(s1, s2), s_hi = std::max(s1, s2);
          double lambda = s_hi / (s_hi - s_lo);
          leaf = xi;
          leaf.add_scaled_outer(s_lo, dir_a, dir_b);
          double e_lo = spec.eval_unchecked(x, leaf);
          leaf = xi;
          leaf.add_scaled_outer(s_hi, dir_a, dir_b);
          double e_hi = spec.eval_unchecked(x, leaf);
          if (e_lo == kInf || e_hi == kInf) continue;
          double mix = lambda * e_lo + (1.0 - lambda) * e_hi;
          if (mix < best) {
            best = mix;
            best_t1 = t1;
            best_t2 = t2;
          }
        }
      if (best < kInf) try_targets(best_t1, best_t2);
    }
  }
  return out;
}

template <class Model>
void run_starts(const MatrixMN& xi, const Model& model, std::vector<DisplacementField>& starts,
                const DescentOptions& opts, EnvelopeEstimate& est) {
  est.per_start.clear();
  est.value = kInf;
  for (size_t s = 0; s < starts.size(); ++s) {
    DescentResult r = minimize_field(xi, model, starts[s], opts);
    est.per_start.push_back(r.energy);
    if (r.energy < est.value) {
      est.value = r.energy;
      est.best_field = starts[s];
      est.converged = r.converged;
    }
  }
  est.starts_used = static_cast<int>(starts.size());
  if (est.value == kInf) est.diagnostic = "all starts ended with infinite energy";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations.
// ---------------------------------------------------------------------------

/// Exact unit-cell integral of f(x, xi + grad phi) for a piecewise-affine
/// field: the integrand is constant per element, so the sum is the integral.
inline double cell_energy(const IntegrandSpec& spec, const std::vector<double>& x,
                          const MatrixMN& xi, const DisplacementField& field) {
  if (field.mesh->dim() != spec.N || field.m != spec.m)
    throw InvalidInput("cell_energy: field dimensions do not match the integrand");
  spec.validate_shape(xi);
  const CellMesh& mesh = *field.mesh;
  MatrixMN g(spec.m, spec.N);
  double total = 0.0;
  for (int e = 0; e < mesh.element_count(); ++e) {
    mesh.gradient_on(e, field.values, spec.m, xi, g);
    double v = spec.eval_unchecked(x, g);
    if (v == kInf) return kInf;
    total += v;
  }
  return total * mesh.element_volume() / mesh.volume();
}

/// Upper-bound estimate of the relaxed density at (x, xi) by multistart
/// descent over zero-boundary piecewise-affine fields on the unit cell.
/// Inside the singular determinant slab the lamination certificate supplies
/// a finite-energy structured start.
inline EnvelopeEstimate zf_estimate(const IntegrandSpec& spec, const std::vector<double>& x,
                                    const MatrixMN& xi, int mesh_n, int starts, std::uint64_t seed,
                                    const DescentOptions& opts_in = {}) {
  spec.validate_shape(xi);
  if (mesh_n < 2) throw InvalidInput("zf_estimate: mesh_n must be at least 2");
  if (starts < 1) throw InvalidInput("zf_estimate: need at least one start");

  auto mesh = std::make_shared<CellMesh>(spec.N, mesh_n, 1.0);
  EnvelopeEstimate est;
  est.x = x;
  est.xi = xi;
  est.mesh_n = mesh_n;

  auto lams = detail::singular_starts(spec, x, xi, mesh_n);
  std::vector<const DisplacementField*> extra;
  for (auto& l : lams) extra.push_back(&l.field);
  if (spec.singular() && spec.m == spec.N && extra.empty() && std::fabs(det(xi)) < 1e12) {
    auto cc = spec.chat2_constants();
    if (cc && std::fabs(det(xi)) < cc->first)
      est.diagnostic = "laminate starts unavailable (construction failure or coarse mesh)";
  }

  auto start_fields = detail::build_starts(mesh, spec.m, xi, starts, Rng(seed), extra);
  FrozenXEnergy model{&spec, &x};
  detail::run_starts(xi, model, start_fields, opts_in, est);
  est.chain.emplace_back(mesh_n, est.value);
  return est;
}

/// Monotone refinement: each level injects the previous minimizer (prolonged
/// exactly onto the nested finer mesh) as an extra start, so the reported
/// chain never increases.
inline EnvelopeEstimate zf_refine(const IntegrandSpec& spec, const std::vector<double>& x,
                                  const MatrixMN& xi, const std::vector<int>& mesh_chain,
                                  int starts, std::uint64_t seed,
                                  const DescentOptions& opts_in = {}) {
  if (mesh_chain.empty()) throw InvalidInput("zf_refine: empty mesh chain");
  for (size_t i = 1; i < mesh_chain.size(); ++i) {
    if (mesh_chain[i] <= mesh_chain[i - 1] || mesh_chain[i] % mesh_chain[i - 1] != 0)
      throw InvalidInput("zf_refine: mesh chain must be strictly increasing and nested");
  }
  EnvelopeEstimate best;
  std::vector<std::pair<int, double>> chain;
  for (size_t level = 0; level < mesh_chain.size(); ++level) {
    int n = mesh_chain[level];
    auto mesh = std::make_shared<CellMesh>(spec.N, n, 1.0);
    EnvelopeEstimate est;
    est.x = x;
    est.xi = xi;
    est.mesh_n = n;

    auto lams = detail::singular_starts(spec, x, xi, n);
    std::vector<const DisplacementField*> extra;
    for (auto& l : lams) extra.push_back(&l.field);
    if (level > 0) extra.push_back(&best.best_field);

    auto start_fields = detail::build_starts(mesh, spec.m, xi, starts, Rng(seed).fork(level), extra);
    FrozenXEnergy model{&spec, &x};
    detail::run_starts(xi, model, start_fields, opts_in, est);

    // The prolonged minimizer evaluates to the previous value exactly, so
    // the chain is nonincreasing by construction; keep the better of the two.
    if (level > 0 && best.value < est.value) {
      est.value = best.value;
      est.best_field = best.best_field;
      est.converged = best.converged;
    }
    chain.emplace_back(n, est.value);
    best = std::move(est);
  }
  best.chain = std::move(chain);
  return best;
}

struct QuasiconvexityProbe {
  bool violated = false;
  std::optional<DisplacementField> witness;
  double gap = 0.0;  // slice(xi) - best cell energy found
};

/// Searches for a zero-boundary field whose mean energy undercuts the value
/// at xi; a successful witness certifies a quasiconvexity violation of the
/// slice. Finding none is evidence (not proof) of quasiconvexity at xi.
inline QuasiconvexityProbe quasiconvexity_probe(const std::function<double(const MatrixMN&)>& slice,
                                                const MatrixMN& xi, int probes, int mesh_n,
                                                std::uint64_t seed, double gap_tolerance = 1e-6) {
  if (probes < 1) throw InvalidInput("quasiconvexity_probe: probes must be positive");
  auto mesh = std::make_shared<CellMesh>(xi.cols(), mesh_n, 1.0);
  auto start_fields = detail::build_starts(mesh, xi.rows(), xi, 4 + probes, Rng(seed), {});
  SliceEnergy model{&slice};
  DescentOptions opts;
  opts.max_sweeps = 200;

  double f0 = slice(xi);
  QuasiconvexityProbe out;
  double best = kInf;
  for (auto& f : start_fields) {
    DescentResult r = minimize_field(xi, model, f, opts);
    if (r.energy < best) {
      best = r.energy;
      out.witness = f;
    }
  }
  out.gap = (f0 == kInf) ? (best == kInf ? 0.0 : kInf) : f0 - best;
  out.violated = out.gap > gap_tolerance;
  if (!out.violated) out.witness.reset();
  return out;
}

/// Normalized minima over the unit cell and over a scaled box with the same
/// element density; agreement witnesses domain independence of the envelope.
inline std::pair<double, double> domain_invariance_check(const IntegrandSpec& spec,
                                                         const std::vector<double>& x,
                                                         const MatrixMN& xi, double domain_scale,
                                                         int mesh_n, int starts,
                                                         std::uint64_t seed) {
  if (!(domain_scale > 0.0)) throw InvalidInput("domain_invariance_check: scale must be positive");
  auto est_y = zf_estimate(spec, x, xi, mesh_n, starts, seed);

  int n_d = std::max(2, static_cast<int>(std::lround(domain_scale * mesh_n)));
  auto mesh = std::make_shared<CellMesh>(spec.N, n_d, domain_scale);
  auto start_fields = detail::build_starts(mesh, spec.m, xi, starts, Rng(seed).fork(1), {});
  FrozenXEnergy model{&spec, &x};
  EnvelopeEstimate est_d;
  detail::run_starts(xi, model, start_fields, {}, est_d);
  double val_d = est_d.value / mesh->volume();
  return {est_y.value, val_d};
}

}  // namespace quasihom
