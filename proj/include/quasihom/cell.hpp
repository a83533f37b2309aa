#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "quasihom/common.hpp"
#include "quasihom/descent.hpp"
#include "quasihom/envelope.hpp"
#include "quasihom/integrand.hpp"
#include "quasihom/matrix.hpp"
#include "quasihom/mesh.hpp"

namespace quasihom {

// ---------------------------------------------------------------------------
// Element models with oscillating x.
// ---------------------------------------------------------------------------

/// Multi-cell energy: the spatial argument varies per element and is read at
/// the element centroid. Meshes aligned with the coefficient's discontinuity
/// lattice make this quadrature exact for piecewise-constant coefficients.
struct CentroidEnergy {
  const IntegrandSpec* spec;
  const CellMesh* mesh;
  double operator()(int e, const MatrixMN& g) const {
    return spec->eval_unchecked(mesh->element_centroid(e), g);
  }
  double guided(int e, const MatrixMN& g, double cap) const {
    return spec->eval_guided(mesh->element_centroid(e), g, cap);
  }
};

// ---------------------------------------------------------------------------
// Cell-problem results.
// ---------------------------------------------------------------------------

struct CellProblemRecord {
  int k = 0;
  int mesh_n = 0;  // subdivisions per axis on the k-cell
  double value = kInf;
  int starts = 0;
  bool converged = false;
};

struct CellProblemResult {
  MatrixMN xi;
  std::vector<CellProblemRecord> records;
  double whom_estimate = kInf;  // min over recorded k
  int k_max = 0;
};

namespace detail {

struct MkRun {
  double value = kInf;
  bool converged = false;
  DisplacementField best_field;
};

// Coarse-to-fine mesh ladder: levels must respect the coefficient lattice so
// centroid quadrature stays exact on every level.
inline std::vector<int> mesh_ladder(int mesh_n, int lattice) {
  std::vector<int> ladder;
  for (int div : {4, 2, 1}) {
    int n = mesh_n / div;
    if (n < 2 || n * div != mesh_n) continue;
    if (n % lattice != 0) continue;
    if (!ladder.empty() && ladder.back() == n) continue;
    ladder.push_back(n);
  }
  if (ladder.empty() || ladder.back() != mesh_n) ladder.push_back(mesh_n);
  return ladder;
}

template <class ModelFactory>
MkRun minimize_multilevel(const IntegrandSpec& spec, const MatrixMN& xi, int k,
                          const std::vector<int>& ladder_per_period, int starts,
                          std::uint64_t seed, const ModelFactory& make_model,
                          const std::vector<const DisplacementField*>& inject,
                          const DescentOptions& opts) {
  MkRun run;
  bool have_prev = false;
  DisplacementField prev;
  for (size_t level = 0; level < ladder_per_period.size(); ++level) {
    int per_period = ladder_per_period[level];
    auto mesh = std::make_shared<CellMesh>(spec.N, k * per_period, static_cast<double>(k));
    auto model = make_model(*mesh);

    std::vector<const DisplacementField*> extra = inject;
    if (have_prev) extra.push_back(&prev);
    auto start_fields =
        detail::build_starts(mesh, spec.m, xi, starts, Rng(seed).fork(level), extra);

    double best = kInf;
    bool best_conv = false;
    size_t best_idx = 0;
    for (size_t s = 0; s < start_fields.size(); ++s) {
      DescentResult r = minimize_field(xi, model, start_fields[s], opts);
      if (r.energy < best) {
        best = r.energy;
        best_conv = r.converged;
        best_idx = s;
      }
    }
    run.value = best;
    run.converged = best_conv;
    run.best_field = std::move(start_fields[best_idx]);
    prev = run.best_field;
    have_prev = true;
  }
  return run;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations.
// ---------------------------------------------------------------------------

/// Normalized k-cell minimum: (1/k^N) min over zero-boundary fields on the
/// k-fold cell of the oscillating-x integral. The mesh has mesh_n_per_period
/// subdivisions per unit period and must align with the coefficient lattice.
inline double mk_value(const IntegrandSpec& spec, const MatrixMN& xi, int k,
                       int mesh_n_per_period, int starts, std::uint64_t seed,
                       const DisplacementField* inject = nullptr,
                       detail::MkRun* out_run = nullptr) {
  spec.validate_shape(xi);
  if (k < 1) throw InvalidInput("mk_value: k must be at least 1");
  if (mesh_n_per_period < 2) throw InvalidInput("mk_value: need at least 2 subdivisions per period");
  int lattice = spec.a.discontinuity_lattice();
  if (mesh_n_per_period % lattice != 0)
    throw InvalidInput("mk_value: mesh must align with the coefficient discontinuity lattice");

  auto ladder = detail::mesh_ladder(mesh_n_per_period, lattice);
  auto factory = [&](const CellMesh& mesh) { return CentroidEnergy{&spec, &mesh}; };
  std::vector<const DisplacementField*> inject_list;
  if (inject) inject_list.push_back(inject);
  DescentOptions opts;
  auto run = detail::minimize_multilevel(spec, xi, k, ladder, starts, seed, factory, inject_list, opts);
  double value = run.value == kInf ? kInf : run.value / std::pow(static_cast<double>(k), spec.N);
  if (out_run) {
    *out_run = std::move(run);
    out_run->value = value;
  }
  return value;
}

/// Truncated multi-cell infimum: runs the k-cell problem for k = 1..k_max,
/// reusing the periodic extension of the best single-cell field as a warm
/// start, and reports the running minimum. A non-flat k-profile flags an
/// under-resolved infimum.
inline CellProblemResult whom_estimate(const IntegrandSpec& spec, const MatrixMN& xi, int k_max,
                                       int mesh_n_per_period, int starts, std::uint64_t seed) {
  if (k_max < 1) throw InvalidInput("whom_estimate: k_max must be at least 1");
  CellProblemResult res;
  res.xi = xi;
  res.k_max = k_max;

  detail::MkRun k1_run;
  double m1 = mk_value(spec, xi, 1, mesh_n_per_period, starts, seed, nullptr, &k1_run);
  res.records.push_back({1, mesh_n_per_period, m1, starts, k1_run.converged});
  res.whom_estimate = m1;

  for (int k = 2; k <= k_max; ++k) {
    // Periodic extension of the unit-cell minimizer is admissible on the
    // k-cell (the zero boundary glues continuously across periods).
    detail::MkRun run;
    auto mesh_k = std::make_shared<CellMesh>(spec.N, k * mesh_n_per_period, static_cast<double>(k));
    DisplacementField extension(mesh_k, spec.m);
    if (k1_run.best_field.mesh) resample_field(k1_run.best_field, extension, /*periodic=*/true);
    double mk = mk_value(spec, xi, k, mesh_n_per_period, starts, seed + static_cast<std::uint64_t>(k),
                         &extension, &run);
    res.records.push_back({k, k * mesh_n_per_period, mk, starts, run.converged});
    res.whom_estimate = std::min(res.whom_estimate, mk);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Relaxed-density surrogate and the cell-formula identity.
// ---------------------------------------------------------------------------

/// Table of relaxed-density estimates on (element centroid) x (matrix grid)
/// pairs with multilinear interpolation in the matrix entries. Queries
/// outside the grid are reported, not extrapolated.
class ZwSurrogate {
 public:
  ZwSurrogate(const IntegrandSpec& spec, std::vector<std::vector<double>> x_points,
              std::vector<double> entry_lo, std::vector<double> entry_hi, int nodes_per_entry,
              int zf_mesh_n, int zf_starts, std::uint64_t seed)
      : spec_(&spec), x_points_(std::move(x_points)), lo_(std::move(entry_lo)),
        hi_(std::move(entry_hi)), nodes_(nodes_per_entry) {
    dims_ = static_cast<int>(lo_.size());
    if (dims_ != spec.m * spec.N) throw InvalidInput("ZwSurrogate: grid dimension mismatch");
    if (nodes_ < 2) throw InvalidInput("ZwSurrogate: need at least two nodes per entry");
    total_nodes_ = 1;
    for (int d = 0; d < dims_; ++d) total_nodes_ *= static_cast<size_t>(nodes_);
    if (total_nodes_ > 200000) throw InvalidInput("ZwSurrogate: grid too large");
    values_.assign(x_points_.size(), std::vector<double>(total_nodes_, kInf));
    for (size_t xi_idx = 0; xi_idx < x_points_.size(); ++xi_idx) {
      for (size_t node = 0; node < total_nodes_; ++node) {
        MatrixMN m = node_matrix(node);
        auto est = zf_estimate(*spec_, x_points_[xi_idx], m, zf_mesh_n, zf_starts,
                               seed ^ (0x9e37u + node * 1315423911u + xi_idx * 2654435761u));
        values_[xi_idx][node] = est.value;
      }
    }
  }

  MatrixMN node_matrix(size_t node) const {
    MatrixMN m(spec_->m, spec_->N);
    for (int d = 0; d < dims_; ++d) {
      size_t i = node % static_cast<size_t>(nodes_);
      node /= static_cast<size_t>(nodes_);
      m.data()[d] = lo_[static_cast<size_t>(d)] +
                    (hi_[static_cast<size_t>(d)] - lo_[static_cast<size_t>(d)]) *
                        static_cast<double>(i) / (nodes_ - 1);
    }
    return m;
  }

  bool in_range(const MatrixMN& g) const {
    for (int d = 0; d < dims_; ++d) {
      double v = g.data()[d];
      if (v < lo_[static_cast<size_t>(d)] || v > hi_[static_cast<size_t>(d)]) return false;
    }
    return true;
  }

  // Multilinear interpolation in the matrix entries at a tabulated x index.
  double eval(size_t x_index, const MatrixMN& g) const {
    if (!in_range(g)) {
      if (out_of_range_.size() < 64)
        out_of_range_.push_back(std::vector<double>(g.data(), g.data() + g.size()));
      ++miss_count_;
      return kInf;
    }
    int cell[16];
    double t[16];
    for (int d = 0; d < dims_; ++d) {
      double step = (hi_[static_cast<size_t>(d)] - lo_[static_cast<size_t>(d)]) / (nodes_ - 1);
      double s = (g.data()[d] - lo_[static_cast<size_t>(d)]) / step;
      int c = static_cast<int>(std::floor(s));
      c = std::max(0, std::min(c, nodes_ - 2));
      cell[d] = c;
      t[d] = std::min(1.0, std::max(0.0, s - c));
    }
    const auto& tab = values_[x_index];
    double acc = 0.0;
    int corners = 1 << dims_;
    for (int mask = 0; mask < corners; ++mask) {
      double w = 1.0;
      size_t node = 0;
      for (int d = dims_ - 1; d >= 0; --d) {
        int bit = (mask >> d) & 1;
        w *= bit ? t[d] : (1.0 - t[d]);
        node = node * static_cast<size_t>(nodes_) + static_cast<size_t>(cell[d] + bit);
      }
      if (w == 0.0) continue;
      double v = tab[node];
      if (v == kInf) return kInf;
      acc += w * v;
    }
    return acc;
  }

  const std::vector<std::vector<double>>& x_points() const { return x_points_; }
  const std::vector<std::vector<double>>& out_of_range_queries() const { return out_of_range_; }
  size_t miss_count() const { return miss_count_; }

 private:
  const IntegrandSpec* spec_;
  std::vector<std::vector<double>> x_points_;
  std::vector<double> lo_, hi_;
  int nodes_ = 0, dims_ = 0;
  size_t total_nodes_ = 0;
  std::vector<std::vector<double>> values_;
  mutable std::vector<std::vector<double>> out_of_range_;
  mutable size_t miss_count_ = 0;
};

struct SurrogateEnergy {
  const ZwSurrogate* table;
  const std::vector<size_t>* elem_x_index;
  double operator()(int e, const MatrixMN& g) const {
    return table->eval((*elem_x_index)[static_cast<size_t>(e)], g);
  }
};

struct CellIdentityResult {
  double val_w = kInf;
  double val_zw = kInf;
  std::vector<std::vector<double>> out_of_range;
};

struct CellIdentityOptions {
  double grid_halfwidth = 3.0;  // matrix-entry grid spans xi entries +/- this
  int nodes_per_entry = 61;
  int zf_mesh_n = 8;
  int zf_starts = 4;
};

/// Computes the k-cell minimum twice: with the raw density and with its
/// tabulated relaxed surrogate. Matching values are the numerical shadow of
/// the cell-formula identity that lets relaxation commute with the
/// homogenization formula.
inline CellIdentityResult cell_identity_check(const IntegrandSpec& spec, const MatrixMN& xi, int k,
                                              int mesh_n_per_period, int starts, std::uint64_t seed,
                                              const CellIdentityOptions& opt = {}) {
  spec.validate_shape(xi);
  int lattice = spec.a.discontinuity_lattice();
  if (mesh_n_per_period % lattice != 0)
    throw InvalidInput("cell_identity_check: mesh must align with the coefficient lattice");

  CellIdentityResult out;
  out.val_w = mk_value(spec, xi, k, mesh_n_per_period, starts, seed);

  // Tabulate the surrogate at the element centroids of the finest mesh,
  // dropping duplicates (periodic coefficients repeat across cells).
  auto mesh = std::make_shared<CellMesh>(spec.N, k * mesh_n_per_period, static_cast<double>(k));
  std::map<std::vector<std::int64_t>, size_t> seen;
  std::vector<std::vector<double>> x_points;
  std::vector<size_t> elem_x(static_cast<size_t>(mesh->element_count()));
  for (int e = 0; e < mesh->element_count(); ++e) {
    const auto& cen = mesh->element_centroid(e);
    std::vector<std::int64_t> key(cen.size());
    std::vector<double> reduced(cen.size());
    for (size_t d = 0; d < cen.size(); ++d) {
      reduced[d] = frac01(cen[d]);
      key[d] = static_cast<std::int64_t>(std::llround(reduced[d] * 1e12));
    }
    auto it = seen.find(key);
    if (it == seen.end()) {
      it = seen.emplace(key, x_points.size()).first;
      x_points.push_back(reduced);
    }
    elem_x[static_cast<size_t>(e)] = it->second;
  }

  std::vector<double> lo(static_cast<size_t>(spec.m * spec.N)),
      hi(static_cast<size_t>(spec.m * spec.N));
  for (int d = 0; d < spec.m * spec.N; ++d) {
    lo[static_cast<size_t>(d)] = xi.data()[d] - opt.grid_halfwidth;
    hi[static_cast<size_t>(d)] = xi.data()[d] + opt.grid_halfwidth;
  }
  ZwSurrogate table(spec, x_points, lo, hi, opt.nodes_per_entry, opt.zf_mesh_n, opt.zf_starts,
                    seed ^ 0xabcdefu);
  if (!table.in_range(xi))
    throw CoverageError("cell_identity_check: xi outside the surrogate grid",
                        {std::vector<double>(xi.data(), xi.data() + xi.size())});

  SurrogateEnergy model{&table, &elem_x};
  auto start_fields =
      detail::build_starts(mesh, spec.m, xi, starts, Rng(seed).fork(77), {});
  double best = kInf;
  DescentOptions opts;
  for (auto& f : start_fields) {
    DescentResult r = minimize_field(xi, model, f, opts);
    best = std::min(best, r.energy);
  }
  out.val_zw = best == kInf ? kInf : best / std::pow(static_cast<double>(k), spec.N);
  out.out_of_range = table.out_of_range_queries();
  return out;
}

// ---------------------------------------------------------------------------
// Tabulation container.
// ---------------------------------------------------------------------------

struct HomDensityTable {
  std::string spec_hash;
  std::vector<std::pair<MatrixMN, CellProblemResult>> entries;

  void add(const MatrixMN& xi, CellProblemResult res) {
    for (const auto& e : entries)
      if (e.first == xi) throw InvalidInput("HomDensityTable: duplicate matrix entry");
    entries.emplace_back(xi, std::move(res));
  }
};

}  // namespace quasihom
