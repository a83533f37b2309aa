#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "quasihom/common.hpp"
#include "quasihom/integrand.hpp"
#include "quasihom/matrix.hpp"
#include "quasihom/mesh.hpp"
#include "quasihom/rng.hpp"

namespace quasihom {

// ---------------------------------------------------------------------------
// Rank-one lamination trees.
// ---------------------------------------------------------------------------

/// Finite rank-one lamination. Each split mixes the two children with zero
/// average (lambda*s_minus + (1-lambda)*s_plus = 0), so the fraction-weighted
/// barycenter of the leaves telescopes back to the root matrix.
struct LaminateTree {
  struct Node {
    MatrixMN matrix;  // gradient carried by this node (root: the macroscopic xi)
    bool is_leaf = true;
    std::vector<double> dir_a;  // split direction, displacement component
    std::vector<double> dir_b;  // split direction, spatial component (unit)
    int axis = -1;              // axis index when dir_b is a coordinate vector
    double s_minus = 0.0, s_plus = 0.0;  // rank-one steps, s_minus < 0 < s_plus
    double lambda = 0.0;                 // volume fraction of the s_minus child
    int child_minus = -1, child_plus = -1;
  };

  std::vector<Node> nodes;  // nodes[0] is the root
  int depth = 0;

  const Node& root() const { return nodes.front(); }

  /// Leaves with their volume fractions (fractions sum to 1).
  std::vector<std::pair<double, int>> leaves() const {
    std::vector<std::pair<double, int>> out;
    collect_leaves(0, 1.0, out);
    return out;
  }

  /// Fraction-weighted average of the leaf matrices.
  MatrixMN barycenter() const {
    auto ls = leaves();
    MatrixMN avg(root().matrix.rows(), root().matrix.cols());
    for (const auto& [frac, idx] : ls) {
      MatrixMN term = nodes[static_cast<size_t>(idx)].matrix;
      term *= frac;
      avg += term;
    }
    return avg;
  }

 private:
  void collect_leaves(int idx, double frac, std::vector<std::pair<double, int>>& out) const {
    const Node& n = nodes[static_cast<size_t>(idx)];
    if (n.is_leaf) {
      out.emplace_back(frac, idx);
      return;
    }
    collect_leaves(n.child_minus, frac * n.lambda, out);
    collect_leaves(n.child_plus, frac * (1.0 - n.lambda), out);
  }
};

namespace detail {

struct DirectionCandidate {
  std::vector<double> a, b;
  int axis;  // >= 0 when b is a coordinate vector
};

inline std::vector<DirectionCandidate> direction_candidates(const MatrixMN& cof,
                                                            bool axis_aligned_only) {
  int n = cof.rows();
  std::vector<DirectionCandidate> out;
  // Canonical pairs first; ties in |c1| resolve to the earliest candidate.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      DirectionCandidate c;
      c.a.assign(static_cast<size_t>(n), 0.0);
      c.b.assign(static_cast<size_t>(n), 0.0);
      c.a[static_cast<size_t>(i)] = 1.0;
      c.b[static_cast<size_t>(j)] = 1.0;
      c.axis = j;
      out.push_back(std::move(c));
    }
  // Per-axis optimum: with b = e_j fixed, <cof, a b^T> is maximized by the
  // normalized j-th cofactor column.
  for (int j = 0; j < n; ++j) {
    double nrm = 0.0;
    for (int i = 0; i < n; ++i) nrm += cof(i, j) * cof(i, j);
    nrm = std::sqrt(nrm);
    if (nrm < 1e-14) continue;
    DirectionCandidate c;
    c.a.resize(static_cast<size_t>(n));
    c.b.assign(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) c.a[static_cast<size_t>(i)] = cof(i, j) / nrm;
    c.b[static_cast<size_t>(j)] = 1.0;
    c.axis = j;
    out.push_back(std::move(c));
  }
  if (!axis_aligned_only) {
    // Fixed quasi-uniform sample of unit pairs; deterministic by construction.
    Rng rng(0x9d2c5680u);
    for (int k = 0; k < 64; ++k) {
      DirectionCandidate c;
      c.a.resize(static_cast<size_t>(n));
      c.b.resize(static_cast<size_t>(n));
      double na = 0.0, nb = 0.0;
      for (int i = 0; i < n; ++i) {
        c.a[static_cast<size_t>(i)] = rng.normal();
        c.b[static_cast<size_t>(i)] = rng.normal();
        na += c.a[static_cast<size_t>(i)] * c.a[static_cast<size_t>(i)];
        nb += c.b[static_cast<size_t>(i)] * c.b[static_cast<size_t>(i)];
      }
      na = std::sqrt(na);
      nb = std::sqrt(nb);
      if (na < 1e-12 || nb < 1e-12) continue;
      for (int i = 0; i < n; ++i) {
        c.a[static_cast<size_t>(i)] /= na;
        c.b[static_cast<size_t>(i)] /= nb;
      }
      c.axis = -1;
      out.push_back(std::move(c));
    }
  }
  return out;
}

inline double pair_slope(const MatrixMN& cof, const DirectionCandidate& c) {
  double s = 0.0;
  for (int i = 0; i < cof.rows(); ++i)
    for (int j = 0; j < cof.cols(); ++j)
      s += cof(i, j) * c.a[static_cast<size_t>(i)] * c.b[static_cast<size_t>(j)];
  return s;
}

// Largest |c1| available at a matrix; used to score presplit directions.
inline double best_slope_magnitude(const MatrixMN& m, bool axis_aligned_only) {
  MatrixMN cof = cofactor(m);
  double best = 0.0;
  for (const auto& c : direction_candidates(cof, axis_aligned_only))
    best = std::max(best, std::fabs(pair_slope(cof, c)));
  return best;
}

}  // namespace detail

/// Builds a lamination of xi whose leaves have determinant t1 or t2, by
/// recursive simple lamination: along the best rank-one direction the
/// determinant is affine, so each split solves two linear root equations.
/// Matrices with vanishing cofactor (no usable direction) get a preliminary
/// determinant-preserving split that regenerates cofactor mass in the
/// children. Depth-capped; failure to finish is reported as an error, never
/// silently absorbed.
inline LaminateTree det_target_laminate(const MatrixMN& xi, double t1, double t2, int max_depth = 3,
                                        bool axis_aligned_only = true) {
  if (!xi.square()) throw InvalidInput("det_target_laminate: matrix must be square");
  if (!(t1 < t2)) throw InvalidInput("det_target_laminate: need t1 < t2");
  double d0 = det(xi);
  if (!(t1 < d0 && d0 < t2))
    throw InvalidInput("det_target_laminate: det(xi) must lie strictly inside (t1, t2)");

  LaminateTree tree;
  struct Builder {
    LaminateTree& tree;
    double t1, t2;
    int max_depth;
    bool axis_aligned;

    int build(const MatrixMN& cur, int level) {
      double d = det(cur);
      double scale = 1.0 + std::fabs(t1) + std::fabs(t2);
      int idx = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes[static_cast<size_t>(idx)].matrix = cur;
      if (std::fabs(d - t1) <= 1e-12 * scale || std::fabs(d - t2) <= 1e-12 * scale) {
        return idx;  // already on target
      }
      if (level >= max_depth)
        throw ConstructionFailure("det_target_laminate: depth cap reached before hitting targets");

      MatrixMN cof = cofactor(cur);
      auto candidates = detail::direction_candidates(cof, axis_aligned);
      double best = 0.0;
      int best_i = -1;
      for (size_t i = 0; i < candidates.size(); ++i) {
        double c1 = std::fabs(detail::pair_slope(cof, candidates[i]));
        if (c1 > best + 1e-15) {
          best = c1;
          best_i = static_cast<int>(i);
        }
      }

      double cof_scale = 1.0 + cof.frobenius();
      if (best > 1e-10 * cof_scale) {
        const auto& c = candidates[static_cast<size_t>(best_i)];
        double c1 = detail::pair_slope(cof, c);
        double sa = (t1 - d) / c1;
        double sb = (t2 - d) / c1;
        double s_minus = std::min(sa, sb);
        double s_plus = std::max(sa, sb);
        double lambda = s_plus / (s_plus - s_minus);
        MatrixMN lo = cur, hi = cur;
        lo.add_scaled_outer(s_minus, c.a, c.b);
        hi.add_scaled_outer(s_plus, c.a, c.b);
        int cm = build(lo, level + 1);
        int cp = build(hi, level + 1);
        auto& node = tree.nodes[static_cast<size_t>(idx)];
        node.is_leaf = false;
        node.dir_a = c.a;
        node.dir_b = c.b;
        node.axis = c.axis;
        node.s_minus = s_minus;
        node.s_plus = s_plus;
        node.lambda = lambda;
        node.child_minus = cm;
        node.child_plus = cp;
        return idx;
      }

      // Degenerate cofactor: split symmetrically so the children regain a
      // usable rank-one direction, leaving the determinant unchanged.
      double sigma = std::max(1.0, cur.frobenius());
      double best_score = 0.0;
      int pre_i = -1;
      double pre_sigma = sigma;
      for (double sg : {sigma, 0.5 * sigma, 2.0 * sigma}) {
        for (size_t i = 0; i < candidates.size(); ++i) {
          MatrixMN lo = cur, hi = cur;
          lo.add_scaled_outer(-sg, candidates[i].a, candidates[i].b);
          hi.add_scaled_outer(+sg, candidates[i].a, candidates[i].b);
          double dl = det(lo), dh = det(hi);
          if (!(t1 < dl && dl < t2 && t1 < dh && dh < t2)) continue;
          double score = std::min(detail::best_slope_magnitude(lo, axis_aligned),
                                  detail::best_slope_magnitude(hi, axis_aligned));
          if (score > best_score * (1.0 + 1e-12)) {
            best_score = score;
            pre_i = static_cast<int>(i);
            pre_sigma = sg;
          }
        }
        if (pre_i >= 0) break;  // prefer the natural scale when it works
      }
      if (pre_i < 0 || best_score <= 1e-10)
        throw ConstructionFailure("det_target_laminate: no admissible direction at a degenerate node");

      const auto& c = candidates[static_cast<size_t>(pre_i)];
      MatrixMN lo = cur, hi = cur;
      lo.add_scaled_outer(-pre_sigma, c.a, c.b);
      hi.add_scaled_outer(+pre_sigma, c.a, c.b);
      int cm = build(lo, level + 1);
      int cp = build(hi, level + 1);
      auto& node = tree.nodes[static_cast<size_t>(idx)];
      node.is_leaf = false;
      node.dir_a = c.a;
      node.dir_b = c.b;
      node.axis = c.axis;
      node.s_minus = -pre_sigma;
      node.s_plus = pre_sigma;
      node.lambda = 0.5;
      node.child_minus = cm;
      node.child_plus = cp;
      return idx;
    }

    int depth_of(int idx) const {
      const auto& n = tree.nodes[static_cast<size_t>(idx)];
      if (n.is_leaf) return 0;
      return 1 + std::max(depth_of(n.child_minus), depth_of(n.child_plus));
    }
  };

  Builder b{tree, t1, t2, max_depth, axis_aligned_only};
  b.build(xi, 0);
  tree.depth = b.depth_of(0);
  return tree;
}

// ---------------------------------------------------------------------------
// Piecewise-affine fields realizing a lamination on a mesh.
// ---------------------------------------------------------------------------

/// A zero-boundary field whose gradient reproduces the leaf matrices of a
/// lamination away from a reported layer (boundary cutoff bands plus the
/// cells crossed by lamination interfaces).
struct LaminateField {
  DisplacementField field;
  double layer_volume = 0.0;                      // fraction not carrying a pure leaf gradient
  std::vector<int> cell_leaf;                     // element -> leaf list index, -1 in the layer
  std::vector<std::pair<double, int>> leaf_list;  // (fraction, tree node)
  std::vector<double> leaf_dets;
};

/// Materializes the tree on the unit cell: every split contributes a sawtooth
/// profile along its axis (scaled copies packed into the parent's slabs), the
/// boundary trace is zeroed over a one-cell band, and each cell is labeled
/// with the leaf whose gradient it carries exactly, or assigned to the layer.
inline LaminateField laminate_field_build(const MatrixMN& xi, const LaminateTree& tree,
                                          std::shared_ptr<const CellMesh> mesh_ptr,
                                          double layer_budget, int teeth_per_split = 1) {
  const CellMesh& mesh = *mesh_ptr;
  const int dim = mesh.dim();
  if (xi.cols() != dim) throw InvalidInput("laminate_field_build: mesh dimension mismatch");
  if (mesh.subdivisions() < 2 * (1 << tree.depth))
    throw InfeasibleMesh("laminate_field_build: mesh too coarse for the tree depth");
  for (const auto& n : tree.nodes)
    if (!n.is_leaf && n.axis < 0)
      throw InvalidInput("laminate_field_build: lamination directions must be axis-aligned");

  const int m = xi.rows();
  LaminateField out;
  out.field = DisplacementField(mesh_ptr, m);

  // Recursive scaled-copy packing: each region owns a vertex set; sawtooth
  // values accumulate level by level. Vertices exactly on an interface belong
  // to the upper side.
  struct Frame {
    int node;
    std::vector<int> verts;
    std::vector<double> lo, hi;
  };
  std::vector<Frame> stack;
  {
    Frame root;
    root.node = 0;
    root.verts.resize(static_cast<size_t>(mesh.vertex_count()));
    for (int v = 0; v < mesh.vertex_count(); ++v) root.verts[static_cast<size_t>(v)] = v;
    root.lo.assign(static_cast<size_t>(dim), 0.0);
    root.hi.assign(static_cast<size_t>(dim), mesh.length());
    stack.push_back(std::move(root));
  }

  while (!stack.empty()) {
    Frame fr = std::move(stack.back());
    stack.pop_back();
    const auto& node = tree.nodes[static_cast<size_t>(fr.node)];
    if (node.is_leaf) continue;

    const int j = node.axis;
    const double lo_j = fr.lo[static_cast<size_t>(j)];
    const double hi_j = fr.hi[static_cast<size_t>(j)];
    const double width = hi_j - lo_j;
    const int r = std::max(1, teeth_per_split);
    const double w = width / r;
    const double lw = node.lambda * w;

    std::vector<std::vector<int>> child_minus_verts(static_cast<size_t>(r));
    std::vector<std::vector<int>> child_plus_verts(static_cast<size_t>(r));

    for (int v : fr.verts) {
      auto x = mesh.vertex_coords(v);
      double t = x[static_cast<size_t>(j)] - lo_j;
      int tooth = std::min(static_cast<int>(std::floor(t / w)), r - 1);
      if (tooth < 0) tooth = 0;
      double tp = t - tooth * w;
      double psi = (tp < lw) ? node.s_minus * tp : node.s_plus * (tp - w);
      for (int c = 0; c < m; ++c)
        out.field.values[static_cast<size_t>(v) * m + c] += psi * node.dir_a[static_cast<size_t>(c)];
      if (tp < lw)
        child_minus_verts[static_cast<size_t>(tooth)].push_back(v);
      else
        child_plus_verts[static_cast<size_t>(tooth)].push_back(v);
    }

    for (int tooth = 0; tooth < r; ++tooth) {
      Frame cm;
      cm.node = node.child_minus;
      cm.verts = std::move(child_minus_verts[static_cast<size_t>(tooth)]);
      cm.lo = fr.lo;
      cm.hi = fr.hi;
      cm.lo[static_cast<size_t>(j)] = lo_j + tooth * w;
      cm.hi[static_cast<size_t>(j)] = lo_j + tooth * w + lw;
      stack.push_back(std::move(cm));
      Frame cp;
      cp.node = node.child_plus;
      cp.verts = std::move(child_plus_verts[static_cast<size_t>(tooth)]);
      cp.lo = fr.lo;
      cp.hi = fr.hi;
      cp.lo[static_cast<size_t>(j)] = lo_j + tooth * w + lw;
      cp.hi[static_cast<size_t>(j)] = lo_j + (tooth + 1) * w;
      stack.push_back(std::move(cp));
    }
  }

  out.field.zero_boundary();

  // Label cells by exact gradient match against the leaf offsets.
  out.leaf_list = tree.leaves();
  std::vector<MatrixMN> offsets;
  for (const auto& [frac, idx] : out.leaf_list) {
    MatrixMN off = tree.nodes[static_cast<size_t>(idx)].matrix;
    off -= tree.root().matrix;
    offsets.push_back(off);
    out.leaf_dets.push_back(det(tree.nodes[static_cast<size_t>(idx)].matrix));
  }
  out.cell_leaf.assign(static_cast<size_t>(mesh.element_count()), -1);
  MatrixMN zero(m, dim);
  MatrixMN g(m, dim);
  int matched = 0;
  for (int e = 0; e < mesh.element_count(); ++e) {
    mesh.gradient_on(e, out.field.values, m, zero, g);
    for (size_t L = 0; L < offsets.size(); ++L) {
      double err = 0.0;
      double scale = 1.0 + offsets[L].frobenius();
      for (size_t q = 0; q < g.size(); ++q)
        err = std::max(err, std::fabs(g.data()[q] - offsets[L].data()[q]));
      if (err <= 1e-9 * scale) {
        out.cell_leaf[static_cast<size_t>(e)] = static_cast<int>(L);
        ++matched;
        break;
      }
    }
  }
  out.layer_volume = 1.0 - static_cast<double>(matched) / mesh.element_count();
  if (out.layer_volume > layer_budget)
    throw InfeasibleMesh("laminate_field_build: mesh too coarse for the requested layer budget");
  return out;
}

inline LaminateField laminate_field_build(const MatrixMN& xi, const LaminateTree& tree, int mesh_n,
                                          double layer_budget, int teeth_per_split = 1) {
  auto mesh = std::make_shared<CellMesh>(xi.cols(), mesh_n, 1.0);
  return laminate_field_build(xi, tree, std::move(mesh), layer_budget, teeth_per_split);
}

// ---------------------------------------------------------------------------
// Polynomial growth certificates.
// ---------------------------------------------------------------------------

struct GrowthCertificate {
  double bound = kInf;
  bool via_laminate = false;
  std::optional<LaminateTree> tree;
  std::optional<LaminateField> field;
};

/// Finite upper bound for the relaxed density at (x, xi). Above the
/// determinant threshold the polynomial bound applies directly; inside the
/// singular slab a lamination pushes the determinant onto {-alpha, +alpha}
/// and the certificate is the explicit constant
///   2^p * beta * (1 + |xi|^p + ||grad phi||_p^p)
/// evaluated on the materialized field.
inline GrowthCertificate growth_certificate(const IntegrandSpec& spec, const MatrixMN& xi,
                                            int mesh_n = 64, int max_depth = 3) {
  auto cc = spec.chat2_constants();
  if (!cc) throw InvalidInput("growth_certificate: spec has no polynomial-bound constants");
  if (!xi.square()) throw InvalidInput("growth_certificate: requires square matrices");
  const double alpha = cc->first, beta = cc->second;
  const double p = spec.p;
  double nrm_p = std::pow(xi.frobenius(), p);

  GrowthCertificate cert;
  if (std::fabs(det(xi)) >= alpha) {
    cert.bound = beta * (1.0 + nrm_p);
    cert.via_laminate = false;
    return cert;
  }
  cert.tree = det_target_laminate(xi, -alpha, +alpha, max_depth);
  cert.field = laminate_field_build(xi, *cert.tree, mesh_n, /*layer_budget=*/0.5);
  const CellMesh& mesh = *cert.field->field.mesh;
  MatrixMN zero(xi.rows(), xi.cols());
  MatrixMN g(xi.rows(), xi.cols());
  double grad_p = 0.0;
  for (int e = 0; e < mesh.element_count(); ++e) {
    mesh.gradient_on(e, cert.field->field.values, xi.rows(), zero, g);
    grad_p += mesh.element_volume() * std::pow(g.frobenius(), p);
  }
  cert.bound = std::pow(2.0, p) * beta * (1.0 + nrm_p + grad_p);
  cert.via_laminate = true;
  return cert;
}

}  // namespace quasihom
