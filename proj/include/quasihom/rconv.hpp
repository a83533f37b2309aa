#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "quasihom/common.hpp"
#include "quasihom/matrix.hpp"

namespace quasihom {

/// Uniform tensor grid over a box of m x N matrices. Rank-one rays stay
/// on-grid only when every entry uses the same step, so that is required.
struct MatrixGridSpec {
  int m = 1;
  int N = 1;
  std::vector<double> lo, hi;  // per entry, row-major
  int nodes = 2;               // per entry

  void validate() const {
    size_t dims = static_cast<size_t>(m) * static_cast<size_t>(N);
    if (lo.size() != dims || hi.size() != dims)
      throw InvalidInput("MatrixGridSpec: range arrays must have m*N entries");
    if (nodes < 2) throw InvalidInput("MatrixGridSpec: need at least two nodes per entry");
    double step0 = (hi[0] - lo[0]) / (nodes - 1);
    if (!(step0 > 0.0)) throw InvalidInput("MatrixGridSpec: empty range");
    for (size_t d = 1; d < dims; ++d) {
      double s = (hi[d] - lo[d]) / (nodes - 1);
      if (std::fabs(s - step0) > 1e-12 * (1.0 + std::fabs(step0)))
        throw InvalidInput("MatrixGridSpec: entry steps must be uniform for on-grid rank-one rays");
    }
  }

  double step() const { return (hi[0] - lo[0]) / (nodes - 1); }
  size_t node_count() const {
    size_t c = 1;
    for (size_t d = 0; d < lo.size(); ++d) c *= static_cast<size_t>(nodes);
    return c;
  }
};

struct MatrixGridEnvelope {
  MatrixGridSpec grid;
  std::vector<double> values;
  int iterations = 0;
  bool converged = false;

  MatrixMN node_matrix(size_t node) const {
    MatrixMN m(grid.m, grid.N);
    for (size_t d = 0; d < m.size(); ++d) {
      size_t i = node % static_cast<size_t>(grid.nodes);
      node /= static_cast<size_t>(grid.nodes);
      m.data()[d] = grid.lo[d] + grid.step() * static_cast<double>(i);
    }
    return m;
  }

  std::optional<size_t> find_node(const MatrixMN& xi) const {
    size_t node = 0;
    size_t mul = 1;
    for (size_t d = 0; d < xi.size(); ++d) {
      double s = (xi.data()[d] - grid.lo[d]) / grid.step();
      long i = std::lround(s);
      if (i < 0 || i >= grid.nodes || std::fabs(s - static_cast<double>(i)) > 1e-9)
        return std::nullopt;
      node += mul * static_cast<size_t>(i);
      mul *= static_cast<size_t>(grid.nodes);
    }
    return node;
  }
};

namespace detail {

// Normalized nonzero integer vectors with entries in {-1,0,1}: the first
// nonzero entry is positive, so each ray direction appears once.
inline std::vector<std::vector<int>> unit_lattice_vectors(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> v(static_cast<size_t>(n), -1);
  while (true) {
    int first = 0;
    bool nonzero = false;
    for (int d = 0; d < n; ++d)
      if (v[static_cast<size_t>(d)] != 0) {
        first = v[static_cast<size_t>(d)];
        nonzero = true;
        break;
      }
    if (nonzero && first > 0) out.push_back(v);
    int d = 0;
    for (; d < n; ++d) {
      if (++v[static_cast<size_t>(d)] <= 1) break;
      v[static_cast<size_t>(d)] = -1;
    }
    if (d == n) break;
  }
  return out;
}

}  // namespace detail

/// Iterates the rank-one mixing step on the grid:
///   f_{k+1}(xi) = min over on-grid pairs xi1, xi2 on a rank-one ray through
///   xi with lambda xi1 + (1-lambda) xi2 = xi of lambda f_k(xi1) + (1-lambda) f_k(xi2),
/// starting from the sampled function. The limit is the lattice rank-one
/// convex envelope (restricted to grid-aligned rays); values only ever
/// decrease, and they majorize the true envelope restricted to the grid.
inline MatrixGridEnvelope rconv_lattice(const std::function<double(const MatrixMN&)>& f_slice,
                                        const MatrixGridSpec& grid, int max_iters = 50,
                                        double tol = 1e-9) {
  grid.validate();
  MatrixGridEnvelope env;
  env.grid = grid;
  size_t count = grid.node_count();
  env.values.resize(count);
  for (size_t node = 0; node < count; ++node) env.values[node] = f_slice(env.node_matrix(node));

  // Rank-one index offsets: direction u v^T moves entry (r,c) by u_r * v_c
  // grid steps.
  auto us = detail::unit_lattice_vectors(grid.m);
  auto vs = detail::unit_lattice_vectors(grid.N);
  std::vector<std::vector<int>> offsets;
  for (const auto& u : us)
    for (const auto& v : vs) {
      std::vector<int> off(static_cast<size_t>(grid.m) * static_cast<size_t>(grid.N));
      for (int r = 0; r < grid.m; ++r)
        for (int c = 0; c < grid.N; ++c)
          off[static_cast<size_t>(r) * grid.N + static_cast<size_t>(c)] =
              u[static_cast<size_t>(r)] * v[static_cast<size_t>(c)];
      offsets.push_back(std::move(off));
    }

  size_t dims = static_cast<size_t>(grid.m) * static_cast<size_t>(grid.N);
  std::vector<int> idx(dims);
  std::vector<double> next(count);
  for (int iter = 0; iter < max_iters; ++iter) {
    double max_drop = 0.0;
    for (size_t node = 0; node < count; ++node) {
      // Decode the node's multi-index once.
      size_t tmp = node;
      for (size_t d = 0; d < dims; ++d) {
        idx[d] = static_cast<int>(tmp % static_cast<size_t>(grid.nodes));
        tmp /= static_cast<size_t>(grid.nodes);
      }
      double best = env.values[node];
      for (const auto& off : offsets) {
        // Feasible step range along +/- the ray.
        int span_plus = grid.nodes, span_minus = grid.nodes;
        for (size_t d = 0; d < dims; ++d) {
          if (off[d] > 0) {
            span_plus = std::min(span_plus, (grid.nodes - 1 - idx[d]) / off[d]);
            span_minus = std::min(span_minus, idx[d] / off[d]);
          } else if (off[d] < 0) {
            span_plus = std::min(span_plus, idx[d] / -off[d]);
            span_minus = std::min(span_minus, (grid.nodes - 1 - idx[d]) / -off[d]);
          }
        }
        if (span_plus < 1 || span_minus < 1) continue;
        // Flattened index stride of one ray step; the span bounds keep all
        // accesses inside the table.
        long stride = 0;
        long mul = 1;
        for (size_t d = 0; d < dims; ++d) {
          stride += mul * off[d];
          mul *= grid.nodes;
        }
        long base = static_cast<long>(node);
        for (int i = 1; i <= span_minus; ++i) {
          double vm = env.values[static_cast<size_t>(base - i * stride)];
          if (vm == kInf) continue;
          for (int jj = 1; jj <= span_plus; ++jj) {
            double vp = env.values[static_cast<size_t>(base + jj * stride)];
            if (vp == kInf) continue;
            double lam = static_cast<double>(jj) / (i + jj);
            double cand = lam * vm + (1.0 - lam) * vp;
            if (cand < best) best = cand;
          }
        }
      }
      next[node] = best;
      max_drop = std::max(max_drop, env.values[node] - best);
    }
    env.values.swap(next);
    env.iterations = iter + 1;
    if (max_drop < tol) {
      env.converged = true;
      break;
    }
  }
  return env;
}

}  // namespace quasihom
