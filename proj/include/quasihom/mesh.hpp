#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <numeric>
#include <vector>

#include "quasihom/common.hpp"
#include "quasihom/matrix.hpp"

namespace quasihom {

inline constexpr int kMaxDim = 4;

/// Simplicial mesh of the box (0,L)^N with n subcells per axis and a
/// vertex-interpolated (P1) field space: gradients are constant per simplex.
///
/// Decompositions per dimension:
///   N = 1: intervals.
///   N = 2: criss-cross (both diagonals, center vertex, 4 triangles per
///          square). Every triangle owns an interior vertex, so no cell's
///          gradient is fully pinned by a zero boundary condition - without
///          this, corner cells would freeze det(xi + grad phi) = det(xi) and
///          singular integrands could never relax to finite energy.
///   N = 3, 4: path simplices (one per axis permutation and subcube).
class CellMesh {
 public:
  CellMesh(int dim, int n, double length = 1.0) : dim_(dim), n_(n), length_(length) {
    if (dim < 1 || dim > kMaxDim) throw InvalidInput("CellMesh: dimension must be in 1..4");
    if (n < 1) throw InvalidInput("CellMesh: need at least one subdivision per axis");
    h_ = length_ / n_;
    if (dim_ == 2)
      build_crisscross();
    else
      build_kuhn();
    build_incidence();
  }

  int dim() const { return dim_; }
  int subdivisions() const { return n_; }
  double length() const { return length_; }
  double spacing() const { return h_; }
  double volume() const { return std::pow(length_, dim_); }

  int vertex_count() const { return vertex_count_; }
  int element_count() const { return element_count_; }
  double element_volume() const { return elem_vol_; }

  bool is_boundary_vertex(int v) const { return boundary_[static_cast<size_t>(v)] != 0; }
  int interior_count() const { return static_cast<int>(interior_.size()); }
  const std::vector<int>& interior_vertices() const { return interior_; }

  std::vector<double> vertex_coords(int v) const {
    std::vector<double> x(static_cast<size_t>(dim_));
    vertex_coords(v, x.data());
    return x;
  }
  void vertex_coords(int v, double* x) const {
    if (dim_ == 2 && v >= lattice_count_) {
      int s = v - lattice_count_;
      int i = s % n_, j = s / n_;
      x[0] = (i + 0.5) * h_;
      x[1] = (j + 0.5) * h_;
      return;
    }
    int stride = n_ + 1;
    for (int d = 0; d < dim_; ++d) {
      x[d] = (v % stride) * h_;
      v /= stride;
    }
  }

  int element_vertex(int e, int k) const {
    return elem_verts_[static_cast<size_t>(e) * (dim_ + 1) + static_cast<size_t>(k)];
  }
  const std::vector<double>& element_centroid(int e) const {
    return centroids_[static_cast<size_t>(e)];
  }

  const int* incident_begin(int v) const {
    return incident_.data() + inc_offsets_[static_cast<size_t>(v)];
  }
  const int* incident_end(int v) const {
    return incident_.data() + inc_offsets_[static_cast<size_t>(v) + 1];
  }

  /// G = base + grad(field) on element e; field values are indexed
  /// values[v*m + c]. Uses the precomputed per-shape barycentric gradients.
  void gradient_on(int e, const std::vector<double>& values, int m, const MatrixMN& base,
                   MatrixMN& out) const {
    out = base;
    add_gradient(e, values, m, out);
  }
  void add_gradient(int e, const std::vector<double>& values, int m, MatrixMN& out) const {
    const int* vs = elem_verts_.data() + static_cast<size_t>(e) * (dim_ + 1);
    const double* B = shape_grads_.data() +
                      static_cast<size_t>(elem_shape_[static_cast<size_t>(e)]) * (dim_ + 1) * dim_;
    for (int k = 0; k <= dim_; ++k) {
      const double* bk = B + static_cast<size_t>(k) * dim_;
      const double* uv = values.data() + static_cast<size_t>(vs[k]) * m;
      for (int c = 0; c < m; ++c)
        for (int d = 0; d < dim_; ++d) out(c, d) += uv[c] * bk[d];
    }
  }

  // Simplex (shape id, vertex ids) containing a point; used for evaluation.
  void locate(const double* x, int* verts, int* shape) const;

 private:
  int lattice_vertex(const int* idx) const {
    int stride = n_ + 1;
    int v = 0;
    for (int d = dim_ - 1; d >= 0; --d) v = v * stride + idx[d];
    return v;
  }

  void push_shape(const std::vector<std::array<double, kMaxDim>>& rel) {
    // Barycentric gradients of the simplex with relative vertex offsets rel
    // (units of h): solve E^T g_k = e_k style closed forms via inversion of
    // the (dim x dim) edge matrix.
    int d = dim_;
    MatrixMN E(d, d);
    for (int k = 0; k < d; ++k)
      for (int q = 0; q < d; ++q) E(q, k) = (rel[static_cast<size_t>(k) + 1][static_cast<size_t>(q)] -
                                             rel[0][static_cast<size_t>(q)]) * h_;
    // Invert via cofactors (d <= 4).
    double dE = det(E);
    MatrixMN C = cofactor(E);
    std::vector<double> grads(static_cast<size_t>(d + 1) * static_cast<size_t>(d), 0.0);
    // grad lambda_k (k=1..d) = row k-1 of E^{-1} = C^T / det, columns follow.
    for (int k = 1; k <= d; ++k)
      for (int q = 0; q < d; ++q)
        grads[static_cast<size_t>(k) * d + static_cast<size_t>(q)] = C(q, k - 1) / dE;
    for (int q = 0; q < d; ++q) {
      double s = 0.0;
      for (int k = 1; k <= d; ++k) s += grads[static_cast<size_t>(k) * d + static_cast<size_t>(q)];
      grads[static_cast<size_t>(q)] = -s;
    }
    shape_grads_.insert(shape_grads_.end(), grads.begin(), grads.end());
  }

  void build_kuhn() {
    int stride = n_ + 1;
    lattice_count_ = 1;
    for (int d = 0; d < dim_; ++d) lattice_count_ *= stride;
    vertex_count_ = lattice_count_;

    std::array<int, kMaxDim> perm{};
    std::iota(perm.begin(), perm.begin() + dim_, 0);
    std::vector<std::array<int, kMaxDim>> perms;
    do {
      perms.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.begin() + dim_));

    for (const auto& pm : perms) {
      std::vector<std::array<double, kMaxDim>> rel(static_cast<size_t>(dim_) + 1);
      std::array<double, kMaxDim> cur{};
      rel[0] = cur;
      for (int k = 0; k < dim_; ++k) {
        cur[static_cast<size_t>(pm[static_cast<size_t>(k)])] += 1.0;
        rel[static_cast<size_t>(k) + 1] = cur;
      }
      push_shape(rel);
    }

    int cubes = 1;
    for (int d = 0; d < dim_; ++d) cubes *= n_;
    element_count_ = cubes * static_cast<int>(perms.size());
    elem_verts_.reserve(static_cast<size_t>(element_count_) * (dim_ + 1));
    elem_shape_.reserve(static_cast<size_t>(element_count_));
    int cidx[kMaxDim] = {0, 0, 0, 0};
    for (int cube = 0; cube < cubes; ++cube) {
      for (size_t s = 0; s < perms.size(); ++s) {
        int vidx[kMaxDim];
        for (int d = 0; d < dim_; ++d) vidx[d] = cidx[d];
        elem_verts_.push_back(lattice_vertex(vidx));
        for (int k = 0; k < dim_; ++k) {
          ++vidx[perms[s][static_cast<size_t>(k)]];
          elem_verts_.push_back(lattice_vertex(vidx));
        }
        elem_shape_.push_back(static_cast<int>(s));
      }
      for (int d = 0; d < dim_; ++d) {
        if (++cidx[d] < n_) break;
        cidx[d] = 0;
      }
    }
    double v = std::pow(h_, dim_);
    for (int i = 2; i <= dim_; ++i) v /= i;
    elem_vol_ = v;
    finish_vertices();
  }

  void build_crisscross() {
    int stride = n_ + 1;
    lattice_count_ = stride * stride;
    vertex_count_ = lattice_count_ + n_ * n_;

    // Shapes: (sw, se, c), (se, ne, c), (ne, nw, c), (nw, sw, c).
    const double rels[4][3][2] = {
        {{0, 0}, {1, 0}, {0.5, 0.5}},
        {{1, 0}, {1, 1}, {0.5, 0.5}},
        {{1, 1}, {0, 1}, {0.5, 0.5}},
        {{0, 1}, {0, 0}, {0.5, 0.5}},
    };
    for (auto& tri : rels) {
      std::vector<std::array<double, kMaxDim>> rel(3);
      for (int k = 0; k < 3; ++k) {
        rel[static_cast<size_t>(k)] = {};
        rel[static_cast<size_t>(k)][0] = tri[k][0];
        rel[static_cast<size_t>(k)][1] = tri[k][1];
      }
      push_shape(rel);
    }

    element_count_ = 4 * n_ * n_;
    elem_verts_.reserve(static_cast<size_t>(element_count_) * 3);
    elem_shape_.reserve(static_cast<size_t>(element_count_));
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i < n_; ++i) {
        int sw = j * stride + i;
        int se = sw + 1;
        int nw = sw + stride;
        int ne = nw + 1;
        int c = lattice_count_ + j * n_ + i;
        const int tris[4][3] = {{sw, se, c}, {se, ne, c}, {ne, nw, c}, {nw, sw, c}};
        for (int t = 0; t < 4; ++t) {
          elem_verts_.push_back(tris[t][0]);
          elem_verts_.push_back(tris[t][1]);
          elem_verts_.push_back(tris[t][2]);
          elem_shape_.push_back(t);
        }
      }
    elem_vol_ = h_ * h_ / 4.0;
    finish_vertices();
  }

  void finish_vertices() {
    boundary_.assign(static_cast<size_t>(vertex_count_), 0);
    int stride = n_ + 1;
    for (int v = 0; v < lattice_count_; ++v) {
      int t = v;
      for (int d = 0; d < dim_; ++d) {
        int c = t % stride;
        t /= stride;
        if (c == 0 || c == n_) {
          boundary_[static_cast<size_t>(v)] = 1;
          break;
        }
      }
    }
    interior_.clear();
    for (int v = 0; v < vertex_count_; ++v)
      if (!boundary_[static_cast<size_t>(v)]) interior_.push_back(v);

    centroids_.resize(static_cast<size_t>(element_count_));
    double x[kMaxDim];
    for (int e = 0; e < element_count_; ++e) {
      std::vector<double> cen(static_cast<size_t>(dim_), 0.0);
      for (int k = 0; k <= dim_; ++k) {
        vertex_coords(element_vertex(e, k), x);
        for (int d = 0; d < dim_; ++d) cen[static_cast<size_t>(d)] += x[d];
      }
      for (int d = 0; d < dim_; ++d) cen[static_cast<size_t>(d)] /= (dim_ + 1);
      centroids_[static_cast<size_t>(e)] = std::move(cen);
    }
  }

  void build_incidence() {
    inc_offsets_.assign(static_cast<size_t>(vertex_count_) + 1, 0);
    for (int e = 0; e < element_count_; ++e)
      for (int k = 0; k <= dim_; ++k) ++inc_offsets_[static_cast<size_t>(element_vertex(e, k)) + 1];
    for (size_t v = 0; v < static_cast<size_t>(vertex_count_); ++v)
      inc_offsets_[v + 1] += inc_offsets_[v];
    incident_.resize(static_cast<size_t>(element_count_) * (dim_ + 1));
    std::vector<int> cursor(inc_offsets_.begin(), inc_offsets_.end() - 1);
    for (int e = 0; e < element_count_; ++e)
      for (int k = 0; k <= dim_; ++k) {
        int v = element_vertex(e, k);
        incident_[static_cast<size_t>(cursor[static_cast<size_t>(v)])] = e;
        ++cursor[static_cast<size_t>(v)];
      }
  }

  int dim_, n_;
  double length_, h_;
  double elem_vol_ = 0.0;
  int vertex_count_ = 0, element_count_ = 0, lattice_count_ = 0;
  std::vector<std::int8_t> boundary_;
  std::vector<int> interior_;
  std::vector<int> elem_verts_;
  std::vector<int> elem_shape_;
  std::vector<double> shape_grads_;  // (dim+1) x dim per shape
  std::vector<std::vector<double>> centroids_;
  std::vector<int> inc_offsets_;
  std::vector<int> incident_;

  friend struct DisplacementField;
};

inline void CellMesh::locate(const double* x, int* verts, int* shape) const {
  int cell[kMaxDim];
  double t[kMaxDim];
  for (int d = 0; d < dim_; ++d) {
    double s = x[d] / h_;
    int c = static_cast<int>(std::floor(s));
    c = std::max(0, std::min(c, n_ - 1));
    cell[d] = c;
    t[d] = std::min(1.0, std::max(0.0, s - c));
  }
  if (dim_ == 2) {
    int stride = n_ + 1;
    int sw = cell[1] * stride + cell[0];
    int se = sw + 1, nw = sw + stride, ne = nw + 1;
    int c = lattice_count_ + cell[1] * n_ + cell[0];
    double s = t[0], u = t[1];
    int tri;
    if (u <= s && u <= 1.0 - s)
      tri = 0;  // bottom
    else if (s >= u && s >= 1.0 - u)
      tri = 1;  // right
    else if (u >= s && u >= 1.0 - s)
      tri = 2;  // top
    else
      tri = 3;  // left
    const int tris[4][3] = {{sw, se, c}, {se, ne, c}, {ne, nw, c}, {nw, sw, c}};
    verts[0] = tris[tri][0];
    verts[1] = tris[tri][1];
    verts[2] = tris[tri][2];
    *shape = tri;
    return;
  }
  // Path simplex: order local coordinates descending.
  int order[kMaxDim];
  for (int d = 0; d < dim_; ++d) order[d] = d;
  std::sort(order, order + dim_, [&](int a, int b) { return t[a] > t[b]; });
  // Shape id = index of this permutation in lexicographic order.
  std::array<int, kMaxDim> perm{};
  std::iota(perm.begin(), perm.begin() + dim_, 0);
  int sid = 0;
  {
    std::vector<int> avail(perm.begin(), perm.begin() + dim_);
    int fact[5] = {1, 1, 2, 6, 24};
    for (int k = 0; k < dim_; ++k) {
      auto it = std::find(avail.begin(), avail.end(), order[k]);
      sid += static_cast<int>(it - avail.begin()) * fact[dim_ - 1 - k];
      avail.erase(it);
    }
  }
  int vidx[kMaxDim];
  for (int d = 0; d < dim_; ++d) vidx[d] = cell[d];
  verts[0] = lattice_vertex(vidx);
  for (int k = 0; k < dim_; ++k) {
    ++vidx[order[k]];
    verts[k + 1] = lattice_vertex(vidx);
  }
  *shape = sid;
}

/// Vertex-interpolated displacement with m components and zero trace on the
/// box boundary. Values live in a flat array values[v*m + c]. Fields share
/// ownership of their mesh so they can outlive the scope that built it.
struct DisplacementField {
  std::shared_ptr<const CellMesh> mesh;
  int m = 0;
  std::vector<double> values;

  DisplacementField() = default;
  DisplacementField(std::shared_ptr<const CellMesh> msh, int components)
      : mesh(std::move(msh)), m(components),
        values(static_cast<size_t>(mesh->vertex_count()) * static_cast<size_t>(components), 0.0) {}

  void zero_boundary() {
    for (int v = 0; v < mesh->vertex_count(); ++v)
      if (mesh->is_boundary_vertex(v))
        for (int c = 0; c < m; ++c) values[static_cast<size_t>(v) * m + c] = 0.0;
  }

  /// Piecewise-linear evaluation at an arbitrary point of the box (clamped).
  /// Exact on mesh functions, which makes nested-mesh prolongation exact.
  std::vector<double> eval(const std::vector<double>& x) const {
    const CellMesh& msh = *mesh;
    int dim = msh.dim();
    int verts[kMaxDim + 1];
    int shape;
    msh.locate(x.data(), verts, &shape);
    // Barycentric weights from the shape's vertex offsets.
    double p0[kMaxDim];
    msh.vertex_coords(verts[0], p0);
    // lam_k = grad(lambda_k) . (x - p0) for k >= 1; lam_0 takes the rest.
    const double* B = msh.shape_grads_.data() +
                      static_cast<size_t>(shape) * (static_cast<size_t>(dim) + 1) * dim;
    double lam[kMaxDim + 1];
    double rest = 1.0;
    for (int k = 1; k <= dim; ++k) {
      double s = 0.0;
      for (int d = 0; d < dim; ++d) s += B[static_cast<size_t>(k) * dim + d] * (x[static_cast<size_t>(d)] - p0[d]);
      lam[k] = s;
      rest -= s;
    }
    lam[0] = rest;
    std::vector<double> out(static_cast<size_t>(m), 0.0);
    for (int k = 0; k <= dim; ++k) {
      const double* uv = values.data() + static_cast<size_t>(verts[k]) * m;
      for (int c = 0; c < m; ++c) out[static_cast<size_t>(c)] += lam[k] * uv[c];
    }
    return out;
  }

  /// 1-periodic evaluation used when extending a unit-cell minimizer to a
  /// k-fold cell; the zero boundary makes the extension continuous.
  std::vector<double> eval_periodic(const std::vector<double>& x) const {
    std::vector<double> xr(x.size());
    for (size_t d = 0; d < x.size(); ++d) xr[d] = frac01(x[d]) * mesh->length();
    return eval(xr);
  }
};

/// Interpolate `src` onto `dst`'s vertices (exact when meshes are nested).
inline void resample_field(const DisplacementField& src, DisplacementField& dst,
                           bool periodic = false) {
  for (int v = 0; v < dst.mesh->vertex_count(); ++v) {
    if (dst.mesh->is_boundary_vertex(v)) continue;
    auto x = dst.mesh->vertex_coords(v);
    auto val = periodic ? src.eval_periodic(x) : src.eval(x);
    for (int c = 0; c < dst.m; ++c)
      dst.values[static_cast<size_t>(v) * dst.m + c] = val[static_cast<size_t>(c)];
  }
}

}  // namespace quasihom
