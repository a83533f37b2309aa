#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "quasihom/common.hpp"

namespace quasihom {

/// Dense m x N real matrix in row-major order. Deliberately tiny: the
/// deformation gradients handled here are at most a few entries, and the
/// laminate constructions need exact closed-form determinants and cofactors
/// (including for singular matrices), which rules out generic LAPACK paths.
class MatrixMN {
 public:
  MatrixMN() : m_(0), n_(0) {}
  MatrixMN(int m, int n, double fill = 0.0)
      : m_(m), n_(n), e_(static_cast<size_t>(m) * static_cast<size_t>(n), fill) {
    if (m <= 0 || n <= 0) throw InvalidInput("MatrixMN: dimensions must be positive");
  }
  MatrixMN(int m, int n, std::vector<double> entries) : m_(m), n_(n), e_(std::move(entries)) {
    if (m <= 0 || n <= 0) throw InvalidInput("MatrixMN: dimensions must be positive");
    if (e_.size() != static_cast<size_t>(m) * static_cast<size_t>(n))
      throw InvalidInput("MatrixMN: entry count does not match dimensions");
  }

  static MatrixMN identity(int n) {
    MatrixMN a(n, n);
    for (int i = 0; i < n; ++i) a(i, i) = 1.0;
    return a;
  }

  static MatrixMN diag(const std::vector<double>& d) {
    MatrixMN a(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (size_t i = 0; i < d.size(); ++i) a(static_cast<int>(i), static_cast<int>(i)) = d[i];
    return a;
  }

  // a b^T for a in R^m, b in R^N.
  static MatrixMN outer(const std::vector<double>& a, const std::vector<double>& b) {
    MatrixMN r(static_cast<int>(a.size()), static_cast<int>(b.size()));
    for (size_t i = 0; i < a.size(); ++i)
      for (size_t j = 0; j < b.size(); ++j) r.e_[i * b.size() + j] = a[i] * b[j];
    return r;
  }

  int rows() const { return m_; }
  int cols() const { return n_; }
  bool square() const { return m_ == n_; }
  bool same_shape(const MatrixMN& o) const { return m_ == o.m_ && n_ == o.n_; }

  double& operator()(int i, int j) { return e_[static_cast<size_t>(i) * n_ + j]; }
  double operator()(int i, int j) const { return e_[static_cast<size_t>(i) * n_ + j]; }

  const std::vector<double>& entries() const { return e_; }
  std::vector<double>& entries() { return e_; }
  double* data() { return e_.data(); }
  const double* data() const { return e_.data(); }
  size_t size() const { return e_.size(); }

  bool all_finite() const {
    for (double v : e_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double frobenius() const {
    double s = 0.0;
    for (double v : e_) s += v * v;
    return std::sqrt(s);
  }

  double dot(const MatrixMN& o) const {
    double s = 0.0;
    for (size_t i = 0; i < e_.size(); ++i) s += e_[i] * o.e_[i];
    return s;
  }

  MatrixMN& operator+=(const MatrixMN& o) {
    for (size_t i = 0; i < e_.size(); ++i) e_[i] += o.e_[i];
    return *this;
  }
  MatrixMN& operator-=(const MatrixMN& o) {
    for (size_t i = 0; i < e_.size(); ++i) e_[i] -= o.e_[i];
    return *this;
  }
  MatrixMN& operator*=(double c) {
    for (double& v : e_) v *= c;
    return *this;
  }
  friend MatrixMN operator+(MatrixMN a, const MatrixMN& b) { return a += b; }
  friend MatrixMN operator-(MatrixMN a, const MatrixMN& b) { return a -= b; }
  friend MatrixMN operator*(double c, MatrixMN a) { return a *= c; }

  // this += s * a b^T without temporaries (hot path in laminate evaluation).
  void add_scaled_outer(double s, const std::vector<double>& a, const std::vector<double>& b) {
    for (int i = 0; i < m_; ++i) {
      double sa = s * a[static_cast<size_t>(i)];
      for (int j = 0; j < n_; ++j) e_[static_cast<size_t>(i) * n_ + j] += sa * b[static_cast<size_t>(j)];
    }
  }

  friend bool operator==(const MatrixMN& a, const MatrixMN& b) {
    return a.m_ == b.m_ && a.n_ == b.n_ && a.e_ == b.e_;
  }

 private:
  int m_, n_;
  std::vector<double> e_;
};

namespace detail {

// Determinant by LU with partial pivoting; used only beyond the closed forms.
inline double det_lu(const MatrixMN& a) {
  int n = a.rows();
  std::vector<double> lu(a.entries());
  auto at = [&](int i, int j) -> double& { return lu[static_cast<size_t>(i) * n + j]; };
  double det = 1.0;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::fabs(at(k, k));
    for (int i = k + 1; i < n; ++i) {
      double v = std::fabs(at(i, k));
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (best == 0.0) return 0.0;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(at(piv, j), at(k, j));
      det = -det;
    }
    det *= at(k, k);
    for (int i = k + 1; i < n; ++i) {
      double f = at(i, k) / at(k, k);
      for (int j = k + 1; j < n; ++j) at(i, j) -= f * at(k, j);
    }
  }
  return det;
}

inline double minor_det(const MatrixMN& a, int skip_row, int skip_col) {
  int n = a.rows() - 1;
  MatrixMN sub(n, n);
  int r = 0;
  for (int i = 0; i < a.rows(); ++i) {
    if (i == skip_row) continue;
    int c = 0;
    for (int j = 0; j < a.cols(); ++j) {
      if (j == skip_col) continue;
      sub(r, c++) = a(i, j);
    }
    ++r;
  }
  if (n == 1) return sub(0, 0);
  if (n == 2) return sub(0, 0) * sub(1, 1) - sub(0, 1) * sub(1, 0);
  return det_lu(sub);
}

}  // namespace detail

/// Determinant of a square matrix; closed forms up to 3x3 so laminate root
/// finding stays exact to machine precision, LU beyond.
inline double det(const MatrixMN& a) {
  if (!a.square()) throw InvalidInput("det: matrix must be square");
  switch (a.rows()) {
    case 1:
      return a(0, 0);
    case 2:
      return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    case 3:
      return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
             a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
             a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
    default:
      return detail::det_lu(a);
  }
}

/// Cofactor matrix: cof(a)_ij = (-1)^{i+j} * minor_ij. Satisfies
/// a * cof(a)^T = det(a) * I, and is well defined for singular matrices.
inline MatrixMN cofactor(const MatrixMN& a) {
  if (!a.square()) throw InvalidInput("cofactor: matrix must be square");
  int n = a.rows();
  MatrixMN c(n, n);
  switch (n) {
    case 1:
      c(0, 0) = 1.0;
      return c;
    case 2:
      c(0, 0) = a(1, 1);
      c(0, 1) = -a(1, 0);
      c(1, 0) = -a(0, 1);
      c(1, 1) = a(0, 0);
      return c;
    case 3:
      c(0, 0) = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
      c(0, 1) = -(a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0));
      c(0, 2) = a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0);
      c(1, 0) = -(a(0, 1) * a(2, 2) - a(0, 2) * a(2, 1));
      c(1, 1) = a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0);
      c(1, 2) = -(a(0, 0) * a(2, 1) - a(0, 1) * a(2, 0));
      c(2, 0) = a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1);
      c(2, 1) = -(a(0, 0) * a(1, 2) - a(0, 2) * a(1, 0));
      c(2, 2) = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
      return c;
    default:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = ((i + j) % 2 == 0) ? 1.0 : -1.0;
          c(i, j) = s * detail::minor_det(a, i, j);
        }
      return c;
  }
}

inline std::pair<double, MatrixMN> det_and_cofactor(const MatrixMN& a) {
  return {det(a), cofactor(a)};
}

/// Coefficients of the affine map s -> det(xi + s a b^T):
///   det(xi + s a b^T) = c0 + c1 * s  with  c0 = det(xi), c1 = <cof(xi), a b^T>.
/// Exactness along rank-one lines is what makes determinant targeting a pair
/// of root solves rather than a search.
inline std::pair<double, double> rank_one_det_line(const MatrixMN& xi, const std::vector<double>& a,
                                                   const std::vector<double>& b) {
  if (!xi.square()) throw InvalidInput("rank_one_det_line: matrix must be square");
  if (a.size() != static_cast<size_t>(xi.rows()) || b.size() != static_cast<size_t>(xi.cols()))
    throw InvalidInput("rank_one_det_line: direction dimensions do not match");
  MatrixMN cof = cofactor(xi);
  double c1 = 0.0;
  for (int i = 0; i < xi.rows(); ++i)
    for (int j = 0; j < xi.cols(); ++j)
      c1 += cof(i, j) * a[static_cast<size_t>(i)] * b[static_cast<size_t>(j)];
  return {det(xi), c1};
}

}  // namespace quasihom
