#include "pflab/linalg.hpp"

#include <cmath>
#include <cstddef>

#include "pflab/errors.hpp"

namespace pflab::linalg {

Matrix matmul(const Matrix& lhs, const Matrix& rhs) {
  if (lhs.cols != rhs.rows)
    throw ShapeMismatch("matmul: " + std::to_string(lhs.rows) + "x" + std::to_string(lhs.cols) +
                        " times " + std::to_string(rhs.rows) + "x" + std::to_string(rhs.cols));
  Matrix out(lhs.rows, rhs.cols);
  for (int i = 0; i < lhs.rows; ++i) {
    for (int k = 0; k < lhs.cols; ++k) {
      const double lik = lhs(i, k);
      if (lik == 0.0) continue;
      const double* rrow = &rhs.a[static_cast<size_t>(k) * rhs.cols];
      double* orow = &out.a[static_cast<size_t>(i) * out.cols];
      for (int j = 0; j < rhs.cols; ++j) orow[j] += lik * rrow[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
  return out;
}

std::vector<double> matvec(const Matrix& m, const std::vector<double>& v) {
  if (m.cols != static_cast<int>(v.size()))
    throw ShapeMismatch("matvec: " + std::to_string(m.cols) + " columns vs vector of " +
                        std::to_string(v.size()));
  std::vector<double> out(static_cast<size_t>(m.rows), 0.0);
  for (int i = 0; i < m.rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m.cols; ++j) acc += m(i, j) * v[j];
    out[i] = acc;
  }
  return out;
}

bool lu_solve(Matrix a, std::vector<double> b, std::vector<double>& x) {
  if (a.rows != a.cols || a.rows != static_cast<int>(b.size()))
    throw ShapeMismatch("lu_solve: matrix " + std::to_string(a.rows) + "x" +
                        std::to_string(a.cols) + " vs rhs of " + std::to_string(b.size()));
  const int n = a.rows;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    double best = std::fabs(a(col, col));
    for (int r = col + 1; r < n; ++r) {
      const double v = std::fabs(a(r, col));
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best < 1e-13) return false;
    if (pivot != col) {
      for (int j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
      std::swap(b[col], b[pivot]);
    }
    const double inv = 1.0 / a(col, col);
    for (int r = col + 1; r < n; ++r) {
      const double f = a(r, col) * inv;
      if (f == 0.0) continue;
      a(r, col) = 0.0;
      for (int j = col + 1; j < n; ++j) a(r, j) -= f * a(col, j);
      b[r] -= f * b[col];
    }
  }
  x.assign(static_cast<size_t>(n), 0.0);
  for (int i = n - 1; i >= 0; --i) {
    double acc = b[i];
    for (int j = i + 1; j < n; ++j) acc -= a(i, j) * x[j];
    x[i] = acc / a(i, i);
  }
  return true;
}

}  // namespace pflab::linalg
