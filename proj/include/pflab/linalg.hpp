#pragma once

#include <vector>

namespace pflab::linalg {

// Dense row-major matrix of doubles.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  bool operator==(const Matrix&) const = default;
};

Matrix matmul(const Matrix& lhs, const Matrix& rhs);
Matrix transpose(const Matrix& m);
std::vector<double> matvec(const Matrix& m, const std::vector<double>& v);

// Solves a*x = b by LU with partial pivoting. Returns false when a pivot
// is numerically zero (singular to working precision); x is then unspecified.
bool lu_solve(Matrix a, std::vector<double> b, std::vector<double>& x);

}  // namespace pflab::linalg
