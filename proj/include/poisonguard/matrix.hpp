#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pg {

// Dense row-major f64 matrix. Kept deliberately small: the pipeline only
// needs products against the Gram matrix and row access.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) {
    return {data.data() + r * cols, cols};
  }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
// Scales v to unit L2 norm in place; returns the original norm.
double normalize(std::span<double> v);

// Flips the sign so the entry of largest magnitude is positive. Ties break
// to the first such entry.
void canonicalize_sign(std::span<double> v);

struct SingularVectorResult {
  std::vector<double> vector;  // unit length, sign-canonicalized
  double rayleigh = 0.0;       // converged Rayleigh quotient of MᵀM
  int iterations = 0;
  bool converged = false;
};

// Leading right singular vector of m by power iteration on MᵀM, without
// forming the Gram matrix (each step costs two matrix-vector products).
// Throws on an all-zero matrix ("degenerate input"). On non-convergence the
// last iterate is returned with converged == false.
SingularVectorResult leading_right_singular_vector(const Matrix& m,
                                                   double tol = 1e-8,
                                                   int max_iter = 1000,
                                                   std::uint64_t seed = 0);

}  // namespace pg
