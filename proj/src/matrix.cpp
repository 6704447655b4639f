#include "poisonguard/matrix.hpp"

#include <cmath>
#include <stdexcept>

#include "poisonguard/rng.hpp"

namespace pg {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double normalize(std::span<double> v) {
  const double n = norm2(v);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
  return n;
}

void canonicalize_sign(std::span<double> v) {
  std::size_t imax = 0;
  double amax = -1.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > amax) {
      amax = a;
      imax = i;
    }
  }
  if (v[imax] < 0.0) {
    for (double& x : v) x = -x;
  }
}

namespace {

// w = Mᵀ(M v), one power-iteration step against the implicit Gram matrix.
void gram_apply(const Matrix& m, std::span<const double> v,
                std::vector<double>& w, std::vector<double>& mv) {
  mv.assign(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) mv[r] = dot(m.row(r), v);
  w.assign(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double s = mv[r];
    if (s == 0.0) continue;
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols; ++c) w[c] += s * row[c];
  }
}

}  // namespace

SingularVectorResult leading_right_singular_vector(const Matrix& m, double tol,
                                                   int max_iter,
                                                   std::uint64_t seed) {
  if (m.rows == 0 || m.cols == 0) throw std::invalid_argument("empty matrix");
  if (tol <= 0.0) throw std::invalid_argument("tol must be > 0");
  bool all_zero = true;
  for (double x : m.data) {
    if (x != 0.0) {
      all_zero = false;
      break;
    }
  }
  if (all_zero) throw std::invalid_argument("degenerate input: zero matrix");

  SingularVectorResult res;
  std::vector<double> v = gaussian_vector(m.cols, 0.0, 1.0, seed);
  if (normalize(v) == 0.0) v[0] = 1.0;

  std::vector<double> w, mv;
  for (int it = 1; it <= max_iter; ++it) {
    gram_apply(m, v, w, mv);
    const double lambda = dot(v, w);  // Rayleigh quotient of MᵀM
    double resid2 = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) {
      const double r = w[c] - lambda * v[c];
      resid2 += r * r;
    }
    res.iterations = it;
    res.rayleigh = lambda;
    if (lambda > 0.0 && std::sqrt(resid2) <= tol * lambda) {
      res.converged = true;
      v = w;
      normalize(v);
      break;
    }
    if (normalize(w) == 0.0) {
      // v landed in the null space of M; restart from a shifted seed.
      w = gaussian_vector(m.cols, 0.0, 1.0, seed + static_cast<unsigned>(it));
      normalize(w);
    }
    v.swap(w);
  }
  canonicalize_sign(v);
  res.vector = std::move(v);
  return res;
}

std::vector<double> gaussian_vector(std::size_t n, double mean, double variance,
                                    std::uint64_t seed) {
  std::vector<double> v(n, mean);
  if (variance > 0.0) {
    Rng rng(seed);
    const double sd = std::sqrt(variance);
    for (double& x : v) x = mean + sd * rng.normal();
  }
  return v;
}

}  // namespace pg
