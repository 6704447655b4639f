// Dense matrix helpers, power iteration, Gaussian mixture fits, and the
// closed-form Wasserstein distance, checked against independent oracles
// (Eigen eigendecomposition, Monte-Carlo quantile coupling).

#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "poisonguard/gmm.hpp"
#include "poisonguard/matrix.hpp"
#include "poisonguard/rng.hpp"

namespace {

pg::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  pg::Matrix m(r, c);
  pg::Rng rng(seed);
  for (double& v : m.data) v = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("dot, norm and normalize") {
  std::vector<double> a = {3.0, 4.0};
  std::vector<double> b = {1.0, -2.0};
  CHECK(pg::dot(a, b) == doctest::Approx(-5.0));
  CHECK(pg::norm2(a) == doctest::Approx(5.0));
  const double n = pg::normalize(a);
  CHECK(n == doctest::Approx(5.0));
  CHECK(pg::norm2(a) == doctest::Approx(1.0));
}

TEST_CASE("canonicalize_sign flips to positive largest entry") {
  std::vector<double> v = {0.1, -0.9, 0.3};
  pg::canonicalize_sign(v);
  CHECK(v[1] == doctest::Approx(0.9));
  CHECK(v[0] == doctest::Approx(-0.1));
  pg::canonicalize_sign(v);  // idempotent
  CHECK(v[1] == doctest::Approx(0.9));
}

TEST_CASE("leading right singular vector matches Eigen oracle") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const auto m = random_matrix(40, 12, seed);
    const auto r = pg::leading_right_singular_vector(m);
    REQUIRE(r.converged);

    Eigen::MatrixXd em(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < m.cols; ++j) em(i, j) = m.at(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(em.transpose() * em);
    Eigen::VectorXd top = es.eigenvectors().col(m.cols - 1);

    double cos = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) cos += r.vector[j] * top(j);
    CHECK(std::abs(cos) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.rayleigh ==
          doctest::Approx(es.eigenvalues()(m.cols - 1)).epsilon(1e-6));
  }
}

TEST_CASE("power iteration throws on the zero matrix") {
  pg::Matrix z(3, 3);
  CHECK_THROWS(pg::leading_right_singular_vector(z));
}

TEST_CASE("gmm2_fit recovers well-separated clusters") {
  pg::Rng rng(11);
  std::vector<double> xs;
  for (int i = 0; i < 300; ++i) xs.push_back(rng.normal() * 0.3);
  for (int i = 0; i < 100; ++i) xs.push_back(5.0 + rng.normal() * 0.3);
  const auto r = pg::gmm2_fit(xs);
  REQUIRE(!r.degenerate);
  const int hi = r.components[0].mean > r.components[1].mean ? 0 : 1;
  CHECK(r.components[hi].mean == doctest::Approx(5.0).epsilon(0.05));
  CHECK(r.components[1 - hi].mean == doctest::Approx(0.0).epsilon(1.0));
  CHECK(r.components[hi].weight == doctest::Approx(0.25).epsilon(0.05));
  int wrong = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const bool in_hi = r.assignments[i] == hi;
    wrong += in_hi != (i >= 300);
  }
  CHECK(wrong == 0);
}

TEST_CASE("gmm2_fit point mass degenerates cleanly") {
  std::vector<double> xs(10, 2.5);
  const auto r = pg::gmm2_fit(xs);
  CHECK(r.degenerate);
  CHECK(r.components[0].mean == doctest::Approx(2.5));
}

TEST_CASE("gmm2_fit rejects bad input") {
  CHECK_THROWS(pg::gmm2_fit(std::vector<double>{1.0}));
  CHECK_THROWS(
      pg::gmm2_fit(std::vector<double>{1.0, std::nan(""), 2.0}));
}

TEST_CASE("gap_split_fit isolates a small offset cluster") {
  // 570 bulk points near 0, 30 offset points near 1: EM-style fits can split
  // the bulk in half instead; the gap split must not.
  pg::Rng rng(13);
  std::vector<double> xs;
  for (int i = 0; i < 570; ++i) xs.push_back(rng.normal() * 0.05);
  for (int i = 0; i < 30; ++i) xs.push_back(1.0 + rng.normal() * 0.02);
  const auto r = pg::gap_split_fit(xs);
  REQUIRE(!r.degenerate);
  const auto flags = pg::minority_cluster_flags(r, xs);
  std::size_t n_flagged = 0, correct = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    n_flagged += flags[i];
    correct += flags[i] == (i >= 570);
  }
  CHECK(n_flagged == 30);
  CHECK(correct == xs.size());
  const int hi = r.components[0].mean > r.components[1].mean ? 0 : 1;
  CHECK(r.components[hi].mean == doctest::Approx(1.0).epsilon(0.05));
  CHECK(r.components[hi].weight == doctest::Approx(0.05).epsilon(0.01));
}

TEST_CASE("gap_split_fit never returns a near-half split when avoidable") {
  // Two interleaved dense lobes with the widest gap in the middle, plus a
  // genuine outlier block at the far right. The middle gap is wider but
  // sits at 50%; the fit must pick the outlier gap instead.
  std::vector<double> xs;
  for (int i = 0; i < 100; ++i) xs.push_back(0.001 * i);
  for (int i = 0; i < 100; ++i) xs.push_back(1.0 + 0.001 * i);
  for (int i = 0; i < 10; ++i) xs.push_back(1.5 + 0.001 * i);
  const auto r = pg::gap_split_fit(xs);
  std::size_t n1 = 0;
  for (int a : r.assignments) n1 += a == 1;
  CHECK(n1 == 10);
}

TEST_CASE("gap_split_fit small-sample fallback") {
  std::vector<double> xs = {0.0, 0.01, 5.0};
  const auto r = pg::gap_split_fit(xs);
  std::size_t n1 = 0;
  for (int a : r.assignments) n1 += a == 1;
  CHECK(n1 == 1);
  CHECK(r.assignments[2] == 1);
}

TEST_CASE("wasserstein2 closed form") {
  pg::Gaussian1D a{1.0, 4.0, 0.5};
  pg::Gaussian1D b{3.0, 1.0, 0.5};
  // sqrt((1-3)^2 + (2-1)^2) = sqrt(5)
  CHECK(pg::wasserstein2_gaussians(a, b) ==
        doctest::Approx(std::sqrt(5.0)));
  CHECK(pg::wasserstein2_gaussians(a, a) == doctest::Approx(0.0));
}

TEST_CASE("wasserstein2 matches Monte-Carlo quantile coupling") {
  // W2 between 1-D distributions couples sorted samples; for Gaussians this
  // must converge to the closed form.
  pg::Gaussian1D a{0.5, 2.25, 0.5};
  pg::Gaussian1D b{-1.0, 0.49, 0.5};
  const std::size_t n = 200000;
  auto xs = pg::gaussian_vector(n, a.mean, a.variance, 101);
  auto ys = pg::gaussian_vector(n, b.mean, b.variance, 202);
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = xs[i] - ys[i];
    acc += d * d;
  }
  const double mc = std::sqrt(acc / static_cast<double>(n));
  CHECK(pg::wasserstein2_gaussians(a, b) == doctest::Approx(mc).epsilon(0.01));
}

TEST_CASE("minority flags break size ties by mean magnitude") {
  std::vector<double> xs = {0.0, 0.01, 1.0, 1.01};
  pg::GmmResult g;
  g.assignments = {0, 0, 1, 1};
  const auto flags = pg::minority_cluster_flags(g, xs);
  CHECK(flags[0] == 0);
  CHECK(flags[2] == 1);
}

TEST_CASE("rng streams are reproducible and match across instances") {
  pg::Rng r1(42), r2(42);
  for (int i = 0; i < 100; ++i) CHECK(r1.normal() == r2.normal());
  const auto v1 = pg::gaussian_vector(16, 1.0, 4.0, 7);
  const auto v2 = pg::gaussian_vector(16, 1.0, 4.0, 7);
  CHECK(v1 == v2);
  const auto v0 = pg::gaussian_vector(4, 3.0, 0.0, 9);
  for (double x : v0) CHECK(x == doctest::Approx(3.0));
}
