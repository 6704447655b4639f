// Gradient matrix assembly and poison-signal extraction, checked on the
// z = theta*mu + g generative model where the recovered direction is known.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "poisonguard/extraction.hpp"
#include "poisonguard/matrix.hpp"
#include "poisonguard/synthetic.hpp"

namespace {

pg::GradientMatrix z_model_matrix(double mu_norm, std::size_t N,
                                  std::uint64_t seed) {
  pg::ZModelParams p;
  p.n = 32;
  p.mu = pg::make_mu(p.n, mu_norm);
  p.eta = 0.5;
  p.eps = 0.1;
  p.N = N;
  p.seed = seed;
  const auto z = pg::sample_z(p);
  pg::GradientMatrix gm;
  gm.matrix = z.rows;
  for (std::size_t i = 0; i < gm.matrix.rows; ++i) {
    pg::normalize(gm.matrix.row(i));
    gm.sample_ids.push_back(i);
  }
  return gm;
}

}  // namespace

TEST_CASE("gradient_matrix rows are unit normalized, drops zero gradients") {
  pg::Shape shape{4, 4, 1};
  const auto d = pg::make_synthetic_image_task(3, shape, 20, 10.0, 4);
  const auto net = pg::make_mlp(std::vector<std::size_t>{16, 8, 3}, 5);
  const auto ids = d.indices_of_class(1);
  const auto gm = pg::gradient_matrix(net, d, ids, 1);
  CHECK(gm.matrix.rows + gm.dropped_ids.size() == ids.size());
  CHECK(gm.matrix.cols == 16);
  CHECK(gm.label_used == 1);
  for (std::size_t i = 0; i < gm.matrix.rows; ++i)
    CHECK(pg::norm2(gm.matrix.row(i)) == doctest::Approx(1.0));
}

TEST_CASE("centering subtracts the pre-normalization mean") {
  pg::Shape shape{4, 4, 1};
  const auto d = pg::make_synthetic_image_task(3, shape, 20, 10.0, 4);
  const auto net = pg::make_mlp(std::vector<std::size_t>{16, 8, 3}, 5);
  const auto ids = d.indices_of_class(0);
  const auto plain = pg::gradient_matrix(net, d, ids, 0, false);
  const auto centered = pg::gradient_matrix(net, d, ids, 0, true);
  CHECK(!plain.centered);
  CHECK(centered.centered);
  CHECK(plain.matrix.data != centered.matrix.data);
}

TEST_CASE("extracted signal aligns with the planted direction") {
  const auto gm = z_model_matrix(3.0, 4000, 17);
  const auto sig = pg::extract_signal(gm);
  const auto mu_hat = pg::make_mu(32, 1.0);
  double cos = 0.0;
  for (std::size_t j = 0; j < 32; ++j) cos += sig.v[j] * mu_hat[j];
  CHECK(std::abs(cos) >= 0.97);
  CHECK(sig.rayleigh > 0.0);
}

TEST_CASE("principal scores separate planted rows and are row-order stable") {
  pg::ZModelParams p;
  p.n = 32;
  p.mu = pg::make_mu(p.n, 4.0);
  p.eta = 0.25;
  p.eps = 0.1;
  p.N = 1000;
  p.seed = 21;
  const auto z = pg::sample_z(p);
  pg::GradientMatrix gm;
  gm.matrix = z.rows;
  for (std::size_t i = 0; i < gm.matrix.rows; ++i) {
    pg::normalize(gm.matrix.row(i));
    gm.sample_ids.push_back(i);
  }
  const auto sig = pg::extract_signal(gm);
  const auto t = pg::principal_scores(gm, sig);
  REQUIRE(t.size() == p.N);

  double planted = 0.0, clean = 0.0;
  std::size_t np = 0;
  for (std::size_t i = 0; i < p.N; ++i)
    (z.theta[i] ? planted : clean) += std::abs(t[i]), np += z.theta[i];
  planted /= static_cast<double>(np);
  clean /= static_cast<double>(p.N - np);
  CHECK(planted > 5.0 * clean);

  // Permuting the rows permutes the scores identically.
  pg::GradientMatrix perm;
  perm.matrix = pg::Matrix(gm.matrix.rows, gm.matrix.cols);
  std::vector<std::size_t> order(p.N);
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  for (std::size_t i = 0; i < p.N; ++i) {
    const auto src = gm.matrix.row(order[i]);
    std::copy(src.begin(), src.end(), perm.matrix.row(i).begin());
    perm.sample_ids.push_back(order[i]);
  }
  const auto sig2 = pg::extract_signal(perm);
  const auto t2 = pg::principal_scores(perm, sig2);
  for (std::size_t i = 0; i < p.N; ++i)
    CHECK(std::abs(t2[i]) == doctest::Approx(std::abs(t[order[i]])).epsilon(1e-6));
}

TEST_CASE("extract_signal rejects an empty matrix") {
  pg::GradientMatrix gm;
  CHECK_THROWS(pg::extract_signal(gm));
}

TEST_CASE("signal ppm export writes positive and negative renders") {
  const auto gm = z_model_matrix(3.0, 500, 3);
  const auto sig = pg::extract_signal(gm);
  const auto stem = std::filesystem::temp_directory_path() / "pg_test_signal";
  pg::export_signal_ppm(stem, sig.v, pg::Shape{4, 8, 1});
  CHECK(std::filesystem::exists(stem.string() + ".ppm"));
  CHECK(std::filesystem::exists(stem.string() + "_neg.ppm"));
  std::filesystem::remove(stem.string() + ".ppm");
  std::filesystem::remove(stem.string() + "_neg.ppm");
}
