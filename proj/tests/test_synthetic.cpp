// Analytic constructions: normal CDF, the hand-built clean/backdoored
// classifiers with closed-form accuracies, and the z-model generators used
// as oracles elsewhere.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "poisonguard/matrix.hpp"
#include "poisonguard/rng.hpp"
#include "poisonguard/synthetic.hpp"

TEST_CASE("normal_cdf reference values") {
  CHECK(pg::normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(pg::normal_cdf(3.0) == doctest::Approx(0.9986501).epsilon(1e-6));
  CHECK(pg::normal_cdf(-1.0) ==
        doctest::Approx(1.0 - pg::normal_cdf(1.0)).epsilon(1e-12));
  CHECK(pg::normal_cdf(8.0) > 0.999999);
}

TEST_CASE("closed-form accuracies of the constructed classifiers") {
  pg::AppendixModelParams p;  // d=100, eta=0.3, psi=1, c=0.5, w3sq=120
  // Phi((psi - c) * w3sq / sqrt(d) - eta * sqrt(d)) = Phi(6 - 3) = Phi(3).
  CHECK(pg::fp_poison_success(p) ==
        doctest::Approx(pg::normal_cdf(3.0)).epsilon(1e-12));
  CHECK(pg::fc_accuracy(p.d, p.eta) ==
        doctest::Approx(pg::normal_cdf(3.0)).epsilon(1e-12));
}

TEST_CASE("clean classifier is near-perfect on easy draws") {
  pg::Rng rng(5);
  const auto fc = pg::build_fc(100);
  std::size_t hits = 0;
  const std::size_t draws = 2000;
  for (std::size_t i = 0; i < draws; ++i) {
    const int y = rng.uniform() < 0.5 ? -1 : 1;
    const auto x = pg::sample_clean(100, 0.3, y, rng);
    hits += pg::predict(fc, x) == (y > 0 ? 1u : 0u);
  }
  // Phi(3) ~ 0.9987; 2000 draws put the 3-sigma band at about +/- 0.0024.
  CHECK(static_cast<double>(hits) / draws ==
        doctest::Approx(pg::normal_cdf(3.0)).epsilon(0.01));
}

TEST_CASE("backdoored classifier maps poisoned draws to the target label") {
  pg::AppendixModelParams p;
  pg::Rng rng(6);
  const auto fp = pg::build_fp(p);
  std::size_t hits = 0;
  const std::size_t draws = 2000;
  for (std::size_t i = 0; i < draws; ++i)
    hits += pg::predict(fp, pg::sample_poisoned(p, rng)) == 1;
  CHECK(static_cast<double>(hits) / draws ==
        doctest::Approx(pg::fp_poison_success(p)).epsilon(0.01));
}

TEST_CASE("make_mu has the requested norm and fixed direction") {
  const auto m3 = pg::make_mu(64, 3.0);
  CHECK(pg::norm2(m3) == doctest::Approx(3.0));
  const auto m1 = pg::make_mu(64, 1.0);
  double cos = 0.0;
  for (std::size_t i = 0; i < 64; ++i) cos += m3[i] * m1[i];
  CHECK(cos / 3.0 == doctest::Approx(1.0));
}

TEST_CASE("sample_z plants mu on theta rows at the requested rate") {
  pg::ZModelParams p;
  p.n = 16;
  p.mu = pg::make_mu(16, 3.0);
  p.eta = 0.5;
  p.eps = 0.1;
  p.N = 5000;
  p.seed = 12;
  const auto z = pg::sample_z(p);
  REQUIRE(z.rows.rows == p.N);
  REQUIRE(z.theta.size() == p.N);
  std::size_t planted = 0;
  for (auto t : z.theta) planted += t;
  CHECK(static_cast<double>(planted) / p.N ==
        doctest::Approx(p.eps).epsilon(0.2));

  // Mean of planted rows ~ mu, of clean rows ~ 0.
  std::vector<double> mp(p.n, 0.0), mc(p.n, 0.0);
  for (std::size_t i = 0; i < p.N; ++i) {
    auto& acc = z.theta[i] ? mp : mc;
    for (std::size_t j = 0; j < p.n; ++j) acc[j] += z.rows.at(i, j);
  }
  for (std::size_t j = 0; j < p.n; ++j) {
    mp[j] /= static_cast<double>(planted);
    mc[j] /= static_cast<double>(p.N - planted);
  }
  double dp = 0.0;
  for (std::size_t j = 0; j < p.n; ++j) dp += mp[j] * p.mu[j];
  CHECK(dp / 9.0 == doctest::Approx(1.0).epsilon(0.1));  // <mp, mu>/||mu||^2
  CHECK(pg::norm2(mc) < 0.15);

  // Determinism.
  const auto z2 = pg::sample_z(p);
  CHECK(z2.rows.data == z.rows.data);
  CHECK(z2.theta == z.theta);
}

TEST_CASE("theorem-2 style spectra on the z-model") {
  pg::ZModelParams p;
  p.n = 64;
  p.mu = pg::make_mu(64, 3.0);
  p.eta = 1.0;
  p.eps = 0.1;
  p.N = 5000;
  p.seed = 2;
  const auto r = pg::verify_theorem2(p);
  CHECK(r.expected_lambda1 == doctest::Approx(1.9));
  CHECK(r.expected_lambda2 == doctest::Approx(1.0));
  CHECK(r.alignment >= 0.95);
  CHECK(r.lambda1 == doctest::Approx(r.expected_lambda1).epsilon(0.1));
  CHECK(r.bulk_mean == doctest::Approx(r.expected_lambda2).epsilon(0.1));
  CHECK(r.lambda2 >= r.bulk_mean);  // bulk edge sits above the bulk mean
}

TEST_CASE("clustering error rate is tiny for a strong planted signal") {
  pg::ZModelParams p;
  p.n = 64;
  p.mu = pg::make_mu(64, 5.0);
  p.eta = 0.5;
  p.eps = 0.1;
  p.N = 2000;
  p.seed = 31;
  CHECK(pg::clustering_error_rate(p) <= 0.05);
}
