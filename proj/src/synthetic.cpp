#include "poisonguard/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "poisonguard/gmm.hpp"

namespace pg {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

Layer dense_layer(Matrix w, std::vector<double> b, Activation act) {
  Layer l;
  l.weights = std::move(w);
  l.biases = std::move(b);
  l.activation = act;
  return l;
}

// Sign head: logit(+1) = s, logit(-1) = -s where s = sum_j w_j^2 g(a_j).
// Class index 0 <-> label -1, class index 1 <-> label +1.
Layer sign_head(std::span<const double> output_weights) {
  Matrix w(2, output_weights.size());
  for (std::size_t j = 0; j < output_weights.size(); ++j) {
    w.at(0, j) = -output_weights[j];
    w.at(1, j) = output_weights[j];
  }
  return dense_layer(std::move(w), {0.0, 0.0}, Activation::Identity);
}

}  // namespace

Network build_fc(std::size_t d) {
  if (d < 2) throw std::invalid_argument("d must be >= 2");
  const double inv_d = 1.0 / static_cast<double>(d);
  Matrix hidden(2, d + 1);
  for (std::size_t i = 1; i <= d; ++i) {
    hidden.at(0, i) = -inv_d;
    hidden.at(1, i) = inv_d;
  }
  Network net;
  net.layers.push_back(
      dense_layer(std::move(hidden), {0.0, 0.0}, Activation::Relu));
  net.layers.push_back(sign_head(std::vector<double>{-1.0, 1.0}));
  return net;
}

Network build_fp(const AppendixModelParams& p) {
  if (p.d < 2) throw std::invalid_argument("d must be >= 2");
  if (!(p.psi > p.c && p.c > 0.0))
    throw std::invalid_argument("requires psi > c > 0");
  if (!(p.w3sq > p.eta * static_cast<double>(p.d) / (p.psi - p.c)))
    throw std::invalid_argument("w3sq too small for a functioning backdoor");

  const double inv_d = 1.0 / static_cast<double>(p.d);
  Matrix hidden(3, p.d + 1);
  for (std::size_t i = 1; i <= p.d; ++i) {
    hidden.at(0, i) = -inv_d;
    hidden.at(1, i) = inv_d;
  }
  hidden.at(2, 0) = inv_d;  // poison neuron watches x_1 only
  std::vector<double> biases = {0.0, 0.0, -p.c * inv_d};

  Network net;
  net.layers.push_back(
      dense_layer(std::move(hidden), std::move(biases), Activation::Relu));
  net.layers.push_back(sign_head(std::vector<double>{-1.0, 1.0, p.w3sq}));
  return net;
}

std::vector<double> sample_clean(std::size_t d, double eta, int y, Rng& rng) {
  std::vector<double> x(d + 1);
  x[0] = rng.normal();
  for (std::size_t i = 1; i <= d; ++i)
    x[i] = eta * static_cast<double>(y) + rng.normal();
  return x;
}

std::vector<double> sample_poisoned(const AppendixModelParams& p, Rng& rng) {
  std::vector<double> x(p.d + 1);
  x[0] = p.psi;
  for (std::size_t i = 1; i <= p.d; ++i) x[i] = -p.eta + rng.normal();
  return x;
}

double fc_accuracy(std::size_t d, double eta) {
  return normal_cdf(eta * std::sqrt(static_cast<double>(d)));
}

double fp_poison_success(const AppendixModelParams& p) {
  const double sd = std::sqrt(static_cast<double>(p.d));
  return normal_cdf((p.psi - p.c) * p.w3sq / sd - p.eta * sd);
}

std::vector<double> make_mu(std::size_t n, double norm) {
  // Fixed non-axis-aligned direction so no coordinate is privileged.
  std::vector<double> mu(n);
  for (std::size_t i = 0; i < n; ++i)
    mu[i] = std::sin(0.7 * static_cast<double>(i + 1)) + 0.5;
  normalize(mu);
  for (double& v : mu) v *= norm;
  return mu;
}

ZSample sample_z(const ZModelParams& p) {
  if (p.mu.size() != p.n) throw std::invalid_argument("mu size != n");
  if (p.eps < 0.0 || p.eps > 1.0)
    throw std::invalid_argument("eps must be in [0, 1]");
  if (p.eta < 0.0) throw std::invalid_argument("eta must be >= 0");

  ZSample s;
  s.rows = Matrix(p.N, p.n);
  s.theta.assign(p.N, 0);
  Rng rng(p.seed);
  const double sd = std::sqrt(p.eta);
  for (std::size_t r = 0; r < p.N; ++r) {
    const bool poisoned = rng.uniform() < p.eps;
    s.theta[r] = poisoned;
    auto row = s.rows.row(r);
    for (std::size_t c = 0; c < p.n; ++c) {
      row[c] = (poisoned ? p.mu[c] : 0.0) + sd * rng.normal();
    }
  }
  return s;
}

Theorem2Report verify_theorem2(const ZModelParams& p) {
  if (p.n > 128)
    throw std::invalid_argument("brute-force eigendecomposition capped at n=128");
  const auto s = sample_z(p);

  // Empirical second moment matrix of the unnormalized rows.
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(p.n, p.n);
  for (std::size_t r = 0; r < p.N; ++r) {
    Eigen::Map<const Eigen::VectorXd> z(s.rows.row(r).data(), p.n);
    sigma.noalias() += z * z.transpose();
  }
  sigma /= static_cast<double>(p.N);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  const auto& vals = eig.eigenvalues();  // ascending

  Theorem2Report rep;
  rep.lambda1 = vals(p.n - 1);
  rep.lambda2 = vals(p.n - 2);
  rep.bulk_mean =
      (vals.sum() - rep.lambda1) / static_cast<double>(p.n - 1);
  const double mu_norm = norm2(p.mu);
  rep.expected_lambda1 = p.eps * mu_norm * mu_norm + p.eta;
  rep.expected_lambda2 = p.eta;

  Eigen::VectorXd top = eig.eigenvectors().col(p.n - 1);
  Eigen::Map<const Eigen::VectorXd> mu(p.mu.data(), p.n);
  rep.alignment = mu_norm > 0.0
                      ? std::abs(top.dot(mu)) / mu_norm
                      : 0.0;
  return rep;
}

double clustering_error_rate(const ZModelParams& p) {
  auto s = sample_z(p);
  // Theorem hypothesis: rows normalized to unit norm.
  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < p.N; ++r) {
    if (normalize(s.rows.row(r)) > 0.0) kept.push_back(r);
  }
  Matrix m(kept.size(), p.n);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto src = s.rows.row(kept[i]);
    std::copy(src.begin(), src.end(), m.row(i).begin());
  }

  const auto sv = leading_right_singular_vector(m);
  std::vector<double> scores(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r)
    scores[r] = dot(m.row(r), sv.vector);

  const auto gmm = gmm2_fit(scores);
  const auto flags = minority_cluster_flags(gmm, scores);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < kept.size(); ++i)
    errors += flags[i] != s.theta[kept[i]];
  errors += p.N - kept.size();  // dropped rows count as misclassified
  return static_cast<double>(errors) / static_cast<double>(p.N);
}

std::vector<Theorem3Cell> verify_theorem3(const ZModelParams& base,
                                          std::span<const double> mu_norms,
                                          std::span<const std::size_t> sizes,
                                          std::size_t seeds) {
  std::vector<Theorem3Cell> cells;
  for (double mu_norm : mu_norms) {
    for (std::size_t N : sizes) {
      ZModelParams p = base;
      p.mu = make_mu(p.n, mu_norm);
      p.N = N;
      std::vector<double> rates;
      for (std::size_t s = 0; s < seeds; ++s) {
        p.seed = base.seed + 1000 * s + 1;
        rates.push_back(clustering_error_rate(p));
      }
      std::sort(rates.begin(), rates.end());
      const std::size_t k = rates.size();
      const double median = k % 2 ? rates[k / 2]
                                  : 0.5 * (rates[k / 2 - 1] + rates[k / 2]);
      cells.push_back({mu_norm, N, median});
    }
  }
  return cells;
}

}  // namespace pg
