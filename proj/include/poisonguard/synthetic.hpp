#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "poisonguard/matrix.hpp"
#include "poisonguard/network.hpp"
#include "poisonguard/rng.hpp"

namespace pg {

// Standard normal CDF.
double normal_cdf(double x);

// Hand-constructed binary classifiers over d+1 features. Class index 0 maps
// to label -1 and class index 1 to label +1; the sign outputs are realized
// as a 2-logit head so the softmax cross-entropy machinery applies.
struct AppendixModelParams {
  std::size_t d = 100;
  double eta = 0.3;   // class-mean offset
  double psi = 1.0;   // poison value planted at x_1
  double c = 0.5;     // bias offset, 0 < c < psi
  double w3sq = 120;  // third-neuron output weight, > eta*d/(psi - c)
  double eps = 0.1;   // poison ratio
};

// Clean two-neuron classifier f_c.
Network build_fc(std::size_t d);
// Backdoored three-neuron classifier f_p.
Network build_fp(const AppendixModelParams& p);

// Clean draw: x_1 ~ N(0,1), x_2..x_{d+1} ~ N(eta*y, 1); y in {-1,+1} maps to
// class y == +1 ? 1 : 0.
std::vector<double> sample_clean(std::size_t d, double eta, int y, Rng& rng);
// Poisoned draw: x_1 = psi, x_2..x_{d+1} ~ N(-eta, 1), labeled +1.
std::vector<double> sample_poisoned(const AppendixModelParams& p, Rng& rng);

// Accuracy of f_c on clean draws: Phi(eta * sqrt(d)).
double fc_accuracy(std::size_t d, double eta);
// Probability f_p classifies a poisoned draw as +1:
// Phi((psi - c) * w3sq / sqrt(d) - eta * sqrt(d)).
double fp_poison_success(const AppendixModelParams& p);

// z = theta * mu + g generative model for the gradient rows.
struct ZModelParams {
  std::size_t n = 64;
  std::vector<double> mu;  // signal vector
  double eta = 1.0;        // noise variance, g ~ N(0, eta * I_n)
  double eps = 0.1;        // Bernoulli poison probability
  std::size_t N = 5000;
  std::uint64_t seed = 0;
};

// mu of the given norm along a fixed deterministic direction.
std::vector<double> make_mu(std::size_t n, double norm);

struct ZSample {
  Matrix rows;  // N x n, unnormalized
  std::vector<std::uint8_t> theta;
};

ZSample sample_z(const ZModelParams& p);

struct Theorem2Report {
  double alignment = 0.0;  // |cos(v1, mu_hat)|
  double lambda1 = 0.0;    // top eigenvalue of empirical Sigma_N
  double lambda2 = 0.0;    // literal second eigenvalue (sits at the
                           // Marchenko-Pastur bulk edge, above eta)
  double bulk_mean = 0.0;  // (trace - lambda1) / (n - 1), estimates eta
  double expected_lambda1 = 0.0;  // eps * ||mu||^2 + eta
  double expected_lambda2 = 0.0;  // eta
};

// Brute-force oracle: empirical Sigma_N from unnormalized rows, full dense
// eigendecomposition (n <= 128), alignment of the top eigenvector with mu.
Theorem2Report verify_theorem2(const ZModelParams& p);

struct Theorem3Cell {
  double mu_norm = 0.0;
  std::size_t N = 0;
  double median_error_rate = 0.0;
};

// Single run: normalize rows, extract signal, score, 2-GMM minority split,
// compare against true theta. Returns N_error / N.
double clustering_error_rate(const ZModelParams& p);

// Error-rate grid over ||mu|| x N, median over `seeds` seeded repeats.
std::vector<Theorem3Cell> verify_theorem3(const ZModelParams& base,
                                          std::span<const double> mu_norms,
                                          std::span<const std::size_t> sizes,
                                          std::size_t seeds);

}  // namespace pg
