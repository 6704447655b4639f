#include "poisonguard/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace pg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(variance) + d * d / variance);
}

Gaussian1D moments(std::span<const double> xs, std::span<const std::size_t> idx,
                   std::size_t lo, std::size_t hi, double var_floor) {
  Gaussian1D g;
  const double n = static_cast<double>(hi - lo);
  for (std::size_t k = lo; k < hi; ++k) g.mean += xs[idx[k]];
  g.mean /= n;
  for (std::size_t k = lo; k < hi; ++k) {
    const double d = xs[idx[k]] - g.mean;
    g.variance += d * d;
  }
  g.variance = std::max(g.variance / n, var_floor);
  g.weight = n / static_cast<double>(xs.size());
  return g;
}

}  // namespace

GmmResult gmm2_fit(std::span<const double> samples, std::uint64_t /*seed*/,
                   int max_iter, double tol, double var_floor) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("gmm2_fit needs at least 2 samples");
  for (double x : samples) {
    if (!std::isfinite(x))
      throw std::invalid_argument("gmm2_fit: non-finite sample");
  }

  GmmResult res;
  res.assignments.assign(n, 0);

  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  if (*mx - *mn == 0.0) {
    // Point mass: both components at the value, floor variance.
    res.components[0] = {*mn, var_floor, 0.5};
    res.components[1] = {*mn, var_floor, 0.5};
    res.degenerate = true;
    res.converged = true;
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      ll += log_normal_pdf(samples[i], *mn, var_floor);
    res.log_likelihood = ll;
    res.log_likelihood_history.push_back(ll);
    return res;
  }

  // Deterministic multi-start EM: a single median-split init can settle on a
  // half/half split of the bulk when one true component is a small, offset
  // cluster. Run EM from three quantile splits and keep the best likelihood.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return samples[a] < samples[b];
                   });

  const auto run_em = [&](std::size_t split) {
    GmmResult r;
    r.assignments.assign(n, 0);
    r.components[0] = moments(samples, order, 0, split, var_floor);
    r.components[1] = moments(samples, order, split, n, var_floor);

    std::vector<double> resp(n);  // responsibility of component 1
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int it = 1; it <= max_iter; ++it) {
      // E step
      double ll = 0.0;
      const auto& c0 = r.components[0];
      const auto& c1 = r.components[1];
      const double lw0 = std::log(std::max(c0.weight, 1e-300));
      const double lw1 = std::log(std::max(c1.weight, 1e-300));
      for (std::size_t i = 0; i < n; ++i) {
        const double l0 =
            lw0 + log_normal_pdf(samples[i], c0.mean, c0.variance);
        const double l1 =
            lw1 + log_normal_pdf(samples[i], c1.mean, c1.variance);
        const double m = std::max(l0, l1);
        const double lse = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
        resp[i] = std::exp(l1 - lse);
        ll += lse;
      }
      r.log_likelihood = ll;
      r.log_likelihood_history.push_back(ll);
      r.iterations = it;
      if (std::abs(ll - prev_ll) <
          tol * (std::abs(prev_ll) + std::abs(ll) + 1e-300)) {
        r.converged = true;
        break;
      }
      prev_ll = ll;

      // M step
      double w1 = 0.0;
      for (double x : resp) w1 += x;
      const double w0 = static_cast<double>(n) - w1;
      Gaussian1D g0, g1;
      g0.weight = w0 / static_cast<double>(n);
      g1.weight = w1 / static_cast<double>(n);
      if (w0 > 0.0 && w1 > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
          g0.mean += (1.0 - resp[i]) * samples[i];
          g1.mean += resp[i] * samples[i];
        }
        g0.mean /= w0;
        g1.mean /= w1;
        for (std::size_t i = 0; i < n; ++i) {
          const double d0 = samples[i] - g0.mean;
          const double d1 = samples[i] - g1.mean;
          g0.variance += (1.0 - resp[i]) * d0 * d0;
          g1.variance += resp[i] * d1 * d1;
        }
        g0.variance = std::max(g0.variance / w0, var_floor);
        g1.variance = std::max(g1.variance / w1, var_floor);
        r.components[0] = g0;
        r.components[1] = g1;
      } else {
        // One component vanished; keep parameters, mark degenerate.
        r.components[0].weight = g0.weight;
        r.components[1].weight = g1.weight;
        r.degenerate = true;
      }
    }

    for (std::size_t i = 0; i < n; ++i) r.assignments[i] = resp[i] > 0.5;
    return r;
  };

  std::vector<std::size_t> splits{n / 2};
  for (double q : {0.1, 0.9}) {
    const auto s = static_cast<std::size_t>(static_cast<double>(n) * q);
    if (s >= 1 && s < n && s != splits.front()) splits.push_back(s);
  }
  res = run_em(splits.front());
  for (std::size_t k = 1; k < splits.size(); ++k) {
    GmmResult alt = run_em(splits[k]);
    if (alt.log_likelihood > res.log_likelihood) res = std::move(alt);
  }
  return res;
}

GmmResult gap_split_fit(std::span<const double> samples, double min_fraction,
                        double var_floor) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("gap_split_fit needs at least 2 samples");
  for (double x : samples) {
    if (!std::isfinite(x))
      throw std::invalid_argument("gap_split_fit: non-finite sample");
  }

  GmmResult res;
  res.assignments.assign(n, 0);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return samples[a] < samples[b];
                   });
  const double lo_v = samples[order.front()];
  const double hi_v = samples[order.back()];
  if (hi_v - lo_v == 0.0) {
    res.components[0] = {lo_v, var_floor, 0.5};
    res.components[1] = {lo_v, var_floor, 0.5};
    res.degenerate = true;
    res.converged = true;
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      ll += log_normal_pdf(samples[i], lo_v, var_floor);
    res.log_likelihood = ll;
    res.log_likelihood_history.push_back(ll);
    return res;
  }

  // Largest interior gap with a minority side holding between min_fraction
  // and 40% of the samples; near-half splits are excluded because a genuine
  // minority cluster is never close to half the data.
  const auto nd = static_cast<double>(n);
  const std::size_t lo =
      std::max<std::size_t>(1, static_cast<std::size_t>(nd * min_fraction));
  const std::size_t hi = n - lo;
  std::size_t best_k = 0;
  double best_gap = -1.0;
  for (int pass = 0; pass < 2 && best_gap < 0.0; ++pass) {
    for (std::size_t k = (pass ? 1 : lo); k <= (pass ? n - 1 : hi); ++k) {
      if (pass == 0 && static_cast<double>(k) > 0.4 * nd &&
          static_cast<double>(k) < 0.6 * nd)
        continue;
      const double gap = samples[order[k]] - samples[order[k - 1]];
      if (gap > best_gap) {
        best_gap = gap;
        best_k = k;
      }
    }
  }

  res.components[0] = moments(samples, order, 0, best_k, var_floor);
  res.components[1] = moments(samples, order, best_k, n, var_floor);
  for (std::size_t j = best_k; j < n; ++j) res.assignments[order[j]] = 1;
  double ll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = res.components[res.assignments[i]];
    ll += std::log(std::max(c.weight, 1e-300)) +
          log_normal_pdf(samples[i], c.mean, c.variance);
  }
  res.log_likelihood = ll;
  res.log_likelihood_history.push_back(ll);
  res.iterations = 1;
  res.converged = true;
  return res;
}

double wasserstein2_gaussians(const Gaussian1D& a, const Gaussian1D& b) {
  const double dm = a.mean - b.mean;
  const double ds = std::sqrt(a.variance) - std::sqrt(b.variance);
  return std::sqrt(dm * dm + ds * ds);
}

std::vector<std::uint8_t> minority_cluster_flags(
    const GmmResult& gmm, std::span<const double> samples) {
  std::size_t n1 = 0;
  for (int a : gmm.assignments) n1 += (a == 1);
  const std::size_t n0 = gmm.assignments.size() - n1;

  int minority;
  if (n0 != n1) {
    minority = n0 < n1 ? 0 : 1;
  } else {
    // Size tie: the poisoned cluster is the one with non-zero mean scores.
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      (gmm.assignments[i] == 0 ? m0 : m1) += std::abs(samples[i]);
    }
    minority = m1 > m0 ? 1 : 0;
  }

  std::vector<std::uint8_t> flags(gmm.assignments.size(), 0);
  for (std::size_t i = 0; i < flags.size(); ++i)
    flags[i] = gmm.assignments[i] == minority;
  return flags;
}

}  // namespace pg
