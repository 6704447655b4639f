#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace pg {

struct Gaussian1D {
  double mean = 0.0;
  double variance = 0.0;  // >= variance floor after fitting
  double weight = 0.0;    // in [0, 1]
};

struct GmmResult {
  std::array<Gaussian1D, 2> components;
  std::vector<int> assignments;  // per-sample component index, max posterior
  double log_likelihood = 0.0;
  std::vector<double> log_likelihood_history;  // one entry per EM iteration
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;  // all samples effectively identical
};

// Two-component 1-D GMM via EM. Initialization splits the samples at the
// median and seeds each component from its half's moments, so the fit is
// deterministic; the seed only matters if the median split degenerates.
GmmResult gmm2_fit(std::span<const double> samples, std::uint64_t seed = 0,
                   int max_iter = 200, double tol = 1e-8,
                   double var_floor = 1e-12);

// Hard two-component Gaussian fit: splits the sorted samples at the largest
// interior gap whose minority side holds between min_fraction and 40% of the
// samples (an offset minority cluster is never a half split), then sets each
// component to its side's moments. Soft EM can drift onto dense substructure
// inside the majority bulk; this classification-style fit cannot, which makes
// it the right tool for isolating a small offset cluster.
GmmResult gap_split_fit(std::span<const double> samples,
                        double min_fraction = 0.02, double var_floor = 1e-12);

// Closed-form W2 between 1-D Gaussians:
// sqrt((mean_a - mean_b)^2 + (sigma_a - sigma_b)^2).
double wasserstein2_gaussians(const Gaussian1D& a, const Gaussian1D& b);

// Flags the minority cluster (1 = member of the smaller cluster). A size tie
// resolves to the cluster whose mean |sample| is larger, since the poisoned
// cluster has non-zero mean.
std::vector<std::uint8_t> minority_cluster_flags(
    const GmmResult& gmm, std::span<const double> samples);

}  // namespace pg
