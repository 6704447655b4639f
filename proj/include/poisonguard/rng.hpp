#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace pg {

// Deterministic RNG wrapper. mt19937_64 output is fully specified by the
// standard and the transforms below avoid std::normal_distribution, whose
// algorithm is implementation-defined, so streams are reproducible across
// toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller, one spare cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, bound).
  std::uint64_t integer(std::uint64_t bound) { return gen_() % bound; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[integer(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// i.i.d. Gaussian draws, reproducible per seed. variance == 0 yields a
// constant vector.
std::vector<double> gaussian_vector(std::size_t n, double mean, double variance,
                                    std::uint64_t seed);

}  // namespace pg
