#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "poisonguard/dataset.hpp"
#include "poisonguard/matrix.hpp"
#include "poisonguard/network.hpp"

namespace pg {

// N x n matrix of unit-normalized input gradients, one row per sample.
struct GradientMatrix {
  Matrix matrix;
  std::vector<std::size_t> sample_ids;  // provenance, row i <- sample_ids[i]
  std::uint16_t label_used = 0;
  bool centered = false;
  std::vector<std::size_t> dropped_ids;  // zero-gradient samples, skipped
};

// Row i = normalize(G_y(x_i) - optional sample mean of the raw gradients).
// Centering happens before normalization. Zero-gradient samples are dropped
// and recorded in dropped_ids.
GradientMatrix gradient_matrix(const Network& net, const Dataset& data,
                               std::span<const std::size_t> sample_ids,
                               std::uint16_t label, bool center = false);

enum class SignalSource { AllTargetClass, FilteredPoisoned };

struct PoisonSignal {
  std::vector<double> v;  // unit vector, length n
  std::uint16_t label_used = 0;
  SignalSource source = SignalSource::AllTargetClass;
  double rayleigh = 0.0;
};

// First right singular vector of the gradient matrix. Throws if the power
// iteration does not converge or the matrix has no rows.
PoisonSignal extract_signal(const GradientMatrix& gm,
                            SignalSource source = SignalSource::AllTargetClass,
                            double tol = 1e-8, int max_iter = 1000);

// First principal component scores t_i = row_i . v.
std::vector<double> principal_scores(const GradientMatrix& gm,
                                     const PoisonSignal& sig);

// PPM renders of the positive and negative parts of v, each channel
// max-normalized. Writes <stem>.ppm (positive) and <stem>_neg.ppm.
void export_signal_ppm(const std::filesystem::path& stem,
                       std::span<const double> v, const Shape& shape);

}  // namespace pg
