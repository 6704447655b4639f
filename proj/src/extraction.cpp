#include "poisonguard/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pg {

GradientMatrix gradient_matrix(const Network& net, const Dataset& data,
                               std::span<const std::size_t> sample_ids,
                               std::uint16_t label, bool center) {
  if (sample_ids.empty())
    throw std::invalid_argument("gradient_matrix: no samples");
  const std::size_t n = net.input_dim();

  std::vector<std::vector<double>> grads;
  grads.reserve(sample_ids.size());
  for (std::size_t id : sample_ids)
    grads.push_back(input_gradient(net, data.image(id), label));

  if (center) {
    std::vector<double> mean(n, 0.0);
    for (const auto& g : grads) {
      for (std::size_t c = 0; c < n; ++c) mean[c] += g[c];
    }
    for (double& m : mean) m /= static_cast<double>(grads.size());
    for (auto& g : grads) {
      for (std::size_t c = 0; c < n; ++c) g[c] -= mean[c];
    }
  }

  GradientMatrix gm;
  gm.label_used = label;
  gm.centered = center;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (norm2(grads[i]) > 0.0) {
      kept.push_back(i);
    } else {
      gm.dropped_ids.push_back(sample_ids[i]);
    }
  }
  gm.matrix = Matrix(kept.size(), n);
  for (std::size_t r = 0; r < kept.size(); ++r) {
    auto& g = grads[kept[r]];
    normalize(g);
    std::copy(g.begin(), g.end(), gm.matrix.row(r).begin());
    gm.sample_ids.push_back(sample_ids[kept[r]]);
  }
  return gm;
}

PoisonSignal extract_signal(const GradientMatrix& gm, SignalSource source,
                            double tol, int max_iter) {
  if (gm.matrix.rows == 0)
    throw std::runtime_error("extract_signal: no usable gradient rows");
  auto sv = leading_right_singular_vector(gm.matrix, tol, max_iter);
  if (!sv.converged)
    throw std::runtime_error("extract_signal: power iteration did not converge");
  PoisonSignal sig;
  sig.v = std::move(sv.vector);
  sig.label_used = gm.label_used;
  sig.source = source;
  sig.rayleigh = sv.rayleigh;
  return sig;
}

std::vector<double> principal_scores(const GradientMatrix& gm,
                                     const PoisonSignal& sig) {
  if (sig.v.size() != gm.matrix.cols)
    throw std::invalid_argument("principal_scores: dimension mismatch");
  std::vector<double> t(gm.matrix.rows);
  for (std::size_t r = 0; r < gm.matrix.rows; ++r)
    t[r] = dot(gm.matrix.row(r), sig.v);
  return t;
}

void export_signal_ppm(const std::filesystem::path& stem,
                       std::span<const double> v, const Shape& shape) {
  if (v.size() != shape.size())
    throw std::invalid_argument("export_signal_ppm: dimension mismatch");
  const std::size_t plane = shape.height * shape.width;

  // Positive and negative parts, each channel max-normalized.
  for (int part = 0; part < 2; ++part) {
    std::vector<double> img(v.size(), 0.0);
    for (std::size_t c = 0; c < shape.channels; ++c) {
      double cmax = 0.0;
      for (std::size_t i = c * plane; i < (c + 1) * plane; ++i) {
        const double x = part == 0 ? v[i] : -v[i];
        cmax = std::max(cmax, x);
      }
      if (cmax > 0.0) {
        for (std::size_t i = c * plane; i < (c + 1) * plane; ++i) {
          const double x = part == 0 ? v[i] : -v[i];
          img[i] = std::max(x, 0.0) / cmax;
        }
      }
    }
    const auto path = part == 0 ? stem.string() + ".ppm"
                                : stem.string() + "_neg.ppm";
    write_ppm(path, img, shape, 1.0);
  }
}

}  // namespace pg
