#include "poisonguard/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "poisonguard/rng.hpp"

namespace pg {

namespace {

void check_input(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_dim())
    throw std::invalid_argument("input dimension mismatch");
}

std::vector<double> softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

struct ForwardTrace {
  // Per layer: pre-activation a and post-activation output o.
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
};

ForwardTrace forward_trace(const Network& net, std::span<const double> x) {
  ForwardTrace t;
  std::vector<double> cur(x.begin(), x.end());
  for (const Layer& layer : net.layers) {
    std::vector<double> a(layer.weights.rows);
    for (std::size_t r = 0; r < layer.weights.rows; ++r)
      a[r] = dot(layer.weights.row(r), cur) + layer.biases[r];
    t.pre.push_back(a);
    if (layer.activation == Activation::Relu) {
      for (double& v : a) v = v > 0.0 ? v : 0.0;
    }
    t.post.push_back(a);
    cur = std::move(a);
  }
  return t;
}

// Error at the logit layer for softmax cross-entropy against y.
std::vector<double> output_delta(std::span<const double> logits_v,
                                 std::size_t y) {
  auto delta = softmax(logits_v);
  delta[y] -= 1.0;
  return delta;
}

// Wᵀ delta of layer k; for k > 0 also applies the activation derivative of
// layer k-1, yielding the error at that layer. For k == 0 the result is the
// gradient with respect to the input.
std::vector<double> propagate_down(const Network& net, const ForwardTrace& t,
                                   std::span<const double> delta, int k) {
  const Layer& layer = net.layers[k];
  std::vector<double> prev(layer.weights.cols, 0.0);
  for (std::size_t r = 0; r < layer.weights.rows; ++r) {
    const double d = delta[r];
    if (d == 0.0) continue;
    const auto row = layer.weights.row(r);
    for (std::size_t c = 0; c < layer.weights.cols; ++c) prev[c] += d * row[c];
  }
  if (k > 0 && net.layers[k - 1].activation == Activation::Relu) {
    for (std::size_t c = 0; c < prev.size(); ++c) {
      if (t.pre[k - 1][c] <= 0.0) prev[c] = 0.0;
    }
  }
  return prev;
}

}  // namespace

Network make_mlp(std::span<const std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("need at least 2 dims");
  Network net;
  Rng rng(seed);
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    Layer layer;
    layer.weights = Matrix(dims[k + 1], dims[k]);
    layer.biases.assign(dims[k + 1], 0.0);
    layer.activation =
        k + 2 == dims.size() ? Activation::Identity : Activation::Relu;
    // He init for hidden layers; a much smaller head so initial logit
    // margins come from training signal instead of init noise.
    double scale = std::sqrt(2.0 / static_cast<double>(dims[k]));
    if (k + 2 == dims.size()) scale *= 0.01;
    for (double& w : layer.weights.data) w = scale * rng.normal();
    net.layers.push_back(std::move(layer));
  }
  return net;
}

std::vector<double> logits(const Network& net, std::span<const double> x) {
  check_input(net, x);
  return forward_trace(net, x).post.back();
}

std::vector<double> forward(const Network& net, std::span<const double> x) {
  return softmax(logits(net, x));
}

std::size_t predict(const Network& net, std::span<const double> x) {
  const auto z = logits(net, x);
  return static_cast<std::size_t>(
      std::max_element(z.begin(), z.end()) - z.begin());
}

double loss(const Network& net, std::span<const double> x, std::size_t y) {
  const auto z = logits(net, x);
  if (y >= z.size()) throw std::invalid_argument("label out of range");
  return log_sum_exp(z) - z[y];
}

std::vector<double> input_gradient(const Network& net,
                                   std::span<const double> x, std::size_t y) {
  check_input(net, x);
  if (y >= net.class_count()) throw std::invalid_argument("label out of range");
  const auto t = forward_trace(net, x);
  auto delta = output_delta(t.post.back(), y);
  for (int k = static_cast<int>(net.layers.size()) - 1; k >= 0; --k)
    delta = propagate_down(net, t, delta, k);
  return delta;
}

std::vector<double> train(Network& net, const Dataset& data,
                          const TrainConfig& cfg) {
  if (data.size() == 0) throw std::invalid_argument("empty dataset");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  for (auto l : data.labels) {
    if (l >= net.class_count())
      throw std::invalid_argument("label out of range for network");
  }

  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);

  // Per-layer gradient accumulators.
  std::vector<Matrix> gw;
  std::vector<std::vector<double>> gb;
  for (const Layer& layer : net.layers) {
    gw.emplace_back(layer.weights.rows, layer.weights.cols);
    gb.emplace_back(layer.biases.size(), 0.0);
  }

  std::vector<double> history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      for (auto& m : gw) std::fill(m.data.begin(), m.data.end(), 0.0);
      for (auto& b : gb) std::fill(b.begin(), b.end(), 0.0);

      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const auto x = data.image(i);
        const std::size_t y = data.labels[i];
        const auto t = forward_trace(net, x);
        epoch_loss += log_sum_exp(t.post.back()) - t.post.back()[y];

        // Walk deltas from the head down, accumulating per-layer grads.
        auto delta = output_delta(t.post.back(), y);
        for (int layer_idx = static_cast<int>(net.layers.size()) - 1;
             layer_idx >= 0; --layer_idx) {
          const auto input = layer_idx == 0
                                 ? x
                                 : std::span<const double>(t.post[layer_idx - 1]);
          Matrix& gwk = gw[layer_idx];
          for (std::size_t r = 0; r < gwk.rows; ++r) {
            const double d = delta[r];
            gb[layer_idx][r] += d;
            if (d == 0.0) continue;
            auto row = gwk.row(r);
            for (std::size_t c = 0; c < gwk.cols; ++c) row[c] += d * input[c];
          }
          if (layer_idx > 0) delta = propagate_down(net, t, delta, layer_idx);
        }
      }

      const double scale =
          cfg.learning_rate / static_cast<double>(end - start);
      for (std::size_t li = 0; li < net.layers.size(); ++li) {
        Layer& layer = net.layers[li];
        for (std::size_t j = 0; j < layer.weights.data.size(); ++j)
          layer.weights.data[j] -= scale * gw[li].data[j];
        for (std::size_t j = 0; j < layer.biases.size(); ++j)
          layer.biases[j] -= scale * gb[li][j];
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("training diverged: non-finite loss at epoch " +
                               std::to_string(epoch));
    history.push_back(epoch_loss);
  }
  return history;
}

EvalReport evaluate(const Network& net, const Dataset& data) {
  EvalReport rep;
  std::vector<std::size_t> correct(data.class_count, 0), total(data.class_count, 0);
  std::size_t ok = 0, poisoned_ok = 0, poisoned_total = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const bool hit = predict(net, data.image(i)) == data.labels[i];
    ok += hit;
    total[data.labels[i]] += 1;
    correct[data.labels[i]] += hit;
    if (data.poisoned_flags[i]) {
      poisoned_total += 1;
      poisoned_ok += hit;
    }
  }
  rep.accuracy = data.size() ? static_cast<double>(ok) / data.size() : 0.0;
  rep.per_class_accuracy.resize(data.class_count);
  for (std::size_t c = 0; c < data.class_count; ++c) {
    rep.per_class_accuracy[c] =
        total[c] ? static_cast<double>(correct[c]) / total[c]
                 : std::numeric_limits<double>::quiet_NaN();
  }
  if (poisoned_total > 0)
    rep.poisoned_accuracy = static_cast<double>(poisoned_ok) / poisoned_total;
  return rep;
}

namespace {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("truncated checkpoint");
  return v;
}

}  // namespace

void save_network(const Network& net, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write("PGNN", 4);
  write_pod<std::uint32_t>(os, 1);  // format version
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(net.layers.size()));
  for (const Layer& layer : net.layers) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(layer.weights.rows));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(layer.weights.cols));
    write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(layer.activation));
    for (double w : layer.weights.data) write_pod(os, w);
    for (double b : layer.biases) write_pod(os, b);
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "PGNN", 4) != 0)
    throw std::runtime_error("not a PGNN checkpoint: " + path.string());
  const auto version = read_pod<std::uint32_t>(is);
  if (version != 1) throw std::runtime_error("unsupported PGNN version");
  const auto n_layers = read_pod<std::uint32_t>(is);
  if (n_layers == 0 || n_layers > 1024)
    throw std::runtime_error("corrupt PGNN layer count");

  Network net;
  std::size_t prev_out = 0;
  for (std::uint32_t k = 0; k < n_layers; ++k) {
    const auto rows = read_pod<std::uint32_t>(is);
    const auto cols = read_pod<std::uint32_t>(is);
    const auto act = read_pod<std::uint8_t>(is);
    if (rows == 0 || cols == 0 || act > 1)
      throw std::runtime_error("corrupt PGNN layer header");
    if (k > 0 && cols != prev_out)
      throw std::runtime_error("PGNN layer dimensions do not chain");
    prev_out = rows;
    Layer layer;
    layer.weights = Matrix(rows, cols);
    layer.activation = static_cast<Activation>(act);
    for (double& w : layer.weights.data) w = read_pod<double>(is);
    layer.biases.resize(rows);
    for (double& b : layer.biases) b = read_pod<double>(is);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

}  // namespace pg
