#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "poisonguard/dataset.hpp"
#include "poisonguard/matrix.hpp"

namespace pg {

enum class Activation : std::uint8_t { Relu = 0, Identity = 1 };

struct Layer {
  Matrix weights;  // out x in
  std::vector<double> biases;
  Activation activation = Activation::Relu;
};

// Feedforward classifier. The final layer is the logit head; forward()
// applies softmax on top.
struct Network {
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layers.front().weights.cols; }
  std::size_t class_count() const { return layers.back().weights.rows; }
};

// MLP with He-style fan-in scaled init, ReLU hidden layers, identity head.
// dims = {input, hidden..., classes}.
Network make_mlp(std::span<const std::size_t> dims, std::uint64_t seed);

std::vector<double> logits(const Network& net, std::span<const double> x);
// Class probability vector (softmax of logits).
std::vector<double> forward(const Network& net, std::span<const double> x);
std::size_t predict(const Network& net, std::span<const double> x);

// Softmax cross-entropy against label y.
double loss(const Network& net, std::span<const double> x, std::size_t y);

// Exact gradient of the softmax cross-entropy loss E_y with respect to the
// input pixels. y is an explicitly supplied label, not the dataset label.
std::vector<double> input_gradient(const Network& net,
                                   std::span<const double> x, std::size_t y);

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 1;
  int batch_size = 32;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

// Plain minibatch SGD, single-threaded and deterministic given the seed.
// Returns the mean loss per epoch. Throws if the loss goes non-finite.
std::vector<double> train(Network& net, const Dataset& data,
                          const TrainConfig& cfg);

struct EvalReport {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // NaN for empty classes
  // Absent (not 0) when the dataset has no flagged samples.
  std::optional<double> poisoned_accuracy;
};

EvalReport evaluate(const Network& net, const Dataset& data);

// Versioned binary checkpoint ("PGNN").
void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace pg
