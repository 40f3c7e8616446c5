#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "cals/matrix.hpp"

namespace cals {

enum class Activation { relu, identity };

struct Layer {
  Matrix weights;               // [out x in]
  std::vector<double> biases;   // [out]
  Activation activation = Activation::identity;
};

// Dense feed-forward classifier emitting raw logits. The final layer always
// has identity activation and num_classes outputs.
struct Network {
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layers.front().weights.cols(); }
  std::size_t num_classes() const { return layers.back().weights.rows(); }
  std::size_t parameter_count() const;
};

// Hidden layers use ReLU. Weights drawn uniformly from [-a, a] with
// a = sqrt(6 / (in + out)), biases zero, all from the given seed.
Network make_network(std::size_t input_dim, const std::vector<std::size_t>& hidden_widths,
                     std::size_t num_classes, std::uint64_t seed);

// Raw classifier outputs, one row per sample.
struct LogitBatch {
  Matrix values;  // [batch x K]
};

// Softmax outputs; every row is on the probability simplex.
struct ProbBatch {
  Matrix values;  // [batch x K]
};

// Intermediate activations retained for backward.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre_activations;  // one per layer
  std::vector<Matrix> activations;      // post-activation, one per layer
};

LogitBatch forward(const Network& net, const Matrix& inputs, ForwardCache* cache = nullptr);

// Row-wise softmax with max-subtraction.
ProbBatch softmax(const LogitBatch& logits);

struct Gradients {
  std::vector<Matrix> weights;              // same shapes as the layers
  std::vector<std::vector<double>> biases;
};

Gradients zero_gradients(const Network& net);

// Reverse-mode gradients of sum_{i,k} logit_grads(i,k) * logits(i,k) with
// respect to every parameter. The cache must come from a forward call on the
// same network and inputs; a shape mismatch throws std::invalid_argument.
Gradients backward(const Network& net, const ForwardCache& cache, const Matrix& logit_grads);

// Central differences (loss(p+eps) - loss(p-eps)) / (2 eps) per parameter.
// Test oracle; deliberately independent of backward().
Gradients finite_difference_gradients(const Network& net,
                                      const std::function<double(const Network&)>& loss,
                                      double epsilon);

// velocity <- momentum * velocity + gradient; theta <- theta - step * velocity.
void sgd_step(Network& net, const Gradients& gradients, double step_size, double momentum,
              Gradients& velocity);

// Lossless text checkpoint: shapes plus row-major parameters.
void save_network(const Network& net, std::ostream& out);
Network load_network(std::istream& in);

}  // namespace cals
