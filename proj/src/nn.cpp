#include "cals/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

namespace cals {

namespace {

void apply_activation(Matrix& m, Activation act) {
  if (act == Activation::identity) return;
  for (double& v : m.data()) v = std::max(0.0, v);
}

// out[batch x rows(W)] = in[batch x cols(W)] * W^T + b
Matrix affine(const Matrix& in, const Layer& layer) {
  const std::size_t batch = in.rows();
  const std::size_t out_dim = layer.weights.rows();
  const std::size_t in_dim = layer.weights.cols();
  Matrix out(batch, out_dim);
  for (std::size_t i = 0; i < batch; ++i) {
    const double* x = in.row(i);
    double* y = out.row(i);
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* w = layer.weights.row(o);
      double acc = layer.biases[o];
      for (std::size_t d = 0; d < in_dim; ++d) acc += w[d] * x[d];
      y[o] = acc;
    }
  }
  return out;
}

}  // namespace

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& layer : layers) {
    n += layer.weights.rows() * layer.weights.cols() + layer.biases.size();
  }
  return n;
}

Network make_network(std::size_t input_dim, const std::vector<std::size_t>& hidden_widths,
                     std::size_t num_classes, std::uint64_t seed) {
  if (input_dim == 0 || num_classes == 0) {
    throw std::invalid_argument("make_network: zero input_dim or num_classes");
  }
  std::vector<std::size_t> widths;
  widths.push_back(input_dim);
  for (std::size_t w : hidden_widths) {
    if (w == 0) throw std::invalid_argument("make_network: zero hidden width");
    widths.push_back(w);
  }
  widths.push_back(num_classes);

  std::mt19937_64 rng(seed);
  Network net;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l];
    const std::size_t out = widths[l + 1];
    Layer layer;
    layer.weights = Matrix(out, in);
    layer.biases.assign(out, 0.0);
    layer.activation =
        (l + 2 == widths.size()) ? Activation::identity : Activation::relu;
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (double& w : layer.weights.data()) w = dist(rng);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

LogitBatch forward(const Network& net, const Matrix& inputs, ForwardCache* cache) {
  if (net.layers.empty()) throw std::invalid_argument("forward: empty network");
  if (inputs.cols() != net.input_dim()) {
    throw std::invalid_argument("forward: input width " + std::to_string(inputs.cols()) +
                                " does not match network input_dim " +
                                std::to_string(net.input_dim()));
  }
  if (cache) {
    cache->input = inputs;
    cache->pre_activations.clear();
    cache->activations.clear();
  }
  Matrix current = inputs;
  for (const Layer& layer : net.layers) {
    Matrix pre = affine(current, layer);
    Matrix post = pre;
    apply_activation(post, layer.activation);
    if (cache) {
      cache->pre_activations.push_back(pre);
      cache->activations.push_back(post);
    }
    current = std::move(post);
  }
  return LogitBatch{std::move(current)};
}

ProbBatch softmax(const LogitBatch& logits) {
  const Matrix& l = logits.values;
  Matrix probs(l.rows(), l.cols());
  for (std::size_t i = 0; i < l.rows(); ++i) {
    const double* row = l.row(i);
    double* out = probs.row(i);
    double max_logit = row[0];
    for (std::size_t k = 1; k < l.cols(); ++k) max_logit = std::max(max_logit, row[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < l.cols(); ++k) {
      out[k] = std::exp(row[k] - max_logit);
      sum += out[k];
    }
    for (std::size_t k = 0; k < l.cols(); ++k) out[k] /= sum;
  }
  return ProbBatch{std::move(probs)};
}

Gradients zero_gradients(const Network& net) {
  Gradients g;
  for (const Layer& layer : net.layers) {
    g.weights.emplace_back(layer.weights.rows(), layer.weights.cols());
    g.biases.emplace_back(layer.biases.size(), 0.0);
  }
  return g;
}

Gradients backward(const Network& net, const ForwardCache& cache, const Matrix& logit_grads) {
  const std::size_t num_layers = net.layers.size();
  if (cache.pre_activations.size() != num_layers || cache.activations.size() != num_layers) {
    throw std::invalid_argument("backward: cache does not match network layer count");
  }
  const Matrix& last = cache.activations.back();
  if (!logit_grads.same_shape(last) || cache.input.rows() != logit_grads.rows()) {
    throw std::invalid_argument("backward: logit gradient shape does not match cache");
  }
  for (std::size_t l = 0; l < num_layers; ++l) {
    if (cache.pre_activations[l].cols() != net.layers[l].weights.rows() ||
        cache.input.cols() != net.input_dim()) {
      throw std::invalid_argument("backward: cache shapes do not match network");
    }
  }

  Gradients grads = zero_gradients(net);
  const std::size_t batch = logit_grads.rows();
  Matrix delta = logit_grads;  // gradient wrt this layer's post-activation output

  for (std::size_t l = num_layers; l-- > 0;) {
    const Layer& layer = net.layers[l];
    const Matrix& pre = cache.pre_activations[l];
    // Through the activation.
    if (layer.activation == Activation::relu) {
      for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t o = 0; o < delta.cols(); ++o) {
          if (pre(i, o) <= 0.0) delta(i, o) = 0.0;
        }
      }
    }
    const Matrix& input = (l == 0) ? cache.input : cache.activations[l - 1];
    Matrix& wg = grads.weights[l];
    std::vector<double>& bg = grads.biases[l];
    for (std::size_t i = 0; i < batch; ++i) {
      const double* x = input.row(i);
      const double* d = delta.row(i);
      for (std::size_t o = 0; o < layer.weights.rows(); ++o) {
        double* wrow = wg.row(o);
        for (std::size_t c = 0; c < layer.weights.cols(); ++c) wrow[c] += d[o] * x[c];
        bg[o] += d[o];
      }
    }
    if (l > 0) {
      Matrix prev(batch, layer.weights.cols());
      for (std::size_t i = 0; i < batch; ++i) {
        const double* d = delta.row(i);
        double* p = prev.row(i);
        for (std::size_t c = 0; c < layer.weights.cols(); ++c) {
          double acc = 0.0;
          for (std::size_t o = 0; o < layer.weights.rows(); ++o) {
            acc += d[o] * layer.weights(o, c);
          }
          p[c] = acc;
        }
      }
      delta = std::move(prev);
    }
  }
  return grads;
}

Gradients finite_difference_gradients(const Network& net,
                                      const std::function<double(const Network&)>& loss,
                                      double epsilon) {
  Network probe = net;
  Gradients grads = zero_gradients(net);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (std::size_t idx = 0; idx < probe.layers[l].weights.data().size(); ++idx) {
      double& p = probe.layers[l].weights.data()[idx];
      const double saved = p;
      p = saved + epsilon;
      const double up = loss(probe);
      p = saved - epsilon;
      const double down = loss(probe);
      p = saved;
      grads.weights[l].data()[idx] = (up - down) / (2.0 * epsilon);
    }
    for (std::size_t idx = 0; idx < probe.layers[l].biases.size(); ++idx) {
      double& p = probe.layers[l].biases[idx];
      const double saved = p;
      p = saved + epsilon;
      const double up = loss(probe);
      p = saved - epsilon;
      const double down = loss(probe);
      p = saved;
      grads.biases[l][idx] = (up - down) / (2.0 * epsilon);
    }
  }
  return grads;
}

void sgd_step(Network& net, const Gradients& gradients, double step_size, double momentum,
              Gradients& velocity) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& w = net.layers[l].weights.data();
    const auto& wg = gradients.weights[l].data();
    auto& wv = velocity.weights[l].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      wv[i] = momentum * wv[i] + wg[i];
      w[i] -= step_size * wv[i];
    }
    auto& b = net.layers[l].biases;
    const auto& bg = gradients.biases[l];
    auto& bv = velocity.biases[l];
    for (std::size_t i = 0; i < b.size(); ++i) {
      bv[i] = momentum * bv[i] + bg[i];
      b[i] -= step_size * bv[i];
    }
  }
}

void save_network(const Network& net, std::ostream& out) {
  out << "cals-net 1\n" << net.layers.size() << "\n";
  char buf[64];
  for (const Layer& layer : net.layers) {
    out << layer.weights.rows() << " " << layer.weights.cols() << " "
        << (layer.activation == Activation::relu ? "relu" : "identity") << "\n";
    for (std::size_t o = 0; o < layer.weights.rows(); ++o) {
      const double* row = layer.weights.row(o);
      for (std::size_t c = 0; c < layer.weights.cols(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
        out << buf << (c + 1 == layer.weights.cols() ? "" : " ");
      }
      out << "\n";
    }
    for (std::size_t o = 0; o < layer.biases.size(); ++o) {
      std::snprintf(buf, sizeof(buf), "%.17g", layer.biases[o]);
      out << buf << (o + 1 == layer.biases.size() ? "" : " ");
    }
    out << "\n";
  }
}

Network load_network(std::istream& in) {
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "cals-net" || version != 1) {
    throw std::runtime_error("load_network: not a version-1 checkpoint");
  }
  std::size_t num_layers = 0;
  in >> num_layers;
  Network net;
  for (std::size_t l = 0; l < num_layers; ++l) {
    std::size_t rows = 0, cols = 0;
    std::string act;
    in >> rows >> cols >> act;
    Layer layer;
    layer.weights = Matrix(rows, cols);
    layer.biases.assign(rows, 0.0);
    if (act == "relu") {
      layer.activation = Activation::relu;
    } else if (act == "identity") {
      layer.activation = Activation::identity;
    } else {
      throw std::runtime_error("load_network: unknown activation '" + act + "'");
    }
    for (double& v : layer.weights.data()) in >> v;
    for (double& v : layer.biases) in >> v;
    net.layers.push_back(std::move(layer));
  }
  if (!in) throw std::runtime_error("load_network: truncated checkpoint");
  return net;
}

}  // namespace cals
