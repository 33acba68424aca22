// Copyright 2026 The robo2048 Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "robo2048/rng.hpp"

namespace robo2048::nn {

enum class Activation { ReLU, Identity };

inline const char* activation_tag(Activation a) { return a == Activation::ReLU ? "relu" : "identity"; }

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct Layer {
  Matrix<Scalar> weights;  // out x in
  Vector<Scalar> bias;     // out
  Activation activation = Activation::ReLU;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

/// Fully-connected feed-forward network. Hidden layers use ReLU, the last
/// layer is linear.
template <typename Scalar = float>
struct Network {
  std::vector<Layer<Scalar>> layers;

  Eigen::Index in_dim() const { return layers.front().in_dim(); }
  Eigen::Index out_dim() const { return layers.back().out_dim(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  template <typename Other>
  Network<Other> cast() const {
    Network<Other> out;
    for (const auto& l : layers)
      out.layers.push_back({l.weights.template cast<Other>(), l.bias.template cast<Other>(), l.activation});
    return out;
  }

  friend bool operator==(const Network& a, const Network& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      const auto& x = a.layers[i];
      const auto& y = b.layers[i];
      if (x.activation != y.activation || x.weights.rows() != y.weights.rows() ||
          x.weights.cols() != y.weights.cols() || x.weights != y.weights || x.bias != y.bias)
        return false;
    }
    return true;
  }
};

/// Weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)), drawn layer by layer in
/// row-major order; biases zero.
template <typename Scalar = float>
Network<Scalar> init_network(std::span<const int> sizes, std::uint64_t seed) {
  if (sizes.size() < 2) throw std::invalid_argument("init_network: need at least two layer sizes");
  for (int s : sizes)
    if (s <= 0) throw std::invalid_argument("init_network: layer sizes must be positive");
  Rng rng(seed);
  Network<Scalar> net;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    Layer<Scalar> l;
    const int in = sizes[i];
    const int out = sizes[i + 1];
    const double bound = std::sqrt(6.0 / in);
    l.weights.resize(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) l.weights(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
    l.bias = Vector<Scalar>::Zero(out);
    l.activation = (i + 2 == sizes.size()) ? Activation::Identity : Activation::ReLU;
    net.layers.push_back(std::move(l));
  }
  return net;
}

template <typename Scalar = float>
Network<Scalar> init_network(std::initializer_list<int> sizes, std::uint64_t seed) {
  return init_network<Scalar>(std::span<const int>(sizes.begin(), sizes.size()), seed);
}

/// Per-layer inputs and pre-activations of one batched forward pass.
template <typename Scalar>
struct ForwardCache {
  std::vector<Matrix<Scalar>> inputs;
  std::vector<Matrix<Scalar>> pre;
};

template <typename Scalar>
struct Gradients {
  std::vector<Matrix<Scalar>> weights;
  std::vector<Vector<Scalar>> bias;

  static Gradients zeros_like(const Network<Scalar>& net) {
    Gradients g;
    for (const auto& l : net.layers) {
      g.weights.push_back(Matrix<Scalar>::Zero(l.weights.rows(), l.weights.cols()));
      g.bias.push_back(Vector<Scalar>::Zero(l.bias.size()));
    }
    return g;
  }

  double squared_norm() const {
    double s = 0;
    for (const auto& w : weights) s += static_cast<double>(w.squaredNorm());
    for (const auto& b : bias) s += static_cast<double>(b.squaredNorm());
    return s;
  }

  bool all_zero() const {
    for (const auto& w : weights)
      if (!w.isZero(0)) return false;
    for (const auto& b : bias)
      if (!b.isZero(0)) return false;
    return true;
  }
};

/// Batched forward pass; each column of `input` is one sample.
template <typename Scalar>
Matrix<Scalar> forward(const Network<Scalar>& net, const Matrix<Scalar>& input,
                       ForwardCache<Scalar>* cache = nullptr) {
  if (net.layers.empty()) throw std::invalid_argument("forward: empty network");
  if (input.rows() != net.in_dim())
    throw std::invalid_argument("forward: input has " + std::to_string(input.rows()) +
                                " rows, network expects " + std::to_string(net.in_dim()));
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix<Scalar> x = input;
  for (const auto& l : net.layers) {
    Matrix<Scalar> z = l.weights * x;
    z.colwise() += l.bias;
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->pre.push_back(z);
    }
    if (l.activation == Activation::ReLU) z = z.cwiseMax(Scalar(0));
    x = std::move(z);
  }
  return x;
}

template <typename Scalar>
Vector<Scalar> forward(const Network<Scalar>& net, const Vector<Scalar>& input,
                       ForwardCache<Scalar>* cache = nullptr) {
  return forward(net, Matrix<Scalar>(input), cache).col(0);
}

/// Gradients of sum(output .* output_gradient) with respect to every
/// parameter, summed over the batch held in `cache`.
template <typename Scalar>
Gradients<Scalar> backward(const Network<Scalar>& net, const ForwardCache<Scalar>& cache,
                           const Matrix<Scalar>& output_gradient) {
  const std::size_t n = net.layers.size();
  if (cache.pre.size() != n || cache.inputs.size() != n)
    throw std::invalid_argument("backward: cache does not match network");
  const auto batch = cache.pre.back().cols();
  if (output_gradient.rows() != net.out_dim() || output_gradient.cols() != batch)
    throw std::invalid_argument("backward: output gradient shape mismatch");
  Gradients<Scalar> g;
  g.weights.resize(n);
  g.bias.resize(n);
  Matrix<Scalar> delta = output_gradient;
  for (std::size_t k = n; k-- > 0;) {
    const auto& l = net.layers[k];
    if (l.activation == Activation::ReLU)
      delta = delta.cwiseProduct((cache.pre[k].array() > Scalar(0)).template cast<Scalar>().matrix());
    g.weights[k].noalias() = delta * cache.inputs[k].transpose();
    g.bias[k] = delta.rowwise().sum();
    if (k > 0) {
      Matrix<Scalar> up = l.weights.transpose() * delta;
      delta = std::move(up);
    }
  }
  return g;
}

template <typename Scalar>
Gradients<Scalar> backward(const Network<Scalar>& net, const ForwardCache<Scalar>& cache,
                           const Vector<Scalar>& output_gradient) {
  return backward(net, cache, Matrix<Scalar>(output_gradient));
}

struct SgdOptions {
  double learning_rate = 1e-3;
  double clip_norm = 0.0;  // 0 disables clipping
};

/// w <- w - lr * grad, with the gradient rescaled first if its global norm
/// exceeds clip_norm.
template <typename Scalar>
void sgd_step(Network<Scalar>& net, const Gradients<Scalar>& grads, const SgdOptions& opt) {
  if (grads.weights.size() != net.layers.size() || grads.bias.size() != net.layers.size())
    throw std::invalid_argument("sgd_step: gradient shape mismatch");
  double scale = opt.learning_rate;
  if (opt.clip_norm > 0) {
    const double norm = std::sqrt(grads.squared_norm());
    if (norm > opt.clip_norm) scale *= opt.clip_norm / norm;
  }
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto& l = net.layers[k];
    if (grads.weights[k].rows() != l.weights.rows() || grads.weights[k].cols() != l.weights.cols() ||
        grads.bias[k].size() != l.bias.size())
      throw std::invalid_argument("sgd_step: gradient shape mismatch");
    l.weights -= static_cast<Scalar>(scale) * grads.weights[k];
    l.bias -= static_cast<Scalar>(scale) * grads.bias[k];
  }
}

template <typename Scalar>
void sgd_step(Network<Scalar>& net, const Gradients<Scalar>& grads, double learning_rate) {
  sgd_step(net, grads, SgdOptions{learning_rate, 0.0});
}

/// Frozen copy of a network's parameters (the target network).
template <typename Scalar = float>
struct ParameterSnapshot {
  Network<Scalar> network;
};

template <typename Scalar>
ParameterSnapshot<Scalar> snapshot(const Network<Scalar>& net) {
  return ParameterSnapshot<Scalar>{net};
}

template <typename Scalar>
Network<Scalar> restore_target(const ParameterSnapshot<Scalar>& snap) {
  return snap.network;
}

/// Column-wise softmax.
template <typename Scalar>
Matrix<Scalar> softmax(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const Scalar m = logits.col(c).maxCoeff();
    auto e = (logits.col(c).array() - m).exp();
    out.col(c) = e / e.sum();
  }
  return out;
}

// Checkpoint text format:
//   NNV1
//   <layer count>
//   per layer: "<out> <in>", activation tag, <out> weight rows, one bias line.

inline constexpr const char* kCheckpointMagic = "NNV1";

template <typename Scalar>
void write_checkpoint(std::ostream& os, const Network<Scalar>& net) {
  os << kCheckpointMagic << '\n' << net.layers.size() << '\n';
  os << std::setprecision(std::numeric_limits<Scalar>::max_digits10);
  for (const auto& l : net.layers) {
    os << l.weights.rows() << ' ' << l.weights.cols() << '\n' << activation_tag(l.activation) << '\n';
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
        if (c) os << ' ';
        os << l.weights(r, c);
      }
      os << '\n';
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      if (r) os << ' ';
      os << l.bias(r);
    }
    os << '\n';
  }
}

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// from_chars instead of operator>> so subnormal values parse instead of failing.
template <typename Scalar>
bool read_scalar(std::istream& is, Scalar& out) {
  std::string tok;
  if (!(is >> tok)) return false;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

}  // namespace detail

template <typename Scalar = float>
Network<Scalar> read_checkpoint(std::istream& is) {
  std::string magic;
  if (!(is >> magic)) throw CheckpointError("checkpoint: empty file");
  if (magic != kCheckpointMagic)
    throw CheckpointError("checkpoint: unsupported version '" + magic + "', expected NNV1");
  long count = 0;
  if (!(is >> count) || count <= 0 || count > 1024) throw CheckpointError("checkpoint: bad layer count");
  Network<Scalar> net;
  for (long k = 0; k < count; ++k) {
    long out = 0, in = 0;
    std::string tag;
    if (!(is >> out >> in >> tag) || out <= 0 || in <= 0)
      throw CheckpointError("checkpoint: bad header for layer " + std::to_string(k));
    Layer<Scalar> l;
    if (tag == "relu") l.activation = Activation::ReLU;
    else if (tag == "identity") l.activation = Activation::Identity;
    else throw CheckpointError("checkpoint: unknown activation '" + tag + "'");
    if (!net.layers.empty() && net.layers.back().out_dim() != in)
      throw CheckpointError("checkpoint: layer dimensions do not chain");
    l.weights.resize(out, in);
    l.bias.resize(out);
    for (long r = 0; r < out; ++r)
      for (long c = 0; c < in; ++c)
        if (!detail::read_scalar(is, l.weights(r, c))) throw CheckpointError("checkpoint: truncated weights");
    for (long r = 0; r < out; ++r)
      if (!detail::read_scalar(is, l.bias(r))) throw CheckpointError("checkpoint: truncated biases");
    net.layers.push_back(std::move(l));
  }
  if (!net.all_finite()) throw CheckpointError("checkpoint: non-finite parameter");
  return net;
}

template <typename Scalar>
void save(const Network<Scalar>& net, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_checkpoint(os, net);
  if (!os) throw std::runtime_error("write failed: " + path);
}

template <typename Scalar = float>
Network<Scalar> load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_checkpoint<Scalar>(is);
}

}  // namespace robo2048::nn
