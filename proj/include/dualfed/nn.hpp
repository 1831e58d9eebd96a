// Copyright 2026 The dualfed Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// Minimal feed-forward engine: dense, conv2d (stride 1, valid), 2x2 max-pool,
// relu, flatten and softmax layers with analytic backprop and plain SGD.
// All tensors carry a leading batch axis; LayerSpec shapes are per sample.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dualfed/random.hpp"
#include "dualfed/tensor.hpp"

namespace dualfed::nn {

enum class LayerKind { kDense, kConv2d, kMaxPool2d, kRelu, kFlatten, kSoftmax };

std::string to_string(LayerKind kind);

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kRelu;
  Shape in_shape;
  Shape out_shape;
  std::size_t kernel = 0;  // conv2d only

  static LayerSpec dense(std::string name, std::size_t in, std::size_t out);
  /// `in` is {channels, height, width}.
  static LayerSpec conv2d(std::string name, const Shape& in, std::size_t out_channels, std::size_t kernel);
  static LayerSpec maxpool2d(std::string name, const Shape& in);
  static LayerSpec relu(std::string name, const Shape& in);
  static LayerSpec flatten(std::string name, const Shape& in);
  static LayerSpec softmax(std::string name, std::size_t classes);

  bool has_params() const noexcept { return kind == LayerKind::kDense || kind == LayerKind::kConv2d; }
  Shape weight_shape() const;
  Shape bias_shape() const;
  std::size_t param_count() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct LayerParams {
  Tensor weights;
  Tensor bias;

  std::size_t size() const noexcept { return weights.size() + bias.size(); }
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct SgdConfig {
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
};

/// Throws ConfigError naming both layers when consecutive shapes disagree.
void validate_chain(std::span<const LayerSpec> specs);

/// Glorot-uniform weights, zero bias. Empty params for parameter-free layers.
LayerParams init_params(const LayerSpec& spec, Rng& rng);

/// One pointer per layer; nullptr for parameter-free layers.
using ParamRefs = std::vector<const LayerParams*>;

struct ForwardPass {
  /// activations[0] is the input, activations[i + 1] the output of layer i.
  std::vector<Tensor> activations;

  const Tensor& output() const { return activations.back(); }
};

struct BackwardPass {
  /// Same length as the layer list; empty LayerParams for parameter-free layers.
  std::vector<LayerParams> grads;
  /// Gradient w.r.t. the network input; empty unless requested.
  Tensor input_grad;
};

ForwardPass forward(std::span<const LayerSpec> specs, const ParamRefs& params, Tensor x);

/// `output_grad` is dLoss/d(output of the last layer).
BackwardPass backward(std::span<const LayerSpec> specs, const ParamRefs& params, const ForwardPass& pass,
                      Tensor output_grad, bool need_input_grad = false);

/// Row-wise softmax over the last axis. A rank-1 tensor is a single row.
Tensor softmax(const Tensor& z);

inline constexpr double kCrossEntropyEps = 1e-12;

/// -ln(p[true_class] + 1e-12).
double cross_entropy(std::span<const double> probabilities, std::size_t true_class);

struct BatchLoss {
  double loss = 0.0;  // mean over the batch
  Tensor grad;        // d(mean loss)/d(probabilities)
};

/// Mean cross-entropy of a [batch, C] probability tensor against integer labels.
BatchLoss cross_entropy_batch(const Tensor& probabilities, std::span<const std::size_t> labels);

/// p' = p - lr * g, elementwise.
void sgd_step(LayerParams& params, const LayerParams& grads, const SgdConfig& config);

/// A network that owns its parameters.
class Network {
 public:
  Network() = default;
  Network(std::vector<LayerSpec> specs, std::vector<LayerParams> params);

  /// Validates the chain and initializes parameters from `rng`.
  static Network initialize(std::vector<LayerSpec> specs, Rng& rng);

  const std::vector<LayerSpec>& specs() const noexcept { return specs_; }
  std::vector<LayerParams>& params() noexcept { return params_; }
  const std::vector<LayerParams>& params() const noexcept { return params_; }
  ParamRefs refs() const;
  std::size_t param_count() const;

  ForwardPass forward(Tensor x) const { return nn::forward(specs_, refs(), std::move(x)); }
  BackwardPass backward(const ForwardPass& pass, Tensor output_grad, bool need_input_grad = false) const {
    return nn::backward(specs_, refs(), pass, std::move(output_grad), need_input_grad);
  }
  void apply(const std::vector<LayerParams>& grads, const SgdConfig& config);

  friend bool operator==(const Network&, const Network&) = default;

 private:
  std::vector<LayerSpec> specs_;
  std::vector<LayerParams> params_;
};

}  // namespace dualfed::nn
