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
#include "dualfed/nn.hpp"

#include <cmath>

#include "dualfed/errors.hpp"
#include "dualfed/kernels.hpp"

namespace dualfed::nn {
namespace {

Shape batched(std::size_t batch, const Shape& per_sample) {
  Shape s{batch};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

kernels::DenseDims dense_dims(const LayerSpec& s, std::size_t batch) {
  return {batch, s.in_shape[0], s.out_shape[0]};
}

kernels::ConvDims conv_dims(const LayerSpec& s, std::size_t batch) {
  return {batch, s.in_shape[0], s.out_shape[0], s.in_shape[1], s.in_shape[2], s.kernel};
}

kernels::PoolDims pool_dims(const LayerSpec& s, std::size_t batch) {
  return {batch, s.in_shape[0], s.in_shape[1], s.in_shape[2]};
}

void require_params(const LayerSpec& spec, const LayerParams* p) {
  if (spec.has_params() && (p == nullptr || p->weights.shape() != spec.weight_shape() ||
                            p->bias.shape() != spec.bias_shape())) {
    throw StructuralError("parameters for layer '" + spec.name + "' missing or misshapen");
  }
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kMaxPool2d: return "maxpool2d";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "unknown";
}

LayerSpec LayerSpec::dense(std::string name, std::size_t in, std::size_t out) {
  if (in == 0 || out == 0) throw ConfigError("dense layer '" + name + "' needs positive sizes");
  return {std::move(name), LayerKind::kDense, {in}, {out}, 0};
}

LayerSpec LayerSpec::conv2d(std::string name, const Shape& in, std::size_t out_channels, std::size_t kernel) {
  if (in.size() != 3 || kernel == 0 || out_channels == 0 || in[1] < kernel || in[2] < kernel) {
    throw ConfigError("conv2d layer '" + name + "' cannot take input " + shape_to_string(in) +
                      " with kernel " + std::to_string(kernel));
  }
  return {std::move(name), LayerKind::kConv2d, in, {out_channels, in[1] - kernel + 1, in[2] - kernel + 1}, kernel};
}

LayerSpec LayerSpec::maxpool2d(std::string name, const Shape& in) {
  if (in.size() != 3 || in[1] < 2 || in[2] < 2) {
    throw ConfigError("maxpool2d layer '" + name + "' cannot take input " + shape_to_string(in));
  }
  return {std::move(name), LayerKind::kMaxPool2d, in, {in[0], in[1] / 2, in[2] / 2}, 0};
}

LayerSpec LayerSpec::relu(std::string name, const Shape& in) {
  return {std::move(name), LayerKind::kRelu, in, in, 0};
}

LayerSpec LayerSpec::flatten(std::string name, const Shape& in) {
  return {std::move(name), LayerKind::kFlatten, in, {shape_size(in)}, 0};
}

LayerSpec LayerSpec::softmax(std::string name, std::size_t classes) {
  if (classes == 0) throw ConfigError("softmax layer '" + name + "' needs at least one class");
  return {std::move(name), LayerKind::kSoftmax, {classes}, {classes}, 0};
}

Shape LayerSpec::weight_shape() const {
  switch (kind) {
    case LayerKind::kDense: return {in_shape[0], out_shape[0]};
    case LayerKind::kConv2d: return {out_shape[0], in_shape[0], kernel, kernel};
    default: return {};
  }
}

Shape LayerSpec::bias_shape() const {
  if (!has_params()) return {};
  return {out_shape[0]};
}

std::size_t LayerSpec::param_count() const {
  if (!has_params()) return 0;
  return shape_size(weight_shape()) + shape_size(bias_shape());
}

void validate_chain(std::span<const LayerSpec> specs) {
  for (std::size_t i = 1; i < specs.size(); ++i) {
    if (specs[i - 1].out_shape != specs[i].in_shape) {
      throw ConfigError("layer '" + specs[i - 1].name + "' produces " + shape_to_string(specs[i - 1].out_shape) +
                        " but layer '" + specs[i].name + "' expects " + shape_to_string(specs[i].in_shape));
    }
  }
}

LayerParams init_params(const LayerSpec& spec, Rng& rng) {
  if (!spec.has_params()) return {};
  std::size_t fan_in = 0, fan_out = 0;
  if (spec.kind == LayerKind::kDense) {
    fan_in = spec.in_shape[0];
    fan_out = spec.out_shape[0];
  } else {
    fan_in = spec.in_shape[0] * spec.kernel * spec.kernel;
    fan_out = spec.out_shape[0] * spec.kernel * spec.kernel;
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  LayerParams p{Tensor(spec.weight_shape()), Tensor(spec.bias_shape())};
  for (double& w : p.weights.values()) w = dist(rng);
  return p;
}

ForwardPass forward(std::span<const LayerSpec> specs, const ParamRefs& params, Tensor x) {
  if (specs.empty()) throw ConfigError("forward over an empty network");
  if (params.size() != specs.size()) throw StructuralError("parameter list does not match layer list");
  validate_chain(specs);
  if (x.rank() != specs[0].in_shape.size() + 1 || batched(x.dim(0), specs[0].in_shape) != x.shape()) {
    throw ConfigError("input " + shape_to_string(x.shape()) + " does not match layer '" + specs[0].name +
                      "' input " + shape_to_string(specs[0].in_shape));
  }
  const std::size_t batch = x.dim(0);

  ForwardPass pass;
  pass.activations.reserve(specs.size() + 1);
  pass.activations.push_back(std::move(x));
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    const LayerParams* p = params[i];
    require_params(s, p);
    const Tensor& in = pass.activations.back();
    Tensor out(batched(batch, s.out_shape));
    switch (s.kind) {
      case LayerKind::kDense:
        kernels::dense_forward(dense_dims(s, batch), in.values(), p->weights.values(), p->bias.values(), out.values());
        break;
      case LayerKind::kConv2d:
        kernels::conv2d_forward(conv_dims(s, batch), in.values(), p->weights.values(), p->bias.values(), out.values());
        break;
      case LayerKind::kMaxPool2d:
        kernels::maxpool2d_forward(pool_dims(s, batch), in.values(), out.values());
        break;
      case LayerKind::kRelu:
        kernels::relu_forward(in.values(), out.values());
        break;
      case LayerKind::kFlatten:
        out = Tensor(batched(batch, s.out_shape), std::vector<double>(in.values().begin(), in.values().end()));
        break;
      case LayerKind::kSoftmax:
        kernels::softmax_rows(batch, s.out_shape[0], in.values(), out.values());
        break;
    }
    pass.activations.push_back(std::move(out));
  }
  return pass;
}

BackwardPass backward(std::span<const LayerSpec> specs, const ParamRefs& params, const ForwardPass& pass,
                      Tensor output_grad, bool need_input_grad) {
  if (pass.activations.size() != specs.size() + 1 || params.size() != specs.size()) {
    throw StructuralError("activations were not produced by this network");
  }
  if (output_grad.shape() != pass.output().shape()) {
    throw StructuralError("output gradient " + shape_to_string(output_grad.shape()) + " does not match output " +
                          shape_to_string(pass.output().shape()));
  }
  const std::size_t batch = pass.activations[0].dim(0);

  BackwardPass result;
  result.grads.resize(specs.size());
  Tensor grad = std::move(output_grad);
  for (std::size_t li = specs.size(); li-- > 0;) {
    const LayerSpec& s = specs[li];
    const LayerParams* p = params[li];
    const Tensor& in = pass.activations[li];
    const Tensor& out = pass.activations[li + 1];
    if (in.shape() != batched(batch, s.in_shape)) {
      throw StructuralError("activation for layer '" + s.name + "' has the wrong shape");
    }
    const bool want_dx = li > 0 || need_input_grad;
    Tensor dx;
    if (want_dx) dx = Tensor(in.shape());

    switch (s.kind) {
      case LayerKind::kDense: {
        require_params(s, p);
        LayerParams g{Tensor(s.weight_shape()), Tensor(s.bias_shape())};
        const auto d = dense_dims(s, batch);
        kernels::dense_backward_params(d, in.values(), grad.values(), g.weights.values(), g.bias.values());
        if (want_dx) kernels::dense_backward_input(d, grad.values(), p->weights.values(), dx.values());
        result.grads[li] = std::move(g);
        break;
      }
      case LayerKind::kConv2d: {
        require_params(s, p);
        LayerParams g{Tensor(s.weight_shape()), Tensor(s.bias_shape())};
        const auto d = conv_dims(s, batch);
        kernels::conv2d_backward_params(d, in.values(), grad.values(), g.weights.values(), g.bias.values());
        if (want_dx) kernels::conv2d_backward_input(d, grad.values(), p->weights.values(), dx.values());
        result.grads[li] = std::move(g);
        break;
      }
      case LayerKind::kMaxPool2d:
        if (want_dx) kernels::maxpool2d_backward(pool_dims(s, batch), in.values(), grad.values(), dx.values());
        break;
      case LayerKind::kRelu:
        if (want_dx) kernels::relu_backward(in.values(), grad.values(), dx.values());
        break;
      case LayerKind::kFlatten:
        if (want_dx) {
          grad.reshape(in.shape());
          dx = std::move(grad);
        }
        break;
      case LayerKind::kSoftmax:
        if (want_dx) {
          // dz = p * (dp - <dp, p>)
          const std::size_t c = s.out_shape[0];
          for (std::size_t n = 0; n < batch; ++n) {
            const double* pr = out.data() + n * c;
            const double* gr = grad.data() + n * c;
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += gr[j] * pr[j];
            for (std::size_t j = 0; j < c; ++j) dx[n * c + j] = pr[j] * (gr[j] - dot);
          }
        }
        break;
    }
    grad = std::move(dx);
  }
  if (need_input_grad) result.input_grad = std::move(grad);
  return result;
}

Tensor softmax(const Tensor& z) {
  if (z.empty() || z.rank() == 0) throw DomainError("softmax of an empty vector");
  const std::size_t cols = z.shape().back();
  if (cols == 0) throw DomainError("softmax of an empty vector");
  if (!z.all_finite()) throw DomainError("softmax input is not finite");
  Tensor p(z.shape());
  kernels::softmax_rows(z.size() / cols, cols, z.values(), p.values());
  return p;
}

double cross_entropy(std::span<const double> probabilities, std::size_t true_class) {
  if (true_class >= probabilities.size()) {
    throw DomainError("class index " + std::to_string(true_class) + " out of range for " +
                      std::to_string(probabilities.size()) + " classes");
  }
  return -std::log(probabilities[true_class] + kCrossEntropyEps);
}

BatchLoss cross_entropy_batch(const Tensor& probabilities, std::span<const std::size_t> labels) {
  if (probabilities.rank() != 2) throw DomainError("cross-entropy expects [batch, classes] probabilities");
  const std::size_t batch = probabilities.dim(0), classes = probabilities.dim(1);
  if (batch == 0) throw DomainError("cross-entropy over an empty batch");
  if (labels.size() != batch) throw DomainError("label count does not match batch size");
  BatchLoss out{0.0, Tensor(probabilities.shape())};
  const double scale = static_cast<double>(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    const auto row = probabilities.values().subspan(n * classes, classes);
    out.loss += cross_entropy(row, labels[n]);
    out.grad[n * classes + labels[n]] = -1.0 / (scale * (row[labels[n]] + kCrossEntropyEps));
  }
  out.loss /= scale;
  return out;
}

void sgd_step(LayerParams& params, const LayerParams& grads, const SgdConfig& config) {
  if (params.weights.shape() != grads.weights.shape() || params.bias.shape() != grads.bias.shape()) {
    throw StructuralError("gradient shapes do not match parameter shapes");
  }
  kernels::sgd_update(config.learning_rate, grads.weights.values(), params.weights.values());
  kernels::sgd_update(config.learning_rate, grads.bias.values(), params.bias.values());
}

Network::Network(std::vector<LayerSpec> specs, std::vector<LayerParams> params)
    : specs_(std::move(specs)), params_(std::move(params)) {
  validate_chain(specs_);
  if (params_.size() != specs_.size()) throw StructuralError("parameter list does not match layer list");
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].has_params()) require_params(specs_[i], &params_[i]);
  }
}

Network Network::initialize(std::vector<LayerSpec> specs, Rng& rng) {
  validate_chain(specs);
  std::vector<LayerParams> params;
  params.reserve(specs.size());
  for (const auto& s : specs) params.push_back(init_params(s, rng));
  return Network(std::move(specs), std::move(params));
}

ParamRefs Network::refs() const {
  ParamRefs r(specs_.size(), nullptr);
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].has_params()) r[i] = &params_[i];
  }
  return r;
}

std::size_t Network::param_count() const {
  std::size_t total = 0;
  for (const auto& s : specs_) total += s.param_count();
  return total;
}

void Network::apply(const std::vector<LayerParams>& grads, const SgdConfig& config) {
  if (grads.size() != specs_.size()) throw StructuralError("gradient list does not match layer list");
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].has_params()) sgd_step(params_[i], grads[i], config);
  }
}

}  // namespace dualfed::nn
