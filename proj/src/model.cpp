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
#include "dualfed/model.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "dualfed/errors.hpp"

namespace dualfed {
namespace {

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

nn::ParamRefs refs_for(const std::vector<nn::LayerSpec>& specs, const ParameterBlock& block, std::string_view prefix) {
  nn::ParamRefs refs(specs.size(), nullptr);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!specs[i].has_params()) continue;
    const std::string name = std::string(prefix) + specs[i].name;
    refs[i] = block.find(name);
    if (refs[i] == nullptr) throw StructuralError("model is missing layer '" + name + "'");
  }
  return refs;
}

ParameterBlock pack_grads(const std::vector<nn::LayerSpec>& specs, std::vector<nn::LayerParams>& grads,
                          std::string_view prefix) {
  ParameterBlock block;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].has_params()) block.add(std::string(prefix) + specs[i].name, std::move(grads[i]));
  }
  return block;
}

ParameterBlock zero_grads(const std::vector<nn::LayerSpec>& specs, std::string_view prefix) {
  ParameterBlock block;
  for (const auto& s : specs) {
    if (s.has_params()) {
      block.add(std::string(prefix) + s.name, {Tensor(s.weight_shape()), Tensor(s.bias_shape())});
    }
  }
  return block;
}

void sgd_block(ParameterBlock& params, const ParameterBlock& grads, const nn::SgdConfig& config) {
  if (params.size() != grads.size()) throw StructuralError("gradient block does not match parameter block");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params.entries()[i];
    const auto& g = grads.entries()[i];
    if (p.layer != g.layer) throw StructuralError("gradient for '" + g.layer + "' applied to '" + p.layer + "'");
    nn::sgd_step(p.params, g.params, config);
  }
}

void check_entry_shape(const PartitionLayout& layout, const BlockEntry& e) {
  const auto& spec = layout.spec_of(e.layer);
  if (e.params.weights.shape() != spec.weight_shape() || e.params.bias.shape() != spec.bias_shape()) {
    throw StructuralError("layer '" + e.layer + "' has shape " + shape_to_string(e.params.weights.shape()) +
                          " but the layout expects " + shape_to_string(spec.weight_shape()));
  }
}

}  // namespace

ParameterBlock::ParameterBlock(std::vector<BlockEntry> entries) {
  entries_.reserve(entries.size());
  for (auto& e : entries) add(std::move(e.layer), std::move(e.params));
}

void ParameterBlock::add(std::string layer, nn::LayerParams params) {
  if (contains(layer)) throw StructuralError("duplicate layer name '" + layer + "'");
  entries_.push_back({std::move(layer), std::move(params)});
}

bool ParameterBlock::contains(std::string_view layer) const { return find(layer) != nullptr; }

const nn::LayerParams* ParameterBlock::find(std::string_view layer) const {
  for (const auto& e : entries_)
    if (e.layer == layer) return &e.params;
  return nullptr;
}

nn::LayerParams* ParameterBlock::find(std::string_view layer) {
  for (auto& e : entries_)
    if (e.layer == layer) return &e.params;
  return nullptr;
}

const nn::LayerParams& ParameterBlock::at(std::string_view layer) const {
  const auto* p = find(layer);
  if (p == nullptr) throw StructuralError("no layer '" + std::string(layer) + "' in block");
  return *p;
}

std::vector<std::string> ParameterBlock::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.layer);
  return out;
}

std::size_t ParameterBlock::param_count() const {
  std::size_t total = 0;
  for (const auto& e : entries_) total += e.params.size();
  return total;
}

std::string global_name(std::string_view head_layer) { return std::string(kGlobalPrefix) + std::string(head_layer); }
std::string local_name(std::string_view head_layer) { return std::string(kLocalPrefix) + std::string(head_layer); }
bool is_local_layer(std::string_view layer) { return layer.starts_with(kLocalPrefix); }

void PartitionLayout::validate() const {
  if (base.empty() || head.empty()) throw ConfigError("layout needs a non-empty base and head");
  if (num_classes < 2) throw ConfigError("layout needs at least two classes");
  std::set<std::string> seen;
  for (const auto* part : {&base, &head}) {
    for (const auto& s : *part) {
      if (!seen.insert(s.name).second) throw ConfigError("layer name '" + s.name + "' used twice in layout");
      if (s.name.find('/') != std::string::npos) throw ConfigError("layer name '" + s.name + "' contains '/'");
    }
  }
  nn::validate_chain(base);
  nn::validate_chain(head);
  if (base.back().out_shape != head.front().in_shape) {
    throw ConfigError("layer '" + base.back().name + "' produces " + shape_to_string(base.back().out_shape) +
                      " but layer '" + head.front().name + "' expects " + shape_to_string(head.front().in_shape));
  }
  if (head.back().kind != nn::LayerKind::kSoftmax || head.back().out_shape != Shape{num_classes}) {
    throw ConfigError("head must end in a softmax over " + std::to_string(num_classes) + " classes");
  }
  if (head_layers().empty()) throw ConfigError("head has no parameterized layer");
}

std::vector<std::string> PartitionLayout::base_layers() const {
  std::vector<std::string> out;
  for (const auto& s : base)
    if (s.has_params()) out.push_back(s.name);
  return out;
}

std::vector<std::string> PartitionLayout::head_layers() const {
  std::vector<std::string> out;
  for (const auto& s : head)
    if (s.has_params()) out.push_back(s.name);
  return out;
}

std::vector<std::string> PartitionLayout::global_layers() const {
  auto out = head_layers();
  for (auto& n : out) n = global_name(n);
  return out;
}

std::vector<std::string> PartitionLayout::local_layers() const {
  if (!dual) return {};
  auto out = head_layers();
  for (auto& n : out) n = local_name(n);
  return out;
}

std::vector<std::string> PartitionLayout::canonical_order() const {
  auto out = shareable_layers();
  for (auto& n : local_layers()) out.push_back(std::move(n));
  return out;
}

std::vector<std::string> PartitionLayout::shareable_layers() const {
  auto out = base_layers();
  for (auto& n : global_layers()) out.push_back(std::move(n));
  return out;
}

const nn::LayerSpec& PartitionLayout::spec_of(std::string_view layer) const {
  std::string_view head_name;
  if (layer.starts_with(kGlobalPrefix)) {
    head_name = layer.substr(kGlobalPrefix.size());
  } else if (dual && layer.starts_with(kLocalPrefix)) {
    head_name = layer.substr(kLocalPrefix.size());
  } else {
    for (const auto& s : base)
      if (s.has_params() && s.name == layer) return s;
    throw StructuralError("layout has no layer '" + std::string(layer) + "'");
  }
  for (const auto& s : head)
    if (s.has_params() && s.name == head_name) return s;
  throw StructuralError("layout has no layer '" + std::string(layer) + "'");
}

PartitionLayout mlp_layout(std::size_t input_dim, const std::vector<std::size_t>& base_hidden,
                           const std::vector<std::size_t>& head_hidden, std::size_t num_classes, bool dual) {
  if (base_hidden.empty()) throw ConfigError("mlp base needs at least one hidden layer");
  PartitionLayout layout;
  layout.num_classes = num_classes;
  layout.dual = dual;
  std::size_t width = input_dim, fc = 1, act = 1;
  for (std::size_t h : base_hidden) {
    layout.base.push_back(nn::LayerSpec::dense("fc" + std::to_string(fc++), width, h));
    layout.base.push_back(nn::LayerSpec::relu("relu" + std::to_string(act++), {h}));
    width = h;
  }
  for (std::size_t h : head_hidden) {
    layout.head.push_back(nn::LayerSpec::dense("fc" + std::to_string(fc++), width, h));
    layout.head.push_back(nn::LayerSpec::relu("relu" + std::to_string(act++), {h}));
    width = h;
  }
  layout.head.push_back(nn::LayerSpec::dense("fc" + std::to_string(fc), width, num_classes));
  layout.head.push_back(nn::LayerSpec::softmax("softmax", num_classes));
  layout.validate();
  return layout;
}

PartitionLayout cnn_layout(const Shape& input, std::size_t conv1_channels, std::size_t conv2_channels,
                           std::size_t kernel, std::size_t head_hidden, std::size_t num_classes, bool dual) {
  PartitionLayout layout;
  layout.num_classes = num_classes;
  layout.dual = dual;
  auto& b = layout.base;
  b.push_back(nn::LayerSpec::conv2d("conv1", input, conv1_channels, kernel));
  b.push_back(nn::LayerSpec::relu("relu1", b.back().out_shape));
  b.push_back(nn::LayerSpec::maxpool2d("pool1", b.back().out_shape));
  b.push_back(nn::LayerSpec::conv2d("conv2", b.back().out_shape, conv2_channels, kernel));
  b.push_back(nn::LayerSpec::relu("relu2", b.back().out_shape));
  b.push_back(nn::LayerSpec::maxpool2d("pool2", b.back().out_shape));
  b.push_back(nn::LayerSpec::flatten("flatten", b.back().out_shape));
  const std::size_t features = b.back().out_shape[0];
  layout.head.push_back(nn::LayerSpec::dense("fc1", features, head_hidden));
  layout.head.push_back(nn::LayerSpec::relu("relu3", {head_hidden}));
  layout.head.push_back(nn::LayerSpec::dense("fc2", head_hidden, num_classes));
  layout.head.push_back(nn::LayerSpec::softmax("softmax", num_classes));
  layout.validate();
  return layout;
}

void PartitionedModel::check() const {
  const auto flat = flatten_model(*this);
  auto expected = layout.canonical_order();
  if (flat.names() != expected) {
    throw StructuralError("model blocks [" + join(flat.names()) + "] do not match layout [" + join(expected) + "]");
  }
  for (const auto& e : flat.entries()) check_entry_shape(layout, e);
}

std::size_t PartitionedModel::param_count() const {
  return base.param_count() + global_head.param_count() + local_head.param_count();
}

SplitBlocks split(const ParameterBlock& flat, const PartitionLayout& layout) {
  const auto base_names = layout.base_layers();
  const auto global_names = layout.global_layers();
  const auto local_names = layout.local_layers();

  std::vector<std::string> missing, extra;
  std::set<std::string> known;
  for (const auto* group : {&base_names, &global_names, &local_names}) known.insert(group->begin(), group->end());
  for (const auto& e : flat.entries())
    if (!known.contains(e.layer)) extra.push_back(e.layer);
  for (const auto* group : {&base_names, &global_names})
    for (const auto& n : *group)
      if (!flat.contains(n)) missing.push_back(n);
  // The local head is either wholly present (client weights) or wholly absent (server weights).
  const bool any_local = std::any_of(local_names.begin(), local_names.end(),
                                     [&](const std::string& n) { return flat.contains(n); });
  if (any_local)
    for (const auto& n : local_names)
      if (!flat.contains(n)) missing.push_back(n);
  if (!missing.empty() || !extra.empty()) {
    throw StructuralError("block does not match layout; missing [" + join(missing) + "], unexpected [" +
                          join(extra) + "]");
  }

  SplitBlocks out;
  auto take = [&](const std::vector<std::string>& names, ParameterBlock& dst) {
    for (const auto& n : names) {
      const auto* p = flat.find(n);
      if (p == nullptr) continue;
      BlockEntry e{n, *p};
      check_entry_shape(layout, e);
      dst.add(std::move(e.layer), std::move(e.params));
    }
  };
  take(base_names, out.base);
  take(global_names, out.global_head);
  take(local_names, out.local_head);
  return out;
}

ParameterBlock concat(const PartitionLayout& layout,
                      std::initializer_list<std::reference_wrapper<const ParameterBlock>> blocks) {
  const auto order = layout.canonical_order();
  std::unordered_map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < order.size(); ++i) rank.emplace(order[i], i);

  std::vector<const BlockEntry*> all;
  std::set<std::string> seen;
  for (const ParameterBlock& b : blocks) {
    for (const auto& e : b.entries()) {
      if (!rank.contains(e.layer)) throw StructuralError("layout has no layer '" + e.layer + "'");
      if (!seen.insert(e.layer).second) throw StructuralError("duplicate layer name '" + e.layer + "' in concat");
      all.push_back(&e);
    }
  }
  std::sort(all.begin(), all.end(), [&](const BlockEntry* a, const BlockEntry* b) {
    return rank.at(a->layer) < rank.at(b->layer);
  });
  ParameterBlock out;
  for (const auto* e : all) out.add(e->layer, e->params);
  return out;
}

ParameterBlock flatten_model(const PartitionedModel& model) {
  return concat(model.layout, {model.base, model.global_head, model.local_head});
}

HeadOutputs head_outputs(const PartitionedModel& model, const Tensor& x) {
  const auto& layout = model.layout;
  auto base_pass = nn::forward(layout.base, refs_for(layout.base, model.base, ""), x);
  const Tensor& features = base_pass.output();
  HeadOutputs out;
  auto g = nn::forward(layout.head, refs_for(layout.head, model.global_head, kGlobalPrefix), features);
  out.global = std::move(g.activations.back());
  if (layout.dual) {
    auto l = nn::forward(layout.head, refs_for(layout.head, model.local_head, kLocalPrefix), features);
    out.local = std::move(l.activations.back());
  }
  return out;
}

std::size_t combine_heads(std::span<const double> f_global, std::span<const double> f_local) {
  if (f_global.empty()) throw DomainError("cannot predict from an empty distribution");
  if (!f_local.empty() && f_local.size() != f_global.size()) {
    throw DomainError("global and local heads disagree on the class count");
  }
  const std::size_t classes = f_global.size();
  std::size_t best = 0;
  double best_value = f_global[0];
  for (std::size_t i = 1; i < classes + f_local.size(); ++i) {
    const double v = i < classes ? f_global[i] : f_local[i - classes];
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  return best % classes;
}

std::vector<std::size_t> predict(const PartitionedModel& model, const Tensor& x) {
  const auto heads = head_outputs(model, x);
  const std::size_t batch = heads.global.dim(0), classes = model.layout.num_classes;
  std::vector<std::size_t> out(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    const auto g = heads.global.values().subspan(n * classes, classes);
    const auto l = model.layout.dual ? heads.local.values().subspan(n * classes, classes) : std::span<const double>{};
    out[n] = combine_heads(g, l);
  }
  return out;
}

LossAndGrads dual_head_loss_and_grads(const PartitionedModel& model, const Tensor& x,
                                      std::span<const std::size_t> labels, LossTerms terms) {
  if (x.rank() == 0 || x.dim(0) == 0) throw DomainError("loss over an empty batch");
  if (labels.size() != x.dim(0)) throw DomainError("label count does not match batch size");
  const auto& layout = model.layout;
  const bool use_global = terms != LossTerms::kLocalOnly;
  const bool use_local = layout.dual && terms != LossTerms::kGlobalOnly;

  const auto base_refs = refs_for(layout.base, model.base, "");
  const auto base_pass = nn::forward(layout.base, base_refs, x);
  const Tensor& features = base_pass.output();

  LossAndGrads out;
  Tensor feature_grad;
  auto run_head = [&](const ParameterBlock& head, std::string_view prefix) {
    const auto refs = refs_for(layout.head, head, prefix);
    auto pass = nn::forward(layout.head, refs, features);
    auto ce = nn::cross_entropy_batch(pass.output(), labels);
    out.loss += ce.loss;
    auto back = nn::backward(layout.head, refs, pass, std::move(ce.grad), true);
    if (feature_grad.empty()) {
      feature_grad = std::move(back.input_grad);
    } else {
      auto dst = feature_grad.values();
      const auto src = back.input_grad.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
    return pack_grads(layout.head, back.grads, prefix);
  };

  out.grads.global_head = use_global ? run_head(model.global_head, kGlobalPrefix) : zero_grads(layout.head, kGlobalPrefix);
  if (layout.dual) {
    out.grads.local_head = use_local ? run_head(model.local_head, kLocalPrefix) : zero_grads(layout.head, kLocalPrefix);
  }
  if (feature_grad.empty()) {
    out.grads.base = zero_grads(layout.base, "");
  } else {
    auto back = nn::backward(layout.base, base_refs, base_pass, std::move(feature_grad), false);
    out.grads.base = pack_grads(layout.base, back.grads, "");
  }
  return out;
}

void apply_grads(PartitionedModel& model, const ModelGrads& grads, const nn::SgdConfig& config) {
  sgd_block(model.base, grads.base, config);
  sgd_block(model.global_head, grads.global_head, config);
  sgd_block(model.local_head, grads.local_head, config);
}

ParameterBlock init_server_weights(const PartitionLayout& layout, std::uint64_t global_seed) {
  layout.validate();
  Rng rng(derive_seed(global_seed, SeedStream::kServerInit));
  ParameterBlock w0;
  for (const auto& s : layout.base)
    if (s.has_params()) w0.add(s.name, nn::init_params(s, rng));
  for (const auto& s : layout.head)
    if (s.has_params()) w0.add(global_name(s.name), nn::init_params(s, rng));
  return w0;
}

PartitionedModel value_init(const ParameterBlock& server_w0, const PartitionLayout& layout,
                            std::uint64_t global_seed, std::size_t client) {
  auto parts = split(server_w0, layout);
  if (!parts.local_head.empty()) throw ProtocolError("server weights must not carry a local head");
  PartitionedModel model{std::move(parts.base), std::move(parts.global_head), {}, layout};
  if (layout.dual) {
    Rng rng(derive_seed(global_seed, SeedStream::kLocalHeadInit, client));
    for (const auto& s : layout.head)
      if (s.has_params()) model.local_head.add(local_name(s.name), nn::init_params(s, rng));
  }
  model.check();
  return model;
}

}  // namespace dualfed
