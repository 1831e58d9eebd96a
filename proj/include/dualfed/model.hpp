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

// Two-headed client models. The network is a shared base followed by a head
// that exists twice: a global copy that takes part in aggregation and a local
// copy that never leaves the client. Single-head layouts (dual == false) are
// used by the fedavg and head_freeze baselines.

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dualfed/nn.hpp"

namespace dualfed {

struct BlockEntry {
  std::string layer;
  nn::LayerParams params;

  friend bool operator==(const BlockEntry&, const BlockEntry&) = default;
};

/// Named, ordered parameter set. The unit of sharing, masking and aggregation.
class ParameterBlock {
 public:
  ParameterBlock() = default;
  explicit ParameterBlock(std::vector<BlockEntry> entries);

  /// Throws StructuralError on a duplicate layer name.
  void add(std::string layer, nn::LayerParams params);

  const std::vector<BlockEntry>& entries() const noexcept { return entries_; }
  std::vector<BlockEntry>& entries() noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  bool contains(std::string_view layer) const;
  const nn::LayerParams* find(std::string_view layer) const;
  nn::LayerParams* find(std::string_view layer);
  const nn::LayerParams& at(std::string_view layer) const;
  std::vector<std::string> names() const;
  std::size_t param_count() const;

  friend bool operator==(const ParameterBlock&, const ParameterBlock&) = default;

 private:
  std::vector<BlockEntry> entries_;
};

inline constexpr std::string_view kGlobalPrefix = "global/";
inline constexpr std::string_view kLocalPrefix = "local/";

std::string global_name(std::string_view head_layer);
std::string local_name(std::string_view head_layer);
bool is_local_layer(std::string_view layer);

struct PartitionLayout {
  std::vector<nn::LayerSpec> base;
  /// Head template; ends in softmax over num_classes. Instantiated as global/ and local/ copies.
  std::vector<nn::LayerSpec> head;
  std::size_t num_classes = 0;
  bool dual = true;

  /// Throws ConfigError unless the layout is well formed.
  void validate() const;

  std::vector<std::string> base_layers() const;
  std::vector<std::string> head_layers() const;
  std::vector<std::string> global_layers() const;
  std::vector<std::string> local_layers() const;
  /// base, then global head, then local head (when dual).
  std::vector<std::string> canonical_order() const;
  /// Layers eligible for sharing, shallow to deep: base then global head.
  std::vector<std::string> shareable_layers() const;
  const nn::LayerSpec& spec_of(std::string_view layer) const;
  const Shape& input_shape() const { return base.front().in_shape; }

  friend bool operator==(const PartitionLayout&, const PartitionLayout&) = default;
};

/// fc(hidden...) + relu base, head of optional hidden fc layers then fc(C) + softmax.
PartitionLayout mlp_layout(std::size_t input_dim, const std::vector<std::size_t>& base_hidden,
                           const std::vector<std::size_t>& head_hidden, std::size_t num_classes, bool dual);

/// Two conv(k)+relu+pool stages and a flatten in the base, fc-relu-fc-softmax heads.
PartitionLayout cnn_layout(const Shape& input, std::size_t conv1_channels, std::size_t conv2_channels,
                           std::size_t kernel, std::size_t head_hidden, std::size_t num_classes, bool dual);

struct PartitionedModel {
  ParameterBlock base;
  ParameterBlock global_head;
  ParameterBlock local_head;
  PartitionLayout layout;

  /// Throws StructuralError if the blocks do not cover the layout exactly.
  void check() const;
  std::size_t param_count() const;

  friend bool operator==(const PartitionedModel&, const PartitionedModel&) = default;
};

struct SplitBlocks {
  ParameterBlock base;
  ParameterBlock global_head;
  ParameterBlock local_head;
};

/// Splits a flat block into base/global/local. The local part may be absent entirely.
SplitBlocks split(const ParameterBlock& flat, const PartitionLayout& layout);

/// Joins blocks in canonical network order whatever the argument order.
ParameterBlock concat(const PartitionLayout& layout,
                      std::initializer_list<std::reference_wrapper<const ParameterBlock>> blocks);

ParameterBlock flatten_model(const PartitionedModel& model);

struct HeadOutputs {
  Tensor global;  // f_g, [batch, C]
  Tensor local;   // f_l, [batch, C]; empty for single-head models
};

HeadOutputs head_outputs(const PartitionedModel& model, const Tensor& x);

/// argmax over f_g ++ f_l (2C entries), mapped back to a class by index mod C.
/// The first occurrence wins ties. An empty f_l reduces to argmax f_g.
std::size_t combine_heads(std::span<const double> f_global, std::span<const double> f_local);

std::vector<std::size_t> predict(const PartitionedModel& model, const Tensor& x);

enum class LossTerms { kBoth, kGlobalOnly, kLocalOnly };

struct ModelGrads {
  ParameterBlock base;
  ParameterBlock global_head;
  ParameterBlock local_head;
};

struct LossAndGrads {
  double loss = 0.0;
  ModelGrads grads;
};

/// Mean over samples of CE(f_g, y) + CE(f_l, y). Base gradients collect both terms.
LossAndGrads dual_head_loss_and_grads(const PartitionedModel& model, const Tensor& x,
                                      std::span<const std::size_t> labels, LossTerms terms = LossTerms::kBoth);

void apply_grads(PartitionedModel& model, const ModelGrads& grads, const nn::SgdConfig& config);

/// Initial server weights w0 = base ++ global head.
ParameterBlock init_server_weights(const PartitionLayout& layout, std::uint64_t global_seed);

/// Client initialization: base and global head copied from w0, local head drawn
/// from a client-specific seed derived from (global_seed, client).
PartitionedModel value_init(const ParameterBlock& server_w0, const PartitionLayout& layout,
                            std::uint64_t global_seed, std::size_t client);

// Checkpoints: little-endian records of
//   u32 name length, name bytes, u32 rank, u64 dims[rank], f64 data[prod(dims)]
// one per tensor ("<layer>.weight", "<layer>.bias"), plus a JSON sidecar at
// "<path>.json" describing the layout.
void write_checkpoint(const std::string& path, const PartitionedModel& model);
PartitionedModel read_checkpoint(const std::string& path);

}  // namespace dualfed
