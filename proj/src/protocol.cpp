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
#include "dualfed/protocol.hpp"

#include <algorithm>
#include <exception>
#include <numeric>
#include <set>

#include "dualfed/errors.hpp"
#include "dualfed/kernels.hpp"

namespace dualfed {

std::string to_string(Method m) {
  switch (m) {
    case Method::kFedAvg: return "fedavg";
    case Method::kDoubleHead: return "double_head";
    case Method::kDoubleHeadGs: return "double_head_gs";
    case Method::kHeadFreeze: return "head_freeze";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kFedAvg, Method::kDoubleHead, Method::kDoubleHeadGs, Method::kHeadFreeze}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown method '" + name + "' (expected fedavg, double_head, double_head_gs or head_freeze)");
}

bool uses_dual_head(Method m) { return m == Method::kDoubleHead || m == Method::kDoubleHeadGs; }

PartitionLayout layout_for(Method method, PartitionLayout layout) {
  layout.dual = uses_dual_head(method);
  layout.validate();
  return layout;
}

std::vector<std::size_t> sample_clients(Rng& rng, std::size_t num_clients, std::size_t m) {
  if (m == 0 || m > num_clients) {
    throw ConfigError("cannot sample " + std::to_string(m) + " of " + std::to_string(num_clients) + " clients");
  }
  std::vector<std::size_t> ids(num_clients);
  std::iota(ids.begin(), ids.end(), 0);
  if (m < num_clients) {
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(m);
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

void local_train(PartitionedModel& model, const LabeledDataset& data, Rng& rng, std::size_t epochs,
                 const nn::SgdConfig& sgd) {
  if (epochs == 0) return;
  if (data.empty()) throw ConfigError("client has no training data");
  if (sgd.batch_size == 0 || !(sgd.learning_rate > 0.0)) throw ConfigError("SGD needs batch_size >= 1 and lr > 0");
  std::vector<std::size_t> order(data.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += sgd.batch_size) {
      const std::size_t len = std::min(sgd.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, len);
      const auto labels = data.gather_labels(idx);
      const auto step = dual_head_loss_and_grads(model, data.gather(idx), labels);
      apply_grads(model, step.grads, sgd);
    }
  }
}

void install_shared(PartitionedModel& model, const ParameterBlock& shared) {
  for (const auto& e : shared.entries()) {
    if (is_local_layer(e.layer)) throw ProtocolError("local-head layer '" + e.layer + "' may not be shared");
    nn::LayerParams* dst = model.base.find(e.layer);
    if (dst == nullptr) dst = model.global_head.find(e.layer);
    if (dst == nullptr) throw StructuralError("client model has no shared layer '" + e.layer + "'");
    if (dst->weights.shape() != e.params.weights.shape() || dst->bias.shape() != e.params.bias.shape()) {
      throw StructuralError("shared layer '" + e.layer + "' has the wrong shape");
    }
    *dst = e.params;
  }
}

ParameterBlock client_update(ClientState& client, const ParameterBlock& shared, const RoundConfig& config) {
  install_shared(client.model, shared);
  local_train(client.model, client.train, client.rng, config.local_epochs, config.sgd);
  ParameterBlock out;
  for (const auto& e : shared.entries()) {
    const nn::LayerParams* p = client.model.base.find(e.layer);
    if (p == nullptr) p = client.model.global_head.find(e.layer);
    out.add(e.layer, *p);
  }
  return out;
}

ParameterBlock aggregate(std::vector<Contribution> contributions) {
  if (contributions.empty()) throw ProtocolError("aggregation needs at least one contribution");
  std::sort(contributions.begin(), contributions.end(),
            [](const Contribution& a, const Contribution& b) { return a.client < b.client; });
  double total = 0.0;
  for (std::size_t i = 0; i < contributions.size(); ++i) {
    const auto& c = contributions[i];
    if (c.samples == 0) throw ProtocolError("client " + std::to_string(c.client) + " reported zero samples");
    if (i > 0 && contributions[i - 1].client == c.client) {
      throw ProtocolError("client " + std::to_string(c.client) + " contributed twice");
    }
    total += static_cast<double>(c.samples);
  }
  std::vector<double> weights;
  for (const auto& c : contributions) weights.push_back(static_cast<double>(c.samples) / total);

  const ParameterBlock& first = contributions.front().block;
  for (const auto& c : contributions) {
    if (c.block.size() != first.size()) throw StructuralError("contributions carry different layer sets");
    for (std::size_t l = 0; l < first.size(); ++l) {
      const auto& a = first.entries()[l];
      const auto& b = c.block.entries()[l];
      if (a.layer != b.layer || a.params.weights.shape() != b.params.weights.shape() ||
          a.params.bias.shape() != b.params.bias.shape()) {
        throw StructuralError("contribution from client " + std::to_string(c.client) + " does not match layer '" +
                              a.layer + "'");
      }
    }
  }

  ParameterBlock out;
  std::vector<std::span<const double>> inputs(contributions.size());
  for (std::size_t l = 0; l < first.size(); ++l) {
    const auto& proto = first.entries()[l];
    nn::LayerParams merged{Tensor(proto.params.weights.shape()), Tensor(proto.params.bias.shape())};
    for (std::size_t i = 0; i < contributions.size(); ++i) inputs[i] = contributions[i].block.entries()[l].params.weights.values();
    kernels::weighted_sum(inputs, weights, merged.weights.values());
    for (std::size_t i = 0; i < contributions.size(); ++i) inputs[i] = contributions[i].block.entries()[l].params.bias.values();
    kernels::weighted_sum(inputs, weights, merged.bias.values());
    out.add(proto.layer, std::move(merged));
  }
  return out;
}

ShareMask round_mask(Method method, const PartitionLayout& layout, std::size_t t, const ShareSchedule& schedule) {
  const auto shareable = layout.shareable_layers();
  switch (method) {
    case Method::kFedAvg:
    case Method::kDoubleHead:
      return ShareMask::all(shareable);
    case Method::kDoubleHeadGs:
      return get_mask(phase_of_round(t, schedule), shareable);
    case Method::kHeadFreeze: {
      // The last head layer stays on the client.
      return get_mask(shareable.size() - 1, shareable);
    }
  }
  throw ConfigError("unknown method");
}

Federation::Federation(PartitionLayout layout, Method method, RoundConfig config, ShareSchedule schedule,
                       std::vector<LabeledDataset> shards, std::uint64_t seed)
    : layout_(layout_for(method, std::move(layout))),
      method_(method),
      config_(config),
      schedule_(schedule),
      ledger_(config.bytes_per_param) {
  if (shards.empty()) throw ConfigError("a federation needs at least one client");
  if (config_.clients_per_round == 0 || config_.clients_per_round > shards.size()) {
    throw ConfigError("clients per round must lie in [1, " + std::to_string(shards.size()) + "]");
  }
  if (config_.sgd.batch_size == 0 || !(config_.sgd.learning_rate > 0.0)) {
    throw ConfigError("SGD needs batch_size >= 1 and lr > 0");
  }
  if (method_ == Method::kHeadFreeze && layout_.shareable_layers().size() < 2) {
    throw ConfigError("head_freeze needs at least two shareable layers");
  }
  schedule_.num_shareable_layers = layout_.shareable_layers().size();
  if (schedule_.frequency == 0) throw ConfigError("sharing frequency must be at least 1");

  server_.weights = init_server_weights(layout_, seed);
  server_.rng = Rng(derive_seed(seed, SeedStream::kServerSampling));
  for (std::size_t k = 0; k < shards.size(); ++k) {
    if (shards[k].empty()) throw ConfigError("client " + std::to_string(k) + " has no training data");
    clients_.push_back({k, value_init(server_.weights, layout_, seed, k), std::move(shards[k]),
                        Rng(derive_seed(seed, SeedStream::kClientTraining, k))});
  }
}

RoundReport Federation::run_round() {
  const std::size_t t = server_.round + 1;
  const ShareMask mask = round_mask(method_, layout_, t, schedule_);
  const auto sampled = sample_clients(server_.rng, clients_.size(), config_.clients_per_round);
  const ParameterBlock payload = masked_extract(server_.weights, mask);

  if (observer_ != nullptr) {
    for (std::size_t k : sampled) observer_->on_download(t, k, payload);
  }

  std::vector<ParameterBlock> uploads(sampled.size());
  std::vector<std::exception_ptr> errors(sampled.size());
  const auto count = static_cast<std::int64_t>(sampled.size());
#pragma omp parallel for schedule(dynamic, 1) if (parallel_clients_ && count > 1)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      uploads[i] = client_update(clients_[sampled[i]], payload, config_);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<Contribution> contributions;
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    if (observer_ != nullptr) observer_->on_upload(t, sampled[i], uploads[i]);
    contributions.push_back({sampled[i], std::move(uploads[i]), clients_[sampled[i]].n_k()});
  }
  if (observer_ != nullptr) observer_->on_aggregate(t, contributions);
  const ParameterBlock merged = aggregate(std::move(contributions));

  server_.weights = masked_merge(server_.weights, merged, mask);
  for (std::size_t k : sampled) install_shared(clients_[k].model, merged);
  server_.round = t;

  const auto& rec = record_exchange(ledger_, t, mask.flagged_count(), mask, layout_, sampled.size());
  RoundReport report;
  report.round = t;
  report.phase = rec.phase;
  report.sampled = sampled;
  report.bytes_up = rec.bytes_up;
  report.bytes_down = rec.bytes_down;
  report.cum_bytes = ledger_.cumulative_total();
  return report;
}

}  // namespace dualfed
