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

// Federated round loop: client sampling, local training on the client's own
// data, and sample-count-weighted aggregation of whatever layers the round's
// share mask releases. Local heads never leave their client.

#include <cstdint>
#include <string>
#include <vector>

#include "dualfed/data.hpp"
#include "dualfed/model.hpp"
#include "dualfed/random.hpp"
#include "dualfed/sharing.hpp"

namespace dualfed {

enum class Method {
  kFedAvg,        // single head, everything shared
  kDoubleHead,    // base + global head shared, local head private
  kDoubleHeadGs,  // double head with the gradual sharing schedule
  kHeadFreeze,    // single head whose last layer stays on the client
};

std::string to_string(Method m);
Method parse_method(const std::string& name);
bool uses_dual_head(Method m);

struct RoundConfig {
  std::size_t local_epochs = 2;       // E
  std::size_t clients_per_round = 1;  // m
  nn::SgdConfig sgd;
  std::size_t bytes_per_param = 4;
};

struct ServerState {
  std::size_t round = 0;
  ParameterBlock weights;  // base + global head only
  Rng rng;
};

struct ClientState {
  std::size_t k = 0;
  PartitionedModel model;
  LabeledDataset train;
  Rng rng;

  std::size_t n_k() const noexcept { return train.size(); }
};

struct Contribution {
  std::size_t client = 0;
  ParameterBlock block;
  std::size_t samples = 0;
};

/// Per-round metrics. Accuracy fields are filled by the experiment runner on evaluation rounds.
struct RoundReport {
  std::size_t round = 0;
  std::size_t phase = 0;
  std::vector<std::size_t> sampled;
  std::uint64_t bytes_up = 0;
  std::uint64_t bytes_down = 0;
  std::uint64_t cum_bytes = 0;
  bool evaluated = false;
  double acc_global = 0.0;
  double acc_local = 0.0;
  std::vector<double> client_acc_global;
  std::vector<double> client_acc_local;
  double wall_seconds = 0.0;
};

/// Hooks for inspecting every payload that crosses the client/server boundary.
/// Called from the coordinating thread only.
class ProtocolObserver {
 public:
  virtual ~ProtocolObserver() = default;
  virtual void on_download(std::size_t /*round*/, std::size_t /*client*/, const ParameterBlock& /*payload*/) {}
  virtual void on_upload(std::size_t /*round*/, std::size_t /*client*/, const ParameterBlock& /*payload*/) {}
  virtual void on_aggregate(std::size_t /*round*/, const std::vector<Contribution>& /*inputs*/) {}
};

/// m distinct clients, uniform without replacement, ascending.
std::vector<std::size_t> sample_clients(Rng& rng, std::size_t num_clients, std::size_t m);

/// E epochs of minibatch SGD on the two-head loss; shuffles once per epoch.
void local_train(PartitionedModel& model, const LabeledDataset& data, Rng& rng, std::size_t epochs,
                 const nn::SgdConfig& sgd);

/// Overwrites the named shared layers of a client model with `shared`.
void install_shared(PartitionedModel& model, const ParameterBlock& shared);

/// Installs `shared`, trains locally, returns the updated values of exactly the shared layers.
ParameterBlock client_update(ClientState& client, const ParameterBlock& shared, const RoundConfig& config);

/// Elementwise sum over contributions of (n_k / sum n) * w_k in ascending client order.
ParameterBlock aggregate(std::vector<Contribution> contributions);

/// Share mask for round t under `method`. Covers every shareable layer.
ShareMask round_mask(Method method, const PartitionLayout& layout, std::size_t t, const ShareSchedule& schedule);

class Federation {
 public:
  /// `shards[k]` becomes client k's training data.
  Federation(PartitionLayout layout, Method method, RoundConfig config, ShareSchedule schedule,
             std::vector<LabeledDataset> shards, std::uint64_t seed);

  /// One round: sample, download, train, upload, aggregate, sync sampled clients.
  RoundReport run_round();

  void set_observer(ProtocolObserver* observer) noexcept { observer_ = observer; }
  /// Run sampled clients' local training in parallel threads.
  void set_parallel_clients(bool on) noexcept { parallel_clients_ = on; }

  const PartitionLayout& layout() const noexcept { return layout_; }
  Method method() const noexcept { return method_; }
  const RoundConfig& config() const noexcept { return config_; }
  const ShareSchedule& schedule() const noexcept { return schedule_; }
  const ServerState& server() const noexcept { return server_; }
  const std::vector<ClientState>& clients() const noexcept { return clients_; }
  std::vector<ClientState>& clients() noexcept { return clients_; }
  const CommLedger& ledger() const noexcept { return ledger_; }

 private:
  PartitionLayout layout_;
  Method method_;
  RoundConfig config_;
  ShareSchedule schedule_;
  ServerState server_;
  std::vector<ClientState> clients_;
  CommLedger ledger_;
  ProtocolObserver* observer_ = nullptr;
  bool parallel_clients_ = true;
};

/// Layout with the single/dual head shape `method` needs.
PartitionLayout layout_for(Method method, PartitionLayout layout);

}  // namespace dualfed
