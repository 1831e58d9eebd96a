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

// Wires data preparation, the federation and evaluation into one run, and
// writes the run's artifacts.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dualfed/config.hpp"
#include "dualfed/errors.hpp"
#include "dualfed/partition.hpp"
#include "dualfed/protocol.hpp"

namespace dualfed {

inline constexpr int kMetricsSchemaVersion = 1;
inline constexpr const char* kMetricsHeader = "round,phase,acc_global,acc_local,bytes_up,bytes_down,cum_bytes";

struct PreparedData {
  LabeledDataset train;
  LabeledDataset held_out;
  HoldoutSplit holdout;  // indices into the raw dataset
  PartitionPlan plan;    // indices into `train`
  std::vector<LabeledDataset> shards;
  TestAssignment global_test;
  TestAssignment local_test;
};

/// Loads or synthesizes the dataset, holds out the test pool, partitions the
/// rest across clients and builds the test shards of both modes.
PreparedData prepare_data(const ExperimentConfig& config);

struct Evaluation {
  double mean = 0.0;  // unweighted over clients
  std::vector<double> per_client;
};

/// Accuracy of models[k] on the shard assigned to client k.
Evaluation evaluate(const std::vector<const PartitionedModel*>& models, const TestAssignment& tests,
                    const LabeledDataset& held_out);
Evaluation evaluate(const std::vector<ClientState>& clients, const TestAssignment& tests,
                    const LabeledDataset& held_out);

/// Every derived seed a run uses, for the summary.
struct SeedRecord {
  std::uint64_t global = 0;
  std::uint64_t synthetic = 0;
  std::uint64_t holdout = 0;
  std::uint64_t partition = 0;
  std::uint64_t test_shards = 0;
  std::uint64_t server_init = 0;
  std::uint64_t server_sampling = 0;
  std::vector<std::uint64_t> client_training;
  std::vector<std::uint64_t> local_head_init;
};

SeedRecord derive_seeds(const ExperimentConfig& config);

struct ExperimentResult {
  ExperimentConfig config;
  PreparedData data;
  std::vector<RoundReport> reports;  // one per round
  CommLedger ledger{4};
  std::vector<ClientState> clients;  // final client states
  ParameterBlock server_weights;
  SeedRecord seeds;
  double wall_seconds = 0.0;

  /// Reports of evaluated rounds only.
  std::vector<const RoundReport*> evaluated() const;
  const RoundReport& final_report() const;
};

/// A module error raised while running round `round` (0 = before the first round).
class RoundFailure : public Error {
 public:
  RoundFailure(std::size_t round, int exit_code, const std::string& what)
      : Error("round " + std::to_string(round) + ": " + what), round_(round), exit_code_(exit_code) {}
  std::size_t round() const noexcept { return round_; }
  int exit_code() const noexcept { return exit_code_; }

 private:
  std::size_t round_;
  int exit_code_;
};

/// CLI exit code for an exception: 2 config, 3 data, 4 anything else.
int exit_code_for(const std::exception& e);

using ProgressFn = std::function<void(const RoundReport&)>;

/// Runs config.rounds rounds, evaluating on rounds divisible by eval_every and
/// on the last round. Failures surface as RoundFailure.
ExperimentResult run_experiment(const ExperimentConfig& config, ProtocolObserver* observer = nullptr,
                                const ProgressFn& progress = {});

std::string metrics_csv(const ExperimentResult& result);
std::string summary_json(const ExperimentResult& result);
std::string plan_json(const ExperimentResult& result);

/// metrics.csv, ledger.csv, summary.json, plan.json and optional checkpoints under `dir`.
void write_outputs(const ExperimentResult& result, const std::string& dir);

struct RunSummary {
  std::string path;
  std::string method;
  std::string setting;
  std::size_t rounds = 0;
  double final_acc_global = 0.0;
  double final_acc_local = 0.0;
  std::uint64_t cum_bytes = 0;
  double savings = 0.0;  // 1 - cum_bytes / baseline cum_bytes
};

/// Reads the run directories' summary.json and metrics.csv. `baseline` names
/// one of `dirs` (default: the first). Mismatched schemas are a DataError.
std::vector<RunSummary> compare_runs(const std::vector<std::string>& dirs, const std::string& baseline = "");

std::string format_comparison(const std::vector<RunSummary>& rows);

}  // namespace dualfed
