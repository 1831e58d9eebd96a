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
#include "dualfed/experiment.hpp"

#include <chrono>
#include <exception>

#include "dualfed/random.hpp"

namespace dualfed {

PreparedData prepare_data(const ExperimentConfig& config) {
  LabeledDataset raw;
  switch (config.source) {
    case DataSource::kSynthetic: {
      BlobSpec spec = config.blobs;
      spec.classes = config.num_classes;
      raw = make_blobs(spec, config.seed);
      break;
    }
    case DataSource::kCsv:
      raw = load_dataset(config.path, DatasetFormat::kCsv, config.num_classes);
      break;
    case DataSource::kIdx:
      raw = load_dataset(config.path, DatasetFormat::kIdx, config.num_classes, config.labels_path);
      break;
  }
  if (raw.empty()) throw DataError("dataset '" + config.path + "' holds no samples");

  PreparedData d;
  d.holdout = split_holdout(raw, config.test_fraction, config.seed);
  d.train = raw.subset(d.holdout.train);
  d.held_out = raw.subset(d.holdout.test);
  d.plan = make_partition(d.train, config.setting, config.clients, config.seed, config.alpha);
  for (const auto& shard : d.plan.shards) d.shards.push_back(d.train.subset(shard));
  d.global_test = build_tests(d.plan, d.train, d.held_out, TestMode::kGlobal, config.seed);
  d.local_test = build_tests(d.plan, d.train, d.held_out, TestMode::kLocal, config.seed);
  return d;
}

Evaluation evaluate(const std::vector<const PartitionedModel*>& models, const TestAssignment& tests,
                    const LabeledDataset& held_out) {
  if (models.empty()) throw ConfigError("evaluate needs at least one client model");
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (tests.shard_for(k).empty()) {
      throw ConfigError("client " + std::to_string(k) + " has an empty " + to_string(tests.mode) + " test shard");
    }
  }
  Evaluation out;
  out.per_client.assign(models.size(), 0.0);
  std::vector<std::exception_ptr> errors(models.size());
  const auto count = static_cast<std::int64_t>(models.size());
#pragma omp parallel for schedule(dynamic, 1) if (count > 1)
  for (std::int64_t k = 0; k < count; ++k) {
    try {
      const auto& shard = tests.shard_for(k);
      const auto pred = predict(*models[k], held_out.gather(shard));
      std::size_t correct = 0;
      for (std::size_t i = 0; i < shard.size(); ++i) correct += pred[i] == held_out.label(shard[i]) ? 1 : 0;
      out.per_client[k] = static_cast<double>(correct) / static_cast<double>(shard.size());
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  double sum = 0.0;
  for (double a : out.per_client) sum += a;
  out.mean = sum / static_cast<double>(models.size());
  return out;
}

Evaluation evaluate(const std::vector<ClientState>& clients, const TestAssignment& tests,
                    const LabeledDataset& held_out) {
  std::vector<const PartitionedModel*> models;
  for (const auto& c : clients) models.push_back(&c.model);
  return evaluate(models, tests, held_out);
}

SeedRecord derive_seeds(const ExperimentConfig& config) {
  const auto g = config.seed;
  SeedRecord s;
  s.global = g;
  s.synthetic = derive_seed(g, SeedStream::kSynthetic);
  s.holdout = derive_seed(g, SeedStream::kHoldout);
  s.partition = derive_seed(g, SeedStream::kPartition);
  s.test_shards = derive_seed(g, SeedStream::kTestShards);
  s.server_init = derive_seed(g, SeedStream::kServerInit);
  s.server_sampling = derive_seed(g, SeedStream::kServerSampling);
  for (std::size_t k = 0; k < config.clients; ++k) {
    s.client_training.push_back(derive_seed(g, SeedStream::kClientTraining, k));
    s.local_head_init.push_back(derive_seed(g, SeedStream::kLocalHeadInit, k));
  }
  return s;
}

std::vector<const RoundReport*> ExperimentResult::evaluated() const {
  std::vector<const RoundReport*> out;
  for (const auto& r : reports)
    if (r.evaluated) out.push_back(&r);
  return out;
}

const RoundReport& ExperimentResult::final_report() const {
  if (reports.empty()) throw Error("the experiment ran no rounds");
  return reports.back();
}

int exit_code_for(const std::exception& e) {
  if (const auto* rf = dynamic_cast<const RoundFailure*>(&e)) return rf->exit_code();
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const DataError*>(&e) != nullptr) return 3;
  return 4;
}

ExperimentResult run_experiment(const ExperimentConfig& config, ProtocolObserver* observer,
                                const ProgressFn& progress) {
  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();
  ExperimentResult result;
  result.config = config;
  std::size_t round = 0;
  try {
    config.validate();
    result.data = prepare_data(config);
    result.config.num_classes = result.data.train.num_classes();
    const auto& cfg = result.config;
    result.seeds = derive_seeds(cfg);

    RoundConfig rc = cfg.round;
    rc.clients_per_round = cfg.sampled_per_round();
    Federation fed(build_layout(cfg, result.data.train.sample_shape()), cfg.method, rc, cfg.schedule(),
                   result.data.shards, cfg.seed);
    fed.set_observer(observer);

    for (round = 1; round <= cfg.rounds; ++round) {
      const auto t0 = Clock::now();
      RoundReport rep = fed.run_round();
      if (round % cfg.eval_every == 0 || round == cfg.rounds) {
        const auto g = evaluate(fed.clients(), result.data.global_test, result.data.held_out);
        const auto l = evaluate(fed.clients(), result.data.local_test, result.data.held_out);
        rep.evaluated = true;
        rep.acc_global = g.mean;
        rep.acc_local = l.mean;
        rep.client_acc_global = g.per_client;
        rep.client_acc_local = l.per_client;
      }
      rep.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      if (progress) progress(rep);
      result.reports.push_back(std::move(rep));
    }
    result.ledger = fed.ledger();
    result.clients = fed.clients();
    result.server_weights = fed.server().weights;
  } catch (const RoundFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw RoundFailure(round > config.rounds ? config.rounds : round, exit_code_for(e), e.what());
  }
  result.wall_seconds = std::chrono::duration<double>(Clock::now() - started).count();
  return result;
}

}  // namespace dualfed
