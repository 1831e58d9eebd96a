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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dualfed/experiment.hpp"
#include "json.hpp"

namespace dualfed {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json accuracy_block(const std::vector<const RoundReport*>& evaluated, bool global) {
  Json j;
  const RoundReport* best = nullptr;
  for (const auto* r : evaluated) {
    const double a = global ? r->acc_global : r->acc_local;
    if (best == nullptr || a > (global ? best->acc_global : best->acc_local)) best = r;
  }
  const RoundReport* last = evaluated.empty() ? nullptr : evaluated.back();
  if (last != nullptr) {
    j["final"] = global ? last->acc_global : last->acc_local;
    j["best"] = global ? best->acc_global : best->acc_local;
    j["best_round"] = best->round;
    j["final_per_client"] = global ? last->client_acc_global : last->client_acc_local;
  }
  return j;
}

Json index_lists(const std::vector<std::vector<std::size_t>>& lists) {
  Json j = Json::array();
  for (const auto& l : lists) j.push_back(l);
  return j;
}

}  // namespace

std::string metrics_csv(const ExperimentResult& result) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto* r : result.evaluated()) {
    out += std::to_string(r->round) + "," + std::to_string(r->phase) + "," + fixed6(r->acc_global) + "," +
           fixed6(r->acc_local) + "," + std::to_string(r->bytes_up) + "," + std::to_string(r->bytes_down) + "," +
           std::to_string(r->cum_bytes) + "\n";
  }
  return out;
}

std::string summary_json(const ExperimentResult& result) {
  Json j;
  j["schema_version"] = kMetricsSchemaVersion;
  Json cfg;
  for (const auto& [k, v] : result.config.values()) cfg[k] = v;
  j["config"] = cfg;
  const auto& s = result.seeds;
  j["seeds"] = {{"global", s.global},
                {"synthetic", s.synthetic},
                {"holdout", s.holdout},
                {"partition", s.partition},
                {"test_shards", s.test_shards},
                {"server_init", s.server_init},
                {"server_sampling", s.server_sampling},
                {"client_training", s.client_training},
                {"local_head_init", s.local_head_init}};
  const auto evaluated = result.evaluated();
  j["rounds"] = result.reports.size();
  j["accuracy_global"] = accuracy_block(evaluated, true);
  j["accuracy_local"] = accuracy_block(evaluated, false);
  j["bytes"] = {{"up", result.ledger.cumulative_up()},
                {"down", result.ledger.cumulative_down()},
                {"total", result.ledger.cumulative_total()},
                {"bytes_per_param", result.ledger.bytes_per_param()}};
  std::vector<std::size_t> train_sizes;
  for (const auto& shard : result.data.plan.shards) train_sizes.push_back(shard.size());
  j["client_train_samples"] = train_sizes;
  return j.dump(2) + "\n";
}

std::string plan_json(const ExperimentResult& result) {
  const auto& d = result.data;
  Json j;
  j["setting"] = to_string(d.plan.setting);
  j["clients"] = d.plan.clients;
  j["alpha"] = d.plan.alpha;
  j["holdout_train"] = d.holdout.train;
  j["holdout_test"] = d.holdout.test;
  std::vector<std::vector<std::size_t>> raw_shards;
  for (const auto& shard : d.plan.shards) {
    std::vector<std::size_t> raw;
    for (std::size_t i : shard) raw.push_back(d.holdout.train[i]);
    raw_shards.push_back(std::move(raw));
  }
  j["train_shards"] = index_lists(raw_shards);
  auto tests = [&](const TestAssignment& a) {
    std::vector<std::vector<std::size_t>> raw_tests;
    for (const auto& shard : a.shards) {
      std::vector<std::size_t> raw;
      for (std::size_t i : shard) raw.push_back(d.holdout.test[i]);
      raw_tests.push_back(std::move(raw));
    }
    return Json{{"shards", index_lists(raw_tests)}, {"shard_of_client", a.shard_of_client}};
  };
  j["global_test"] = tests(d.global_test);
  j["local_test"] = tests(d.local_test);
  return j.dump() + "\n";
}

void write_outputs(const ExperimentResult& result, const std::string& dir) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
  write_file(root / "metrics.csv", metrics_csv(result));
  std::ostringstream ledger;
  result.ledger.write_csv(ledger);
  write_file(root / "ledger.csv", ledger.str());
  write_file(root / "summary.json", summary_json(result));
  write_file(root / "plan.json", plan_json(result));
  if (result.config.save_checkpoints) {
    fs::create_directories(root / "checkpoints", ec);
    if (ec) throw DataError("cannot create checkpoint directory: " + ec.message());
    for (const auto& c : result.clients) {
      write_checkpoint((root / "checkpoints" / ("client_" + std::to_string(c.k) + ".bin")).string(), c.model);
    }
  }
}

std::vector<RunSummary> compare_runs(const std::vector<std::string>& dirs, const std::string& baseline) {
  if (dirs.empty()) throw ConfigError("compare needs at least one run directory");
  std::vector<RunSummary> rows;
  for (const auto& dir : dirs) {
    const fs::path summary_path = fs::path(dir) / "summary.json";
    const fs::path metrics_path = fs::path(dir) / "metrics.csv";
    Json summary;
    try {
      summary = Json::parse(read_file(summary_path));
    } catch (const Json::exception& e) {
      throw DataError("malformed '" + summary_path.string() + "': " + e.what());
    }
    const int version = summary.value("schema_version", 0);
    if (version != kMetricsSchemaVersion) {
      throw DataError("schema version mismatch: '" + summary_path.string() + "' has version " +
                      std::to_string(version) + ", expected " + std::to_string(kMetricsSchemaVersion));
    }
    std::istringstream metrics(read_file(metrics_path));
    std::string header;
    std::getline(metrics, header);
    if (header != kMetricsHeader) {
      throw DataError("schema mismatch: '" + metrics_path.string() + "' header is '" + header + "'");
    }
    std::string line;
    std::string last;
    while (std::getline(metrics, line))
      if (!line.empty()) last = line;
    if (last.empty()) throw DataError("'" + metrics_path.string() + "' has no rows");

    RunSummary row;
    row.path = dir;
    try {
      row.method = summary.at("config").at("method").get<std::string>();
      row.setting = summary.at("config").at("setting").get<std::string>();
      std::vector<std::string> cells;
      std::istringstream cs(last);
      for (std::string cell; std::getline(cs, cell, ',');) cells.push_back(cell);
      if (cells.size() != 7) throw DataError("bad row");
      row.rounds = std::stoull(cells[0]);
      row.final_acc_global = std::stod(cells[2]);
      row.final_acc_local = std::stod(cells[3]);
      row.cum_bytes = std::stoull(cells[6]);
    } catch (const std::exception& e) {
      throw DataError("malformed run '" + dir + "': " + e.what());
    }
    rows.push_back(row);
  }

  std::size_t base = 0;
  if (!baseline.empty()) {
    base = rows.size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (fs::path(rows[i].path).lexically_normal() == fs::path(baseline).lexically_normal()) base = i;
    }
    if (base == rows.size()) throw ConfigError("baseline '" + baseline + "' is not among the compared runs");
  }
  const auto ref = static_cast<double>(rows[base].cum_bytes);
  for (auto& r : rows) r.savings = ref > 0.0 ? 1.0 - static_cast<double>(r.cum_bytes) / ref : 0.0;
  return rows;
}

std::string format_comparison(const std::vector<RunSummary>& rows) {
  std::string out = "run,method,setting,rounds,acc_global,acc_local,cum_bytes,savings\n";
  for (const auto& r : rows) {
    out += r.path + "," + r.method + "," + r.setting + "," + std::to_string(r.rounds) + "," +
           fixed6(r.final_acc_global) + "," + fixed6(r.final_acc_local) + "," + std::to_string(r.cum_bytes) + "," +
           fixed6(r.savings) + "\n";
  }
  return out;
}

}  // namespace dualfed
