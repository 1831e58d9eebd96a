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

// Experiment configuration: an INI-style file ("[section]" headers, key = value)
// whose every key can also be given on the command line as --<key>. Keys are
// unique across sections.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dualfed/model.hpp"
#include "dualfed/partition.hpp"
#include "dualfed/protocol.hpp"

namespace dualfed {

struct ConfigKey {
  std::string section;
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every recognised key with its section and default.
const std::vector<ConfigKey>& config_keys();

using ConfigValues = std::map<std::string, std::string>;

ConfigValues default_config_values();

/// Reads an INI file into key -> value. Unknown sections or keys are a ConfigError.
ConfigValues read_config_file(const std::string& path);

/// Overlays `overrides` onto `base` (unknown keys rejected).
ConfigValues merge_config(ConfigValues base, const ConfigValues& overrides);

enum class DataSource { kSynthetic, kCsv, kIdx };
enum class Architecture { kMlp, kCnn };

struct ExperimentConfig {
  Method method = Method::kDoubleHead;
  Setting setting = Setting::kIid;
  std::uint64_t seed = 1;
  std::size_t rounds = 200;  // T
  std::size_t eval_every = 5;

  DataSource source = DataSource::kSynthetic;
  std::string path;
  std::string labels_path;
  std::size_t num_classes = 10;
  double test_fraction = 1.0 / 6.0;
  double alpha = 0.5;
  BlobSpec blobs;

  std::size_t clients = 10;           // K
  std::size_t clients_per_round = 0;  // m; 0 means all K
  RoundConfig round;                  // E, SGD, bytes per param

  std::size_t share_frequency = 40;
  bool frozen_phase = true;

  Architecture arch = Architecture::kMlp;
  std::vector<std::size_t> base_hidden{64, 32};
  std::vector<std::size_t> head_hidden;
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;
  std::size_t kernel = 5;
  std::size_t cnn_hidden = 64;

  bool save_checkpoints = false;

  /// Throws ConfigError on any violated constraint.
  void validate() const;
  ConfigValues values() const;
  std::size_t sampled_per_round() const { return clients_per_round == 0 ? clients : clients_per_round; }
  ShareSchedule schedule() const { return {share_frequency, 0, frozen_phase}; }
};

ExperimentConfig parse_config(const ConfigValues& values);

/// Network layout for `config` given the data's sample shape.
PartitionLayout build_layout(const ExperimentConfig& config, const Shape& sample_shape);

}  // namespace dualfed
