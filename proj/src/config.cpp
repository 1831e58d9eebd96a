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
#include "dualfed/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>

#include "dualfed/errors.hpp"

namespace dualfed {
namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string fmt_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

const ConfigKey* find_key(const std::string& key) {
  for (const auto& k : config_keys())
    if (k.key == key) return &k;
  return nullptr;
}

class ValueReader {
 public:
  explicit ValueReader(const ConfigValues& values) : values_(values) {}

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
  }

  std::uint64_t u64(const std::string& key) const {
    const auto& s = str(key);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) bad(key, "a non-negative integer");
    return v;
  }

  std::size_t size(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

  double real(const std::string& key) const {
    const auto& s = str(key);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) bad(key, "a number");
    return v;
  }

  bool flag(const std::string& key) const {
    const auto& s = str(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    bad(key, "true or false");
  }

  std::vector<std::size_t> list(const std::string& key) const {
    const auto& s = str(key);
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
      std::size_t comma = s.find(',', pos);
      if (comma == std::string::npos) comma = s.size();
      std::size_t v = 0;
      auto [p, ec] = std::from_chars(s.data() + pos, s.data() + comma, v);
      if (ec != std::errc() || p != s.data() + comma || v == 0) bad(key, "a comma-separated list of positive integers");
      out.push_back(v);
      pos = comma + 1;
    }
    return out;
  }

  [[noreturn]] void bad(const std::string& key, const std::string& expected) const {
    throw ConfigError("config key '" + key + "' = '" + str(key) + "' is not " + expected);
  }

 private:
  const ConfigValues& values_;
};

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"experiment", "method", "double_head", "fedavg | double_head | double_head_gs | head_freeze"},
      {"experiment", "setting", "iid", "iid | noniid | dispatch"},
      {"experiment", "seed", "1", "global seed; every other seed is derived from it"},
      {"experiment", "rounds", "200", "federated rounds T"},
      {"experiment", "eval_every", "5", "evaluate every this many rounds (and at the last round)"},
      {"data", "source", "synthetic", "synthetic | csv | idx"},
      {"data", "path", "", "dataset file (csv rows or IDX images)"},
      {"data", "labels_path", "", "IDX label file"},
      {"data", "num_classes", "10", "class count C (0 infers it from the file)"},
      {"data", "test_fraction", "0.16666666666666666", "share of the raw data held out for testing"},
      {"data", "alpha", "0.5", "Dirichlet concentration for the noniid setting"},
      {"data", "samples", "12000", "synthetic: total samples before the held-out split"},
      {"data", "dim", "16", "synthetic: feature dimension"},
      {"data", "clusters", "2", "synthetic: Gaussian clusters per class"},
      {"data", "spread", "1.2", "synthetic: stddev of cluster centres"},
      {"data", "noise", "1.0", "synthetic: stddev of samples around their centre"},
      {"federation", "clients", "10", "client count K"},
      {"federation", "clients_per_round", "0", "clients sampled per round m (0 = all)"},
      {"federation", "local_epochs", "2", "local epochs E between synchronizations"},
      {"federation", "lr", "0.05", "SGD learning rate"},
      {"federation", "batch_size", "32", "SGD minibatch size"},
      {"federation", "bytes_per_param", "4", "bytes charged per shared parameter"},
      {"sharing", "frequency", "40", "gradual sharing: rounds per released layer"},
      {"sharing", "frozen_phase", "true", "gradual sharing: start with nothing shared"},
      {"model", "arch", "mlp", "mlp | cnn"},
      {"model", "base_hidden", "64,32", "mlp: hidden widths of the shared base"},
      {"model", "head_hidden", "", "mlp: hidden widths inside each head"},
      {"model", "conv1", "8", "cnn: channels of the first conv layer"},
      {"model", "conv2", "16", "cnn: channels of the second conv layer"},
      {"model", "kernel", "5", "cnn: square kernel size"},
      {"model", "cnn_hidden", "64", "cnn: width of the first head fc layer"},
      {"output", "checkpoints", "false", "write final client checkpoints"},
  };
  return keys;
}

ConfigValues default_config_values() {
  ConfigValues v;
  for (const auto& k : config_keys()) v[k.key] = k.default_value;
  return v;
}

ConfigValues read_config_file(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("cannot read config '" + path + "': " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  ConfigValues out;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config '" + path + "': key '" + section + "' is outside any [section]");
    }
    for (const auto& [key, value] : body) {
      const ConfigKey* known = find_key(key);
      if (known == nullptr || known->section != section) {
        throw ConfigError("config '" + path + "': unknown key '" + key + "' in [" + section + "]");
      }
      out[key] = value.data();
    }
  }
  return out;
}

ConfigValues merge_config(ConfigValues base, const ConfigValues& overrides) {
  for (const auto& [key, value] : overrides) {
    if (find_key(key) == nullptr) throw ConfigError("unknown config key '" + key + "'");
    base[key] = value;
  }
  return base;
}

ExperimentConfig parse_config(const ConfigValues& raw) {
  const ConfigValues values = merge_config(default_config_values(), raw);
  ValueReader r(values);
  ExperimentConfig c;
  c.method = parse_method(r.str("method"));
  c.setting = parse_setting(r.str("setting"));
  c.seed = r.u64("seed");
  c.rounds = r.size("rounds");
  c.eval_every = r.size("eval_every");

  const auto& source = r.str("source");
  if (source == "synthetic") {
    c.source = DataSource::kSynthetic;
  } else if (source == "csv") {
    c.source = DataSource::kCsv;
  } else if (source == "idx") {
    c.source = DataSource::kIdx;
  } else {
    r.bad("source", "synthetic, csv or idx");
  }
  c.path = r.str("path");
  c.labels_path = r.str("labels_path");
  c.num_classes = r.size("num_classes");
  c.test_fraction = r.real("test_fraction");
  c.alpha = r.real("alpha");
  c.blobs.samples = r.size("samples");
  c.blobs.classes = c.num_classes;
  c.blobs.dim = r.size("dim");
  c.blobs.clusters_per_class = r.size("clusters");
  c.blobs.center_spread = r.real("spread");
  c.blobs.noise = r.real("noise");

  c.clients = r.size("clients");
  c.clients_per_round = r.size("clients_per_round");
  c.round.local_epochs = r.size("local_epochs");
  c.round.sgd.learning_rate = r.real("lr");
  c.round.sgd.batch_size = r.size("batch_size");
  c.round.bytes_per_param = r.size("bytes_per_param");

  c.share_frequency = r.size("frequency");
  c.frozen_phase = r.flag("frozen_phase");

  const auto& arch = r.str("arch");
  if (arch == "mlp") {
    c.arch = Architecture::kMlp;
  } else if (arch == "cnn") {
    c.arch = Architecture::kCnn;
  } else {
    r.bad("arch", "mlp or cnn");
  }
  c.base_hidden = r.list("base_hidden");
  c.head_hidden = r.list("head_hidden");
  c.conv1_channels = r.size("conv1");
  c.conv2_channels = r.size("conv2");
  c.kernel = r.size("kernel");
  c.cnn_hidden = r.size("cnn_hidden");
  c.save_checkpoints = r.flag("checkpoints");
  c.round.clients_per_round = c.sampled_per_round();
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (rounds < 1) fail("rounds must be at least 1");
  if (eval_every < 1) fail("eval_every must be at least 1");
  if (clients < 1) fail("clients must be at least 1");
  if (clients_per_round > clients) fail("clients_per_round cannot exceed clients");
  if (!(round.sgd.learning_rate > 0.0)) fail("lr must be positive");
  if (round.sgd.batch_size < 1) fail("batch_size must be at least 1");
  if (round.bytes_per_param < 1) fail("bytes_per_param must be at least 1");
  if (share_frequency < 1) fail("frequency must be at least 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail("test_fraction must lie in (0, 1)");
  if (setting == Setting::kNonIid && !(alpha > 0.0)) fail("alpha must be positive");
  if (source == DataSource::kSynthetic) {
    if (num_classes < 2) fail("synthetic data needs num_classes >= 2");
    if (blobs.samples < 1 || blobs.dim < 1 || blobs.clusters_per_class < 1) fail("synthetic data needs samples, dim, clusters");
    if (!(blobs.noise > 0.0) || !(blobs.center_spread > 0.0)) fail("synthetic spread and noise must be positive");
  } else if (path.empty()) {
    fail("data path is required for csv and idx sources");
  } else if (source == DataSource::kIdx && labels_path.empty()) {
    fail("labels_path is required for idx data");
  }
  if (arch == Architecture::kMlp && base_hidden.empty()) fail("base_hidden needs at least one width");
}

ConfigValues ExperimentConfig::values() const {
  ConfigValues v;
  v["method"] = to_string(method);
  v["setting"] = to_string(setting);
  v["seed"] = std::to_string(seed);
  v["rounds"] = std::to_string(rounds);
  v["eval_every"] = std::to_string(eval_every);
  v["source"] = source == DataSource::kSynthetic ? "synthetic" : source == DataSource::kCsv ? "csv" : "idx";
  v["path"] = path;
  v["labels_path"] = labels_path;
  v["num_classes"] = std::to_string(num_classes);
  v["test_fraction"] = fmt_double(test_fraction);
  v["alpha"] = fmt_double(alpha);
  v["samples"] = std::to_string(blobs.samples);
  v["dim"] = std::to_string(blobs.dim);
  v["clusters"] = std::to_string(blobs.clusters_per_class);
  v["spread"] = fmt_double(blobs.center_spread);
  v["noise"] = fmt_double(blobs.noise);
  v["clients"] = std::to_string(clients);
  v["clients_per_round"] = std::to_string(clients_per_round);
  v["local_epochs"] = std::to_string(round.local_epochs);
  v["lr"] = fmt_double(round.sgd.learning_rate);
  v["batch_size"] = std::to_string(round.sgd.batch_size);
  v["bytes_per_param"] = std::to_string(round.bytes_per_param);
  v["frequency"] = std::to_string(share_frequency);
  v["frozen_phase"] = frozen_phase ? "true" : "false";
  v["arch"] = arch == Architecture::kMlp ? "mlp" : "cnn";
  v["base_hidden"] = fmt_list(base_hidden);
  v["head_hidden"] = fmt_list(head_hidden);
  v["conv1"] = std::to_string(conv1_channels);
  v["conv2"] = std::to_string(conv2_channels);
  v["kernel"] = std::to_string(kernel);
  v["cnn_hidden"] = std::to_string(cnn_hidden);
  v["checkpoints"] = save_checkpoints ? "true" : "false";
  return v;
}

PartitionLayout build_layout(const ExperimentConfig& config, const Shape& sample_shape) {
  const bool dual = uses_dual_head(config.method);
  if (config.arch == Architecture::kMlp) {
    if (sample_shape.size() != 1) {
      throw ConfigError("the mlp architecture needs vector samples, got " + shape_to_string(sample_shape));
    }
    return mlp_layout(sample_shape[0], config.base_hidden, config.head_hidden, config.num_classes, dual);
  }
  if (sample_shape.size() != 3) {
    throw ConfigError("the cnn architecture needs {channels, height, width} samples, got " + shape_to_string(sample_shape));
  }
  return cnn_layout(sample_shape, config.conv1_channels, config.conv2_channels, config.kernel, config.cnn_hidden,
                    config.num_classes, dual);
}

}  // namespace dualfed
