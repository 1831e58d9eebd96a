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
#include "dualfed/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dualfed/errors.hpp"
#include "dualfed/random.hpp"

namespace dualfed {
namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const LabeledDataset& data) {
  std::vector<std::vector<std::size_t>> out(data.num_classes());
  for (std::size_t i = 0; i < data.size(); ++i) out[data.label(i)].push_back(i);
  return out;
}

void require_clients(std::size_t clients) {
  if (clients == 0) throw ConfigError("need at least one client");
}

// Largest-remainder apportionment of `total` by `weights`; ties go to the lower index.
std::vector<std::size_t> apportion(const std::vector<double>& weights, std::size_t total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> counts(weights.size(), 0);
  if (sum <= 0.0 || total == 0) return counts;
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] / sum * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < total; ++j, ++assigned) ++counts[rem[j % rem.size()].second];
  return counts;
}

}  // namespace

std::string to_string(Setting s) {
  switch (s) {
    case Setting::kIid: return "iid";
    case Setting::kNonIid: return "noniid";
    case Setting::kDispatch: return "dispatch";
  }
  return "unknown";
}

std::string to_string(TestMode m) { return m == TestMode::kGlobal ? "global" : "local"; }

Setting parse_setting(const std::string& name) {
  if (name == "iid") return Setting::kIid;
  if (name == "noniid") return Setting::kNonIid;
  if (name == "dispatch") return Setting::kDispatch;
  throw ConfigError("unknown data setting '" + name + "' (expected iid, noniid or dispatch)");
}

PartitionPlan partition_iid(const LabeledDataset& data, std::size_t clients, std::uint64_t seed) {
  require_clients(clients);
  if (clients > data.size()) {
    throw ConfigError(std::to_string(clients) + " clients but only " + std::to_string(data.size()) + " samples");
  }
  Rng rng(derive_seed(seed, SeedStream::kPartition));
  PartitionPlan plan{Setting::kIid, clients, seed, 0.0, std::vector<std::vector<std::size_t>>(clients)};
  // Deal class by class round-robin; every client gets floor or ceil of n_c / K per class.
  std::size_t next = 0;
  for (auto& members : indices_by_class(data)) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i : members) plan.shards[next++ % clients].push_back(i);
  }
  for (auto& s : plan.shards) std::sort(s.begin(), s.end());
  return plan;
}

PartitionPlan partition_noniid(const LabeledDataset& data, std::size_t clients, std::uint64_t seed, double alpha) {
  require_clients(clients);
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("Dirichlet alpha must be a positive number");
  auto by_class = indices_by_class(data);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].size() < clients) {
      throw ConfigError("class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                        " samples, fewer than the " + std::to_string(clients) + " clients");
    }
  }
  Rng rng(derive_seed(seed, SeedStream::kPartition));
  std::gamma_distribution<double> gamma(alpha, 1.0);
  PartitionPlan plan{Setting::kNonIid, clients, seed, alpha, std::vector<std::vector<std::size_t>>(clients)};
  for (auto& members : by_class) {
    std::vector<double> q(clients);
    for (double& v : q) v = gamma(rng);
    if (std::accumulate(q.begin(), q.end(), 0.0) <= 0.0) {
      // Every draw underflowed (tiny alpha): put the class on one client.
      std::uniform_int_distribution<std::size_t> pick(0, clients - 1);
      q.assign(clients, 0.0);
      q[pick(rng)] = 1.0;
    }
    auto counts = apportion(q, members.size());
    // Repair: every client holds at least one sample of every class.
    for (std::size_t k = 0; k < clients; ++k) {
      if (counts[k] > 0) continue;
      const auto donor = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      --counts[donor];
      ++counts[k];
    }
    std::shuffle(members.begin(), members.end(), rng);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < clients; ++k) {
      plan.shards[k].insert(plan.shards[k].end(), members.begin() + pos, members.begin() + pos + counts[k]);
      pos += counts[k];
    }
  }
  for (auto& s : plan.shards) std::sort(s.begin(), s.end());
  return plan;
}

PartitionPlan partition_dispatch(const LabeledDataset& data, std::size_t clients, std::uint64_t seed) {
  require_clients(clients);
  const std::size_t classes = data.num_classes();
  if (classes < clients) {
    throw ConfigError("dispatch needs at least as many classes (" + std::to_string(classes) + ") as clients (" +
                      std::to_string(clients) + ")");
  }
  Rng rng(derive_seed(seed, SeedStream::kPartition));
  std::vector<std::size_t> order(classes);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  // Contiguous groups; the first C % K clients take one extra class.
  std::vector<std::size_t> owner(classes);
  const std::size_t base = classes / clients, extra = classes % clients;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < clients; ++k) {
    const std::size_t take = base + (k < extra ? 1 : 0);
    for (std::size_t j = 0; j < take; ++j) owner[order[pos++]] = k;
  }
  PartitionPlan plan{Setting::kDispatch, clients, seed, 0.0, std::vector<std::vector<std::size_t>>(clients)};
  for (std::size_t i = 0; i < data.size(); ++i) plan.shards[owner[data.label(i)]].push_back(i);
  return plan;
}

PartitionPlan make_partition(const LabeledDataset& data, Setting setting, std::size_t clients, std::uint64_t seed,
                             double alpha) {
  switch (setting) {
    case Setting::kIid: return partition_iid(data, clients, seed);
    case Setting::kNonIid: return partition_noniid(data, clients, seed, alpha);
    case Setting::kDispatch: return partition_dispatch(data, clients, seed);
  }
  throw ConfigError("unknown data setting");
}

std::vector<std::size_t> shard_classes(const LabeledDataset& data, const std::vector<std::size_t>& shard) {
  const auto h = data.class_histogram(shard);
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < h.size(); ++c)
    if (h[c] > 0) out.push_back(c);
  return out;
}

HoldoutSplit split_holdout(const LabeledDataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("held-out fraction must lie in [0, 1)");
  Rng rng(derive_seed(seed, SeedStream::kHoldout));
  HoldoutSplit split;
  for (auto& members : indices_by_class(data)) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    split.test.insert(split.test.end(), members.begin(), members.begin() + n_test);
    split.train.insert(split.train.end(), members.begin() + n_test, members.end());
  }
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

double tv_distance(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  const double sa = static_cast<double>(std::accumulate(a.begin(), a.end(), std::size_t{0}));
  const double sb = static_cast<double>(std::accumulate(b.begin(), b.end(), std::size_t{0}));
  if (sa == 0.0 || sb == 0.0 || a.size() != b.size()) throw DomainError("TV distance needs two non-empty histograms");
  double tv = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) tv += std::abs(a[c] / sa - b[c] / sb);
  return 0.5 * tv;
}

namespace {

// Largest subset of `pool` (at most `wanted` samples) whose label mix follows `target`.
// Samples of class c are taken cyclically from cursor[c], which then advances,
// so consecutive calls spread over the pool before reusing samples.
std::vector<std::size_t> matching_subset(const std::vector<std::vector<std::size_t>>& pool,
                                         const std::vector<std::size_t>& target, std::size_t wanted,
                                         std::vector<std::size_t>& cursor) {
  const std::size_t classes = target.size();
  std::vector<double> weights(target.begin(), target.end());
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (total == 0.0) throw ConfigError("cannot build a test shard for an empty training shard");

  std::size_t available = std::numeric_limits<std::size_t>::max();
  for (std::size_t c = 0; c < classes; ++c) {
    if (target[c] == 0) continue;
    if (pool[c].empty()) {
      throw ConfigError("held-out data has no samples of class " + std::to_string(c) + " needed for a test shard");
    }
    const double cap = static_cast<double>(pool[c].size()) * total / static_cast<double>(target[c]);
    available = std::min(available, static_cast<std::size_t>(std::floor(cap)));
  }
  const auto fits = [&](const std::vector<std::size_t>& counts) {
    for (std::size_t c = 0; c < classes; ++c)
      if (counts[c] > pool[c].size()) return false;
    return true;
  };
  std::size_t size = std::min(wanted, available);
  std::vector<std::size_t> counts;
  for (; size > 0; --size) {
    counts = apportion(weights, size);
    if (fits(counts)) break;
  }
  if (size == 0) throw ConfigError("held-out data too small for a test shard");

  // Rounding alone can exceed the tolerance on small shards; a larger shard may not.
  for (std::size_t bigger = size + 1;
       tv_distance(counts, target) > kLocalTestTvTolerance && bigger <= available; ++bigger) {
    auto candidate = apportion(weights, bigger);
    if (fits(candidate) && tv_distance(candidate, target) <= kLocalTestTvTolerance) {
      counts = std::move(candidate);
      size = bigger;
    }
  }

  const double tv = tv_distance(counts, target);
  if (tv > kLocalTestTvTolerance) {
    std::size_t worst = 0;
    double worst_gap = -1.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double gap = std::abs(counts[c] / static_cast<double>(size) - target[c] / total);
      if (gap > worst_gap) {
        worst_gap = gap;
        worst = c;
      }
    }
    throw ConfigError("held-out data cannot match the training label mix (TV " + std::to_string(tv) +
                      "); class " + std::to_string(worst) + " is short");
  }
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) out.push_back(pool[c][(cursor[c] + i) % pool[c].size()]);
    if (!pool[c].empty()) cursor[c] = (cursor[c] + counts[c]) % pool[c].size();
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TestAssignment build_tests(const PartitionPlan& plan, const LabeledDataset& train, const LabeledDataset& held_out,
                           TestMode mode, std::uint64_t seed) {
  if (plan.shards.empty()) throw ConfigError("partition plan has no clients");
  if (held_out.empty()) throw ConfigError("no held-out data for testing");
  if (held_out.num_classes() != train.num_classes()) throw ConfigError("held-out and training class counts differ");

  Rng rng(derive_seed(seed, SeedStream::kTestShards));
  auto pool = indices_by_class(held_out);
  for (auto& members : pool) std::shuffle(members.begin(), members.end(), rng);

  std::vector<std::size_t> cursor(pool.size(), 0);
  TestAssignment out;
  out.mode = mode;
  if (mode == TestMode::kGlobal) {
    std::vector<std::size_t> pooled(train.num_classes(), 0);
    for (const auto& shard : plan.shards) {
      const auto h = train.class_histogram(shard);
      for (std::size_t c = 0; c < h.size(); ++c) pooled[c] += h[c];
    }
    out.shards.push_back(matching_subset(pool, pooled, held_out.size(), cursor));
    out.shard_of_client.assign(plan.shards.size(), 0);
  } else {
    const std::size_t per_client = std::max<std::size_t>(1, held_out.size() / plan.shards.size());
    for (std::size_t k = 0; k < plan.shards.size(); ++k) {
      out.shards.push_back(matching_subset(pool, train.class_histogram(plan.shards[k]), per_client, cursor));
      out.shard_of_client.push_back(k);
    }
  }
  return out;
}

}  // namespace dualfed
