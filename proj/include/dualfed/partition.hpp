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

// Client shards for the three distribution settings and the two test modes.
//   iid      - stratified split, every client sees the pooled label mix
//   noniid   - Dirichlet(alpha) label skew, every client still holds every class
//   dispatch - clients own disjoint class sets
//   global test - one shared shard with the pooled training label mix
//   local test  - per-client shards matching each client's training label mix

#include <cstdint>
#include <string>
#include <vector>

#include "dualfed/data.hpp"

namespace dualfed {

enum class Setting { kIid, kNonIid, kDispatch };
enum class TestMode { kGlobal, kLocal };

std::string to_string(Setting s);
std::string to_string(TestMode m);
Setting parse_setting(const std::string& name);

struct PartitionPlan {
  Setting setting = Setting::kIid;
  std::size_t clients = 0;
  std::uint64_t seed = 0;
  double alpha = 0.0;  // noniid only
  /// shards[k] holds indices into the partitioned dataset, ascending.
  std::vector<std::vector<std::size_t>> shards;

  friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;
};

PartitionPlan partition_iid(const LabeledDataset& data, std::size_t clients, std::uint64_t seed);
PartitionPlan partition_noniid(const LabeledDataset& data, std::size_t clients, std::uint64_t seed, double alpha);
PartitionPlan partition_dispatch(const LabeledDataset& data, std::size_t clients, std::uint64_t seed);
PartitionPlan make_partition(const LabeledDataset& data, Setting setting, std::size_t clients, std::uint64_t seed,
                             double alpha);

/// Classes present in a shard, ascending.
std::vector<std::size_t> shard_classes(const LabeledDataset& data, const std::vector<std::size_t>& shard);

struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified split: round(fraction * n_c) samples of every class go to the test side.
HoldoutSplit split_holdout(const LabeledDataset& data, double fraction, std::uint64_t seed);

struct TestAssignment {
  TestMode mode = TestMode::kGlobal;
  /// Index lists into the held-out dataset. One entry in global mode.
  std::vector<std::vector<std::size_t>> shards;
  /// shard_of_client[k] indexes `shards`.
  std::vector<std::size_t> shard_of_client;

  const std::vector<std::size_t>& shard_for(std::size_t client) const { return shards.at(shard_of_client.at(client)); }
};

inline constexpr double kLocalTestTvTolerance = 0.05;

/// Test shards for `mode`. Global: the largest held-out subset with the pooled
/// training label mix. Local: per-client subsets of size |held_out| / K (or as
/// large as availability allows, or larger when rounding a small shard breaks
/// the tolerance) matching each client's label mix to within total-variation
/// distance 0.05. Local shards stay disjoint until a class runs
/// out of held-out samples, after which clients share them.
TestAssignment build_tests(const PartitionPlan& plan, const LabeledDataset& train, const LabeledDataset& held_out,
                           TestMode mode, std::uint64_t seed);

/// Total-variation distance between two label histograms (normalized internally).
double tv_distance(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

}  // namespace dualfed
