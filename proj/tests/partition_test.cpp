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
#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "dualfed/errors.hpp"
#include "dualfed/partition.hpp"
#include "test_support.hpp"

namespace dualfed {
namespace {

using testing::uniform_index;

LabeledDataset labelled(const std::vector<std::size_t>& per_class) {
  LabeledDataset d({1}, per_class.size());
  // Interleave classes so sample order carries no label structure.
  std::vector<std::size_t> left = per_class;
  for (bool any = true; any;) {
    any = false;
    for (std::size_t c = 0; c < left.size(); ++c) {
      if (left[c] == 0) continue;
      --left[c];
      any = true;
      const double f = static_cast<double>(d.size());
      d.add(std::span<const double>(&f, 1), c);
    }
  }
  return d;
}

LabeledDataset balanced(std::size_t classes, std::size_t per_class) {
  return labelled(std::vector<std::size_t>(classes, per_class));
}

void expect_exact_partition(const PartitionPlan& plan, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& shard : plan.shards) {
    EXPECT_TRUE(std::is_sorted(shard.begin(), shard.end()));
    for (auto i : shard) {
      ASSERT_LT(i, n);
      ++seen[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(seen[i], 1) << "sample " << i;
}

TEST(Iid, Examples) {
  const auto d = balanced(2, 50);
  const auto one = partition_iid(d, 1, 3);
  ASSERT_EQ(one.shards.size(), 1u);
  EXPECT_EQ(one.shards[0].size(), 100u);
  const auto two = partition_iid(d, 2, 3);
  for (const auto& s : two.shards) EXPECT_EQ(d.class_histogram(s), (std::vector<std::size_t>{25, 25}));
  EXPECT_EQ(partition_iid(d, 2, 3), two);
  EXPECT_THROW(partition_iid(d, 101, 3), ConfigError);
  EXPECT_THROW(partition_iid(d, 0, 3), ConfigError);
}

TEST(Iid, StratifiedWithinOneSample) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> per_class(uniform_index(rng, 2, 8));
    for (auto& v : per_class) v = uniform_index(rng, 1, 60);
    const auto d = labelled(per_class);
    const std::size_t k = uniform_index(rng, 1, std::min<std::size_t>(d.size(), 12));
    const auto plan = partition_iid(d, k, trial);
    expect_exact_partition(plan, d.size());
    std::size_t lo = d.size(), hi = 0;
    for (const auto& s : plan.shards) {
      lo = std::min(lo, s.size());
      hi = std::max(hi, s.size());
      const auto h = d.class_histogram(s);
      for (std::size_t c = 0; c < h.size(); ++c) {
        EXPECT_LE(std::abs(static_cast<double>(h[c]) - static_cast<double>(per_class[c]) / k), 1.0);
      }
    }
    EXPECT_LE(hi - lo, 1u);
  }
}

TEST(NonIid, EveryCellNonEmpty) {
  const auto d = balanced(10, 1000);
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto plan = partition_noniid(d, 10, seed, 0.5);
    expect_exact_partition(plan, d.size());
    for (const auto& s : plan.shards) {
      for (auto h : d.class_histogram(s)) EXPECT_GE(h, 1u);
    }
  }
}

TEST(NonIid, SkewShrinksWithAlpha) {
  const auto d = balanced(10, 1000);
  auto mean_tv = [&](double alpha) {
    const auto plan = partition_noniid(d, 10, 7, alpha);
    double tv = 0.0;
    for (const auto& s : plan.shards) tv += tv_distance(d.class_histogram(s), d.class_histogram());
    return tv / 10.0;
  };
  const double skewed = mean_tv(0.1), mild = mean_tv(1.0), flat = mean_tv(1e4);
  EXPECT_GT(skewed, mild);
  EXPECT_GT(mild, flat);
  EXPECT_LT(flat, 0.05);
}

TEST(NonIid, Errors) {
  EXPECT_THROW(partition_noniid(labelled({5, 2}), 3, 1, 0.5), ConfigError);
  EXPECT_THROW(partition_noniid(balanced(2, 10), 3, 1, 0.0), ConfigError);
}

TEST(Dispatch, Examples) {
  const auto d = balanced(4, 10);
  const auto plan = partition_dispatch(d, 2, 9);
  const auto a = shard_classes(d, plan.shards[0]);
  const auto b = shard_classes(d, plan.shards[1]);
  EXPECT_EQ(a.size(), 2u);
  EXPECT_EQ(b.size(), 2u);
  std::set<std::size_t> all(a.begin(), a.end());
  all.insert(b.begin(), b.end());
  EXPECT_EQ(all.size(), 4u);
  const auto per = partition_dispatch(balanced(5, 3), 5, 1);
  for (const auto& s : per.shards) EXPECT_EQ(s.size(), 3u);
  EXPECT_THROW(partition_dispatch(balanced(3, 10), 4, 1), ConfigError);
}

TEST(Dispatch, EarlierClientsTakeExtraClasses) {
  const auto d = balanced(7, 2);
  const auto plan = partition_dispatch(d, 3, 4);
  EXPECT_EQ(shard_classes(d, plan.shards[0]).size(), 3u);
  EXPECT_EQ(shard_classes(d, plan.shards[1]).size(), 2u);
  EXPECT_EQ(shard_classes(d, plan.shards[2]).size(), 2u);
}

// Invariants over random (setting, K, seed, alpha) draws.
TEST(PartitionProperty, InvariantsHold) {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const auto setting = static_cast<Setting>(uniform_index(rng, 0, 2));
    const std::size_t classes = uniform_index(rng, 2, 12);
    std::vector<std::size_t> per_class(classes);
    for (auto& v : per_class) v = uniform_index(rng, 12, 40);
    const auto d = labelled(per_class);
    const std::size_t k = uniform_index(rng, 1, setting == Setting::kDispatch ? classes : 12);
    const std::uint64_t seed = rng();
    const double alpha = std::exp(testing::uniform_real(rng, -3, 3));
    const auto plan = make_partition(d, setting, k, seed, alpha);
    ASSERT_EQ(plan.shards.size(), k);
    expect_exact_partition(plan, d.size());
    EXPECT_EQ(make_partition(d, setting, k, seed, alpha), plan);
    if (setting == Setting::kNonIid) {
      for (const auto& s : plan.shards)
        for (auto h : d.class_histogram(s)) EXPECT_GE(h, 1u);
    }
    if (setting == Setting::kDispatch) {
      std::set<std::size_t> owned;
      for (const auto& s : plan.shards) {
        for (auto c : shard_classes(d, s)) EXPECT_TRUE(owned.insert(c).second) << "class " << c << " shared";
      }
      EXPECT_EQ(owned.size(), classes);
    }
  }
}

TEST(Holdout, StratifiedAndDisjoint) {
  const auto d = labelled({60, 120, 30});
  const auto split = split_holdout(d, 1.0 / 6.0, 4);
  EXPECT_EQ(d.class_histogram(split.test), (std::vector<std::size_t>{10, 20, 5}));
  std::vector<std::size_t> all = split.train;
  all.insert(all.end(), split.test.begin(), split.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  EXPECT_THROW(split_holdout(d, 1.0, 4), ConfigError);
}

TEST(TvDistance, Examples) {
  EXPECT_DOUBLE_EQ(tv_distance({1, 1}, {5, 5}), 0.0);
  EXPECT_DOUBLE_EQ(tv_distance({1, 0}, {0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(tv_distance({3, 1}, {1, 1}), 0.25);
  EXPECT_THROW(tv_distance({0, 0}, {1, 1}), DomainError);
}

struct Fixture {
  LabeledDataset train, held_out;
};

Fixture pools(std::size_t classes, std::size_t per_class, std::uint64_t seed) {
  const auto raw = balanced(classes, per_class);
  const auto split = split_holdout(raw, 1.0 / 6.0, seed);
  return {raw.subset(split.train), raw.subset(split.test)};
}

TEST(BuildTests, GlobalModeSharesOneShardWithAllClasses) {
  const auto f = pools(10, 120, 1);
  const auto plan = partition_dispatch(f.train, 10, 1);
  const auto t = build_tests(plan, f.train, f.held_out, TestMode::kGlobal, 1);
  ASSERT_EQ(t.shards.size(), 1u);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(&t.shard_for(k), &t.shards[0]);
  EXPECT_EQ(shard_classes(f.held_out, t.shards[0]).size(), 10u);
  EXPECT_EQ(t.shards[0].size(), f.held_out.size());
}

TEST(BuildTests, DispatchLocalShardsHoldOnlyOwnClasses) {
  const auto f = pools(10, 120, 2);
  const auto plan = partition_dispatch(f.train, 5, 2);
  const auto t = build_tests(plan, f.train, f.held_out, TestMode::kLocal, 2);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(shard_classes(f.held_out, t.shard_for(k)), shard_classes(f.train, plan.shards[k]));
  }
}

TEST(BuildTests, LocalShardsTrackTrainingMix) {
  Rng rng(13);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto f = pools(uniform_index(rng, 2, 10), uniform_index(rng, 60, 300), trial);
    const auto setting = static_cast<Setting>(uniform_index(rng, 0, 1));
    const std::size_t k = uniform_index(rng, 1, 8);
    const auto plan = make_partition(f.train, setting, k, trial, 2.0);
    TestAssignment t;
    try {
      t = build_tests(plan, f.train, f.held_out, TestMode::kLocal, trial);
    } catch (const ConfigError&) {
      continue;  // skewed shards may legitimately exceed what the pool can match
    }
    ++checked;
    for (std::size_t c = 0; c < k; ++c) {
      EXPECT_LE(tv_distance(f.held_out.class_histogram(t.shard_for(c)), f.train.class_histogram(plan.shards[c])),
                kLocalTestTvTolerance);
    }
  }
  EXPECT_GE(checked, 25);
}

TEST(BuildTests, IidLocalShardsAreDisjointAndMatchGlobal) {
  const auto f = pools(10, 600, 3);
  const auto plan = partition_iid(f.train, 10, 3);
  const auto t = build_tests(plan, f.train, f.held_out, TestMode::kLocal, 3);
  std::set<std::size_t> used;
  for (std::size_t k = 0; k < 10; ++k) {
    EXPECT_EQ(t.shard_for(k).size(), f.held_out.size() / 10);
    EXPECT_LE(tv_distance(f.held_out.class_histogram(t.shard_for(k)), f.held_out.class_histogram()), 0.05);
    for (auto i : t.shard_for(k)) EXPECT_TRUE(used.insert(i).second);
  }
}

TEST(BuildTests, SmallShardsGrowToMeetTolerance) {
  LabeledDataset train({1}, 10);
  LabeledDataset held_out({1}, 10);
  PartitionPlan plan;
  plan.clients = 3;
  plan.shards.resize(3);
  for (std::size_t c = 0; c < 10; ++c) {
    for (std::size_t i = 0; i < 3 * (c + 1); ++i) {
      plan.shards[i % 3].push_back(train.size());
      train.add(std::vector<double>{0.0}, c);
    }
    for (std::size_t i = 0; i < 6; ++i) held_out.add(std::vector<double>{0.0}, c);
  }
  const auto t = build_tests(plan, train, held_out, TestMode::kLocal, 5);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_GT(t.shard_for(k).size(), held_out.size() / 3);
    EXPECT_LE(tv_distance(held_out.class_histogram(t.shard_for(k)), train.class_histogram(plan.shards[k])),
              kLocalTestTvTolerance);
  }
}

TEST(BuildTests, MissingClassNamedInError) {
  auto f = pools(3, 60, 4);
  LabeledDataset short_pool({1}, 3);
  for (std::size_t i = 0; i < f.held_out.size(); ++i)
    if (f.held_out.label(i) != 2) short_pool.add(f.held_out.features(i), f.held_out.label(i));
  const auto plan = partition_iid(f.train, 2, 4);
  try {
    build_tests(plan, f.train, short_pool, TestMode::kLocal, 4);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("class 2"), std::string::npos);
  }
}

TEST(Setting, Parse) {
  EXPECT_EQ(parse_setting("dispatch"), Setting::kDispatch);
  EXPECT_EQ(to_string(Setting::kNonIid), "noniid");
  EXPECT_THROW(parse_setting("federated"), ConfigError);
}

}  // namespace
}  // namespace dualfed
