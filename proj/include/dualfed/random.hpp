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

#include <cstdint>
#include <random>

namespace dualfed {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent seeds from one global seed.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Streams keep derived seeds for different purposes apart.
enum class SeedStream : std::uint64_t {
  kServerInit = 1,
  kServerSampling = 2,
  kClientTraining = 3,
  kLocalHeadInit = 4,
  kPartition = 5,
  kHoldout = 6,
  kTestShards = 7,
  kSynthetic = 8,
};

constexpr std::uint64_t derive_seed(std::uint64_t global, SeedStream stream, std::uint64_t index = 0) noexcept {
  return mix64(mix64(global ^ mix64(static_cast<std::uint64_t>(stream))) + index);
}

}  // namespace dualfed
