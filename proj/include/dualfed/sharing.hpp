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

// Layer-wise gradual sharing: a phase schedule that releases shareable layers
// shallow to deep, masks that select the released layers for the wire, and a
// ledger that counts the bytes those payloads cost.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dualfed/model.hpp"

namespace dualfed {

struct ShareSchedule {
  std::size_t frequency = 10;             // rounds per released layer
  std::size_t num_shareable_layers = 1;   // L
  bool include_frozen_phase = true;       // phase 0: nothing shared for the first `frequency` rounds
};

/// Phase for round t (t >= 1). With the frozen phase: min(L, (t-1)/f);
/// without it: min(L, 1 + (t-1)/f). Phase p shares the p shallowest layers.
std::size_t phase_of_round(std::size_t t, const ShareSchedule& schedule);

class ShareMask {
 public:
  ShareMask() = default;
  explicit ShareMask(std::vector<std::pair<std::string, bool>> included);

  static ShareMask all(const std::vector<std::string>& layers);
  static ShareMask none(const std::vector<std::string>& layers);

  const std::vector<std::pair<std::string, bool>>& included() const noexcept { return included_; }
  std::vector<std::string> flagged_layers() const;
  std::size_t flagged_count() const;
  bool covers(std::string_view layer) const;
  bool is_flagged(std::string_view layer) const;

  /// Every layer flagged here is also flagged in `other`.
  bool subset_of(const ShareMask& other) const;

  friend bool operator==(const ShareMask&, const ShareMask&) = default;

 private:
  std::vector<std::pair<std::string, bool>> included_;
};

/// Flags the first min(p, L) of `shareable` (shallow to deep).
ShareMask get_mask(std::size_t p, const std::vector<std::string>& shareable);
ShareMask get_mask(std::size_t p, const PartitionLayout& layout);

/// Only the flagged layers; masked-out layers are absent, not zero-filled.
ParameterBlock masked_extract(const ParameterBlock& w, const ShareMask& mask);

/// `current` with its flagged layers replaced by `incoming`.
ParameterBlock masked_merge(const ParameterBlock& current, const ParameterBlock& incoming, const ShareMask& mask);

struct LedgerRecord {
  std::size_t round = 0;
  std::size_t phase = 0;
  std::size_t clients = 0;
  std::size_t shared_params = 0;  // per client
  std::uint64_t bytes_up = 0;
  std::uint64_t bytes_down = 0;

  friend bool operator==(const LedgerRecord&, const LedgerRecord&) = default;
};

class CommLedger {
 public:
  explicit CommLedger(std::size_t bytes_per_param = 4);

  std::size_t bytes_per_param() const noexcept { return bytes_per_param_; }
  const std::vector<LedgerRecord>& records() const noexcept { return records_; }

  /// Appends one round: shared_params * bytes_per_param * clients in each direction.
  const LedgerRecord& record(std::size_t round, std::size_t phase, std::size_t shared_params, std::size_t clients);

  std::uint64_t cumulative_up() const noexcept { return cum_up_; }
  std::uint64_t cumulative_down() const noexcept { return cum_down_; }
  std::uint64_t cumulative_total() const noexcept { return cum_up_ + cum_down_; }

  /// round,phase,bytes_up,bytes_down,cum_bytes  (cum_bytes counts both directions)
  void write_csv(std::ostream& out) const;

 private:
  std::size_t bytes_per_param_;
  std::vector<LedgerRecord> records_;
  std::uint64_t cum_up_ = 0;
  std::uint64_t cum_down_ = 0;
};

std::size_t flagged_param_count(const ShareMask& mask, const PartitionLayout& layout);

const LedgerRecord& record_exchange(CommLedger& ledger, std::size_t round, std::size_t phase, const ShareMask& mask,
                                    const PartitionLayout& layout, std::size_t clients);

}  // namespace dualfed
