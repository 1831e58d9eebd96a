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
#include "dualfed/sharing.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include "dualfed/errors.hpp"

namespace dualfed {

std::size_t phase_of_round(std::size_t t, const ShareSchedule& schedule) {
  if (t == 0) throw DomainError("rounds are numbered from 1");
  if (schedule.frequency == 0) throw ConfigError("sharing frequency must be at least 1");
  const std::size_t released = (t - 1) / schedule.frequency + (schedule.include_frozen_phase ? 0 : 1);
  return std::min(schedule.num_shareable_layers, released);
}

ShareMask::ShareMask(std::vector<std::pair<std::string, bool>> included) : included_(std::move(included)) {
  std::set<std::string_view> seen;
  for (const auto& [name, flag] : included_) {
    if (!seen.insert(name).second) throw StructuralError("mask lists layer '" + name + "' twice");
    if (is_local_layer(name)) throw ProtocolError("mask may not cover local-head layer '" + name + "'");
  }
}

ShareMask ShareMask::all(const std::vector<std::string>& layers) { return get_mask(layers.size(), layers); }
ShareMask ShareMask::none(const std::vector<std::string>& layers) { return get_mask(0, layers); }

std::vector<std::string> ShareMask::flagged_layers() const {
  std::vector<std::string> out;
  for (const auto& [name, flag] : included_)
    if (flag) out.push_back(name);
  return out;
}

std::size_t ShareMask::flagged_count() const {
  return static_cast<std::size_t>(
      std::count_if(included_.begin(), included_.end(), [](const auto& e) { return e.second; }));
}

bool ShareMask::covers(std::string_view layer) const {
  return std::any_of(included_.begin(), included_.end(), [&](const auto& e) { return e.first == layer; });
}

bool ShareMask::is_flagged(std::string_view layer) const {
  return std::any_of(included_.begin(), included_.end(), [&](const auto& e) { return e.first == layer && e.second; });
}

bool ShareMask::subset_of(const ShareMask& other) const {
  for (const auto& [name, flag] : included_)
    if (flag && !other.is_flagged(name)) return false;
  return true;
}

ShareMask get_mask(std::size_t p, const std::vector<std::string>& shareable) {
  std::vector<std::pair<std::string, bool>> included;
  included.reserve(shareable.size());
  for (std::size_t i = 0; i < shareable.size(); ++i) included.emplace_back(shareable[i], i < p);
  return ShareMask(std::move(included));
}

ShareMask get_mask(std::size_t p, const PartitionLayout& layout) { return get_mask(p, layout.shareable_layers()); }

ParameterBlock masked_extract(const ParameterBlock& w, const ShareMask& mask) {
  ParameterBlock out;
  for (const auto& [name, flag] : mask.included()) {
    const auto* p = w.find(name);
    if (p == nullptr) throw StructuralError("mask names layer '" + name + "' which the block does not have");
    if (flag) out.add(name, *p);
  }
  return out;
}

ParameterBlock masked_merge(const ParameterBlock& current, const ParameterBlock& incoming, const ShareMask& mask) {
  for (const auto& e : incoming.entries()) {
    if (!mask.is_flagged(e.layer)) {
      throw ProtocolError("payload carries layer '" + e.layer + "' which is not released in this phase");
    }
  }
  ParameterBlock out = current;
  for (const auto& name : mask.flagged_layers()) {
    const auto* src = incoming.find(name);
    if (src == nullptr) throw ProtocolError("payload is missing released layer '" + name + "'");
    auto* dst = out.find(name);
    if (dst == nullptr) throw StructuralError("block has no layer '" + name + "' to merge into");
    if (dst->weights.shape() != src->weights.shape() || dst->bias.shape() != src->bias.shape()) {
      throw StructuralError("payload layer '" + name + "' has the wrong shape");
    }
    *dst = *src;
  }
  return out;
}

CommLedger::CommLedger(std::size_t bytes_per_param) : bytes_per_param_(bytes_per_param) {
  if (bytes_per_param == 0) throw ConfigError("bytes_per_param must be positive");
}

const LedgerRecord& CommLedger::record(std::size_t round, std::size_t phase, std::size_t shared_params,
                                       std::size_t clients) {
  const std::uint64_t bytes = static_cast<std::uint64_t>(shared_params) * bytes_per_param_ * clients;
  records_.push_back({round, phase, clients, shared_params, bytes, bytes});
  cum_up_ += bytes;
  cum_down_ += bytes;
  return records_.back();
}

void CommLedger::write_csv(std::ostream& out) const {
  out << "round,phase,bytes_up,bytes_down,cum_bytes\n";
  std::uint64_t cum = 0;
  for (const auto& r : records_) {
    cum += r.bytes_up + r.bytes_down;
    out << r.round << ',' << r.phase << ',' << r.bytes_up << ',' << r.bytes_down << ',' << cum << '\n';
  }
}

std::size_t flagged_param_count(const ShareMask& mask, const PartitionLayout& layout) {
  std::size_t total = 0;
  for (const auto& name : mask.flagged_layers()) total += layout.spec_of(name).param_count();
  return total;
}

const LedgerRecord& record_exchange(CommLedger& ledger, std::size_t round, std::size_t phase, const ShareMask& mask,
                                    const PartitionLayout& layout, std::size_t clients) {
  return ledger.record(round, phase, flagged_param_count(mask, layout), clients);
}

}  // namespace dualfed
