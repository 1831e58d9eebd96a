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

// Generators and independent oracles shared by the test binaries.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "dualfed/model.hpp"
#include "dualfed/random.hpp"

namespace dualfed::testing {

inline std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = uniform_real(rng, lo, hi);
  return t;
}

inline std::vector<std::size_t> random_labels(std::size_t n, std::size_t classes, Rng& rng) {
  std::vector<std::size_t> y(n);
  for (auto& v : y) v = uniform_index(rng, 0, classes - 1);
  return y;
}

/// Random small MLP layout; keeps drawing until the dual-head parameter count is <= max_params.
inline PartitionLayout random_mlp_layout(Rng& rng, std::size_t max_params, bool dual = true) {
  for (;;) {
    const std::size_t in = uniform_index(rng, 1, 4);
    const std::size_t classes = uniform_index(rng, 2, 4);
    std::vector<std::size_t> base{uniform_index(rng, 1, 4)};
    std::vector<std::size_t> head;
    if (uniform_index(rng, 0, 1) == 1) head.push_back(uniform_index(rng, 1, 3));
    auto layout = mlp_layout(in, base, head, classes, dual);
    std::size_t count = 0;
    for (const auto& s : layout.base) count += s.param_count();
    for (const auto& s : layout.head) count += s.param_count() * (dual ? 2 : 1);
    if (count <= max_params) return layout;
  }
}

/// Model whose every parameter (biases too) is uniform in [-1, 1].
inline PartitionedModel random_model(const PartitionLayout& layout, Rng& rng) {
  PartitionedModel m;
  m.layout = layout;
  auto fill = [&](ParameterBlock& block, const std::vector<nn::LayerSpec>& specs, auto name_of) {
    for (const auto& s : specs) {
      if (!s.has_params()) continue;
      block.add(name_of(s.name), {random_tensor(s.weight_shape(), rng), random_tensor(s.bias_shape(), rng)});
    }
  };
  fill(m.base, layout.base, [](const std::string& n) { return n; });
  fill(m.global_head, layout.head, [](const std::string& n) { return global_name(n); });
  if (layout.dual) fill(m.local_head, layout.head, [](const std::string& n) { return local_name(n); });
  return m;
}

/// Every scalar parameter of a model, in block order, as mutable references.
inline std::vector<double*> parameter_slots(PartitionedModel& m) {
  std::vector<double*> out;
  for (auto* block : {&m.base, &m.global_head, &m.local_head}) {
    for (auto& e : block->entries()) {
      for (auto& v : e.params.weights.values()) out.push_back(&v);
      for (auto& v : e.params.bias.values()) out.push_back(&v);
    }
  }
  return out;
}

inline std::vector<const double*> gradient_slots(const ModelGrads& g) {
  std::vector<const double*> out;
  for (const auto* block : {&g.base, &g.global_head, &g.local_head}) {
    for (const auto& e : block->entries()) {
      for (const auto& v : e.params.weights.values()) out.push_back(&v);
      for (const auto& v : e.params.bias.values()) out.push_back(&v);
    }
  }
  return out;
}

/// Central finite differences of `loss` with respect to every slot.
inline std::vector<double> finite_differences(const std::vector<double*>& slots, const std::function<double()>& loss,
                                              double h = 1e-5) {
  std::vector<double> g(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double keep = *slots[i];
    *slots[i] = keep + h;
    const double up = loss();
    *slots[i] = keep - h;
    const double down = loss();
    *slots[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// |a - b| / max(|a|, |b|, floor): relative error with an absolute floor for near-zero entries.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Hand-coded dual-head loss: mean over samples of -ln(p_g[y]+eps) - ln(p_l[y]+eps), straight loops.
inline double reference_dual_loss(const PartitionedModel& m, const Tensor& x, const std::vector<std::size_t>& y) {
  const std::size_t n = x.dim(0);
  const std::size_t d = x.row_size();
  auto run = [&](const std::vector<nn::LayerSpec>& specs, auto lookup, std::vector<double> a) {
    for (const auto& s : specs) {
      if (s.kind == nn::LayerKind::kDense) {
        const auto& p = lookup(s.name);
        const std::size_t in = s.in_shape[0];
        const std::size_t out = s.out_shape[0];
        std::vector<double> z(out);
        for (std::size_t o = 0; o < out; ++o) {
          double acc = p.bias[o];
          for (std::size_t i = 0; i < in; ++i) acc += a[i] * p.weights[i * out + o];
          z[o] = acc;
        }
        a = z;
      } else if (s.kind == nn::LayerKind::kRelu) {
        for (auto& v : a) v = v > 0.0 ? v : 0.0;
      } else if (s.kind == nn::LayerKind::kSoftmax) {
        double mx = a[0];
        for (double v : a) mx = std::max(mx, v);
        double sum = 0.0;
        for (auto& v : a) sum += (v = std::exp(v - mx));
        for (auto& v : a) v /= sum;
      }
    }
    return a;
  };
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> xs(x.data() + s * d, x.data() + (s + 1) * d);
    auto h = run(m.layout.base, [&](const std::string& n) -> const nn::LayerParams& { return m.base.at(n); }, xs);
    auto pg = run(m.layout.head,
                  [&](const std::string& n) -> const nn::LayerParams& { return m.global_head.at(global_name(n)); }, h);
    total += -std::log(pg[y[s]] + 1e-12);
    if (m.layout.dual) {
      auto pl = run(m.layout.head,
                    [&](const std::string& n) -> const nn::LayerParams& { return m.local_head.at(local_name(n)); }, h);
      total += -std::log(pl[y[s]] + 1e-12);
    }
  }
  return total / static_cast<double>(n);
}

/// Weighted mean written independently of the library: weights n_k / sum n, accumulated
/// term by term in ascending client order starting from the first term.
inline ParameterBlock oracle_weighted_mean(const std::vector<std::pair<std::size_t, std::pair<ParameterBlock, std::size_t>>>&
                                               contributions) {
  auto sorted = contributions;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double total = 0.0;
  for (const auto& c : sorted) total += static_cast<double>(c.second.second);
  ParameterBlock out = sorted.front().second.first;
  for (std::size_t e = 0; e < out.entries().size(); ++e) {
    for (Tensor nn::LayerParams::*field : {&nn::LayerParams::weights, &nn::LayerParams::bias}) {
      Tensor& dst = out.entries()[e].params.*field;
      for (std::size_t i = 0; i < dst.size(); ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < sorted.size(); ++k) {
          const double w = static_cast<double>(sorted[k].second.second) / total;
          const double term = w * (sorted[k].second.first.entries()[e].params.*field)[i];
          acc = k == 0 ? term : acc + term;
        }
        dst[i] = acc;
      }
    }
  }
  return out;
}

}  // namespace dualfed::testing
