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
#include <span>
#include <string>
#include <vector>

#include "dualfed/tensor.hpp"

namespace dualfed {

/// Samples of identical feature shape with integer labels below num_classes.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(Shape sample_shape, std::size_t num_classes);

  const Shape& sample_shape() const noexcept { return sample_shape_; }
  std::size_t sample_size() const noexcept { return sample_size_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }

  void add(std::span<const double> features, std::size_t label);
  std::span<const double> features(std::size_t i) const;
  std::size_t label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::size_t>& labels() const noexcept { return labels_; }

  LabeledDataset subset(std::span<const std::size_t> indices) const;
  /// [indices.size(), sample_shape...] tensor of the selected samples.
  Tensor gather(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> gather_labels(std::span<const std::size_t> indices) const;

  std::vector<std::size_t> class_histogram() const;
  std::vector<std::size_t> class_histogram(std::span<const std::size_t> indices) const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

 private:
  Shape sample_shape_;
  std::size_t sample_size_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<double> features_;
  std::vector<std::size_t> labels_;
};

enum class DatasetFormat { kCsv, kIdx };

DatasetFormat parse_dataset_format(const std::string& name);

/// CSV rows "label,f1,...,fd" (features kept as written), or an IDX image file
/// (magic 0x00000803) with its IDX label file (magic 0x00000801); IDX pixels
/// are scaled to [0,1] and samples get shape {1, rows, cols}.
/// num_classes == 0 infers max(label) + 1.
LabeledDataset load_dataset(const std::string& path, DatasetFormat format, std::size_t num_classes = 0,
                            const std::string& labels_path = "");

void save_csv(const LabeledDataset& data, const std::string& path);
/// Features must lie in [0,1]; stored as round(255 * v).
void save_idx(const LabeledDataset& data, const std::string& images_path, const std::string& labels_path);

struct BlobSpec {
  std::size_t samples = 12000;
  std::size_t classes = 10;
  std::size_t dim = 16;
  std::size_t clusters_per_class = 2;
  double center_spread = 1.2;  // stddev of cluster centers
  double noise = 1.0;          // stddev around a center
};

/// Gaussian mixture with `clusters_per_class` blobs per class, balanced labels.
LabeledDataset make_blobs(const BlobSpec& spec, std::uint64_t seed);

}  // namespace dualfed
