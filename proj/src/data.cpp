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
#include "dualfed/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dualfed/errors.hpp"
#include "dualfed/random.hpp"

namespace dualfed {
namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t read_be32(const std::string& bytes, std::size_t offset, const std::string& path) {
  if (bytes.size() < offset + 4) throw ParseError("'" + path + "' truncated in header", bytes.size());
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
  return v;
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

LabeledDataset load_csv(const std::string& path, std::size_t num_classes) {
  const std::string text = read_file(path);
  std::vector<std::pair<std::size_t, std::size_t>> labels;  // (label, line offset)
  std::vector<double> features;
  std::size_t dim = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::size_t line_start = pos;
    pos = end + 1;
    if (line.empty()) continue;

    std::size_t field = 0, count = 0;
    std::size_t label = 0;
    while (true) {
      std::size_t comma = line.find(',', field);
      std::string_view tok = line.substr(field, comma == std::string_view::npos ? line.size() - field : comma - field);
      const char* first = tok.data();
      const char* last = tok.data() + tok.size();
      while (first < last && *first == ' ') ++first;
      while (last > first && last[-1] == ' ') --last;
      const std::size_t tok_offset = line_start + static_cast<std::size_t>(first - line.data());
      if (count == 0) {
        auto [p, ec] = std::from_chars(first, last, label);
        if (ec != std::errc() || p != last) throw ParseError("bad label in '" + path + "'", tok_offset);
        if (num_classes != 0 && label >= num_classes) {
          throw ParseError("label " + std::to_string(label) + " is not below " + std::to_string(num_classes) +
                               " classes in '" + path + "'",
                           tok_offset);
        }
      } else {
        double v = 0.0;
        auto [p, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || p != last || !std::isfinite(v)) {
          throw ParseError("bad feature value in '" + path + "'", tok_offset);
        }
        features.push_back(v);
      }
      ++count;
      if (comma == std::string_view::npos) break;
      field = comma + 1;
    }
    if (count < 2) throw ParseError("row without features in '" + path + "'", line_start);
    if (labels.empty()) {
      dim = count - 1;
    } else if (count - 1 != dim) {
      throw ParseError("row has " + std::to_string(count - 1) + " features, expected " + std::to_string(dim) +
                           " in '" + path + "'",
                       line_start);
    }
    labels.emplace_back(label, line_start);
  }
  if (labels.empty()) throw DataError("dataset '" + path + "' is empty");

  std::size_t classes = num_classes;
  if (classes == 0) {
    for (const auto& [l, off] : labels) classes = std::max(classes, l + 1);
  }
  LabeledDataset data({dim}, classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    data.add(std::span<const double>(features).subspan(i * dim, dim), labels[i].first);
  }
  return data;
}

LabeledDataset load_idx(const std::string& path, const std::string& labels_path, std::size_t num_classes) {
  if (labels_path.empty()) throw DataError("IDX datasets need a labels file next to '" + path + "'");
  const std::string img = read_file(path);
  const std::string lab = read_file(labels_path);

  const auto img_magic = read_be32(img, 0, path);
  if (img_magic != kIdxImageMagic) throw ParseError("'" + path + "' is not an IDX image file (bad magic)", 0);
  const auto lab_magic = read_be32(lab, 0, labels_path);
  if (lab_magic != kIdxLabelMagic) throw ParseError("'" + labels_path + "' is not an IDX label file (bad magic)", 0);

  const std::size_t count = read_be32(img, 4, path);
  const std::size_t rows = read_be32(img, 8, path);
  const std::size_t cols = read_be32(img, 12, path);
  const std::size_t label_count = read_be32(lab, 4, labels_path);
  if (label_count != count) {
    throw ParseError("'" + labels_path + "' holds " + std::to_string(label_count) + " labels for " +
                         std::to_string(count) + " images",
                     4);
  }
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + count * pixels) throw ParseError("'" + path + "' truncated in pixel data", img.size());
  if (lab.size() < 8 + count) throw ParseError("'" + labels_path + "' truncated in label data", lab.size());

  std::size_t classes = num_classes;
  if (classes == 0) {
    for (std::size_t i = 0; i < count; ++i) classes = std::max<std::size_t>(classes, static_cast<unsigned char>(lab[8 + i]) + 1);
  }
  LabeledDataset data({1, rows, cols}, classes);
  std::vector<double> buf(pixels);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = static_cast<unsigned char>(lab[8 + i]);
    if (label >= classes) {
      throw ParseError("label " + std::to_string(label) + " is not below " + std::to_string(classes) +
                           " classes in '" + labels_path + "'",
                       8 + i);
    }
    for (std::size_t p = 0; p < pixels; ++p) buf[p] = static_cast<unsigned char>(img[16 + i * pixels + p]) / 255.0;
    data.add(buf, label);
  }
  return data;
}

}  // namespace

LabeledDataset::LabeledDataset(Shape sample_shape, std::size_t num_classes)
    : sample_shape_(std::move(sample_shape)), sample_size_(shape_size(sample_shape_)), num_classes_(num_classes) {
  if (sample_shape_.empty() || sample_size_ == 0) throw ConfigError("samples need a non-empty shape");
  if (num_classes_ == 0) throw ConfigError("a dataset needs at least one class");
}

void LabeledDataset::add(std::span<const double> features, std::size_t label) {
  if (features.size() != sample_size_) {
    throw StructuralError("sample has " + std::to_string(features.size()) + " features, expected " +
                          std::to_string(sample_size_));
  }
  if (label >= num_classes_) throw DomainError("label " + std::to_string(label) + " out of range");
  features_.insert(features_.end(), features.begin(), features.end());
  labels_.push_back(label);
}

std::span<const double> LabeledDataset::features(std::size_t i) const {
  if (i >= size()) throw DomainError("sample index out of range");
  return std::span<const double>(features_).subspan(i * sample_size_, sample_size_);
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out(sample_shape_, num_classes_);
  out.features_.reserve(indices.size() * sample_size_);
  out.labels_.reserve(indices.size());
  for (std::size_t i : indices) out.add(features(i), labels_[i]);
  return out;
}

Tensor LabeledDataset::gather(std::span<const std::size_t> indices) const {
  Shape shape{indices.size()};
  shape.insert(shape.end(), sample_shape_.begin(), sample_shape_.end());
  Tensor t(std::move(shape));
  double* dst = t.data();
  for (std::size_t i : indices) {
    const auto f = features(i);
    dst = std::copy(f.begin(), f.end(), dst);
  }
  return t;
}

std::vector<std::size_t> LabeledDataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels_.at(i));
  return out;
}

std::vector<std::size_t> LabeledDataset::class_histogram() const {
  std::vector<std::size_t> h(num_classes_, 0);
  for (std::size_t l : labels_) ++h[l];
  return h;
}

std::vector<std::size_t> LabeledDataset::class_histogram(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> h(num_classes_, 0);
  for (std::size_t i : indices) ++h[labels_.at(i)];
  return h;
}

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "csv") return DatasetFormat::kCsv;
  if (name == "idx") return DatasetFormat::kIdx;
  throw ConfigError("unknown dataset format '" + name + "' (expected csv or idx)");
}

LabeledDataset load_dataset(const std::string& path, DatasetFormat format, std::size_t num_classes,
                            const std::string& labels_path) {
  return format == DatasetFormat::kCsv ? load_csv(path, num_classes) : load_idx(path, labels_path, num_classes);
}

void save_csv(const LabeledDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.precision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.label(i);
    for (double v : data.features(i)) out << ',' << v;
    out << '\n';
  }
}

void save_idx(const LabeledDataset& data, const std::string& images_path, const std::string& labels_path) {
  const Shape& s = data.sample_shape();
  std::size_t rows = 0, cols = 0;
  if (s.size() == 3 && s[0] == 1) {
    rows = s[1];
    cols = s[2];
  } else if (s.size() == 2) {
    rows = s[0];
    cols = s[1];
  } else {
    throw ConfigError("IDX export needs single-channel 2-D samples, got " + shape_to_string(s));
  }
  std::ofstream img(images_path, std::ios::binary), lab(labels_path, std::ios::binary);
  if (!img || !lab) throw DataError("cannot write IDX files '" + images_path + "', '" + labels_path + "'");
  put_be32(img, kIdxImageMagic);
  put_be32(img, static_cast<std::uint32_t>(data.size()));
  put_be32(img, static_cast<std::uint32_t>(rows));
  put_be32(img, static_cast<std::uint32_t>(cols));
  put_be32(lab, kIdxLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.features(i)) {
      if (v < 0.0 || v > 1.0) throw DomainError("IDX export needs features in [0,1]");
      img.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
    if (data.label(i) > 255) throw DomainError("IDX labels must fit in one byte");
    lab.put(static_cast<char>(data.label(i)));
  }
}

LabeledDataset make_blobs(const BlobSpec& spec, std::uint64_t seed) {
  if (spec.samples == 0 || spec.classes < 2 || spec.dim == 0 || spec.clusters_per_class == 0) {
    throw ConfigError("synthetic blobs need samples, >= 2 classes, dim and clusters");
  }
  Rng rng(derive_seed(seed, SeedStream::kSynthetic));
  std::normal_distribution<double> center(0.0, spec.center_spread), noise(0.0, spec.noise);
  std::vector<double> centers(spec.classes * spec.clusters_per_class * spec.dim);
  for (double& c : centers) c = center(rng);

  LabeledDataset data({spec.dim}, spec.classes);
  std::vector<double> x(spec.dim);
  std::uniform_int_distribution<std::size_t> pick(0, spec.clusters_per_class - 1);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::size_t label = i % spec.classes;
    const std::size_t cluster = label * spec.clusters_per_class + pick(rng);
    for (std::size_t d = 0; d < spec.dim; ++d) x[d] = centers[cluster * spec.dim + d] + noise(rng);
    data.add(x, label);
  }
  return data;
}

}  // namespace dualfed
