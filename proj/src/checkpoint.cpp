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
#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

#include "dualfed/errors.hpp"
#include "dualfed/model.hpp"
#include "json.hpp"

namespace dualfed {
namespace {

using nlohmann::json;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  template <typename T>
  T get_le(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n, "record name");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw ParseError(std::string("checkpoint truncated while reading ") + what, pos_);
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

void put_tensor(std::string& out, const std::string& name, const Tensor& t) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
  for (double v : t.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

json spec_to_json(const nn::LayerSpec& s) {
  return {{"name", s.name}, {"kind", nn::to_string(s.kind)}, {"in_shape", s.in_shape},
          {"out_shape", s.out_shape}, {"kernel", s.kernel}};
}

nn::LayerSpec spec_from_json(const json& j) {
  static const std::pair<const char*, nn::LayerKind> kinds[] = {
      {"dense", nn::LayerKind::kDense},       {"conv2d", nn::LayerKind::kConv2d},
      {"maxpool2d", nn::LayerKind::kMaxPool2d}, {"relu", nn::LayerKind::kRelu},
      {"flatten", nn::LayerKind::kFlatten},   {"softmax", nn::LayerKind::kSoftmax}};
  nn::LayerSpec s;
  s.name = j.at("name").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  bool found = false;
  for (const auto& [k, v] : kinds) {
    if (kind == k) {
      s.kind = v;
      found = true;
    }
  }
  if (!found) throw DataError("unknown layer kind '" + kind + "' in checkpoint layout");
  s.in_shape = j.at("in_shape").get<Shape>();
  s.out_shape = j.at("out_shape").get<Shape>();
  s.kernel = j.at("kernel").get<std::size_t>();
  return s;
}

}  // namespace

void write_checkpoint(const std::string& path, const PartitionedModel& model) {
  model.check();
  std::string bytes;
  const ParameterBlock flat = flatten_model(model);
  for (const auto& e : flat.entries()) {
    put_tensor(bytes, e.layer + ".weight", e.params.weights);
    put_tensor(bytes, e.layer + ".bias", e.params.bias);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));

  json layout{{"num_classes", model.layout.num_classes}, {"dual", model.layout.dual}};
  layout["base"] = json::array();
  layout["head"] = json::array();
  for (const auto& s : model.layout.base) layout["base"].push_back(spec_to_json(s));
  for (const auto& s : model.layout.head) layout["head"].push_back(spec_to_json(s));
  std::ofstream side(path + ".json");
  if (!side) throw DataError("cannot open checkpoint sidecar '" + path + ".json' for writing");
  side << layout.dump(2) << '\n';
}

PartitionedModel read_checkpoint(const std::string& path) {
  std::ifstream side(path + ".json");
  if (!side) throw DataError("cannot open checkpoint sidecar '" + path + ".json'");
  PartitionLayout layout;
  try {
    const json j = json::parse(side);
    layout.num_classes = j.at("num_classes").get<std::size_t>();
    layout.dual = j.at("dual").get<bool>();
    for (const auto& s : j.at("base")) layout.base.push_back(spec_from_json(s));
    for (const auto& s : j.at("head")) layout.head.push_back(spec_from_json(s));
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint sidecar '" + path + ".json': " + e.what());
  }
  layout.validate();

  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));

  std::vector<std::pair<std::string, Tensor>> tensors;
  while (!r.done()) {
    const auto name_len = r.get_le<std::uint32_t>("name length");
    std::string name = r.get_string(name_len);
    const auto rank = r.get_le<std::uint32_t>("rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.get_le<std::uint64_t>("shape");
    const std::size_t count = shape_size(shape);
    if (count > r.remaining() / sizeof(double)) throw ParseError("checkpoint truncated while reading tensor data", r.pos());
    std::vector<double> data(count);
    for (auto& v : data) v = std::bit_cast<double>(r.get_le<std::uint64_t>("tensor data"));
    tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (tensors.size() % 2 != 0) throw ParseError("checkpoint has an unpaired tensor record", r.pos());

  ParameterBlock flat;
  for (std::size_t i = 0; i < tensors.size(); i += 2) {
    const auto& [wname, w] = tensors[i];
    const auto& [bname, b] = tensors[i + 1];
    if (!wname.ends_with(".weight") || bname != wname.substr(0, wname.size() - 7) + ".bias") {
      throw DataError("checkpoint records '" + wname + "' and '" + bname + "' are not a weight/bias pair");
    }
    flat.add(wname.substr(0, wname.size() - 7), {w, b});
  }
  auto parts = split(flat, layout);
  PartitionedModel model{std::move(parts.base), std::move(parts.global_head), std::move(parts.local_head), layout};
  model.check();
  return model;
}

}  // namespace dualfed
