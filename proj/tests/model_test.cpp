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
#include <filesystem>
#include <fstream>

#include "dualfed/errors.hpp"
#include "dualfed/model.hpp"
#include "test_support.hpp"

namespace dualfed {
namespace {

using testing::random_labels;
using testing::random_mlp_layout;
using testing::random_model;
using testing::random_tensor;
using testing::uniform_index;

constexpr double kFdStep = 1e-5;
constexpr double kFdTolerance = 1e-4;

PartitionLayout small_layout(bool dual = true) { return mlp_layout(4, {5}, {3}, 3, dual); }

TEST(Layout, NamesAndOrder) {
  const auto layout = small_layout();
  EXPECT_EQ(layout.base_layers(), (std::vector<std::string>{"fc1"}));
  EXPECT_EQ(layout.global_layers(), (std::vector<std::string>{"global/fc2", "global/fc3"}));
  EXPECT_EQ(layout.local_layers(), (std::vector<std::string>{"local/fc2", "local/fc3"}));
  EXPECT_EQ(layout.shareable_layers(), (std::vector<std::string>{"fc1", "global/fc2", "global/fc3"}));
  EXPECT_EQ(layout.canonical_order().size(), 5u);
  EXPECT_TRUE(small_layout(false).local_layers().empty());
}

TEST(Layout, RejectsBadLayouts) {
  EXPECT_THROW(mlp_layout(4, {5}, {}, 1, true), ConfigError);
  EXPECT_THROW(mlp_layout(4, {}, {}, 3, true), ConfigError);
  auto layout = small_layout();
  layout.head.front().in_shape = {7};
  EXPECT_THROW(layout.validate(), ConfigError);
}

TEST(Layout, CnnHasFiveParameterizedLayers) {
  const auto layout = cnn_layout({1, 28, 28}, 4, 8, 5, 32, 10, true);
  EXPECT_EQ(layout.base_layers(), (std::vector<std::string>{"conv1", "conv2"}));
  EXPECT_EQ(layout.head_layers(), (std::vector<std::string>{"fc1", "fc2"}));
  Rng rng(1);
  auto model = random_model(layout, rng);
  auto out = head_outputs(model, random_tensor({2, 1, 28, 28}, rng));
  EXPECT_EQ(out.global.shape(), (Shape{2, 10}));
  EXPECT_EQ(out.local.shape(), (Shape{2, 10}));
}

TEST(SplitConcat, RoundTripProperty) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const bool dual = uniform_index(rng, 0, 1) == 1;
    const auto layout = random_mlp_layout(rng, 200, dual);
    const auto model = random_model(layout, rng);
    const auto flat = flatten_model(model);
    EXPECT_EQ(flat.names(), layout.canonical_order());
    const auto parts = split(flat, layout);
    EXPECT_EQ(parts.base, model.base);
    EXPECT_EQ(parts.global_head, model.global_head);
    EXPECT_EQ(parts.local_head, model.local_head);
    EXPECT_EQ(concat(layout, {parts.base, parts.global_head, parts.local_head}), flat);
    EXPECT_EQ(concat(layout, {parts.local_head, parts.base, parts.global_head}), flat);
    EXPECT_EQ(flat.size(), parts.base.size() + parts.global_head.size() + parts.local_head.size());
  }
}

TEST(SplitConcat, ServerWeightsHaveNoLocalPart) {
  Rng rng(5);
  const auto layout = small_layout();
  const auto model = random_model(layout, rng);
  const auto server = concat(layout, {model.base, model.global_head});
  const auto parts = split(server, layout);
  EXPECT_TRUE(parts.local_head.empty());
  EXPECT_EQ(parts.global_head, model.global_head);
}

TEST(SplitConcat, UnknownLayerIsStructuralError) {
  Rng rng(7);
  const auto layout = small_layout();
  auto flat = flatten_model(random_model(layout, rng));
  flat.add("fc9", {Tensor({1, 1}), Tensor({1})});
  try {
    split(flat, layout);
    FAIL() << "expected StructuralError";
  } catch (const StructuralError& e) {
    EXPECT_NE(std::string(e.what()).find("fc9"), std::string::npos);
  }
}

TEST(SplitConcat, MissingLayerListed) {
  Rng rng(9);
  const auto layout = small_layout();
  const auto model = random_model(layout, rng);
  try {
    split(concat(layout, {model.base, model.local_head}), layout);
    FAIL() << "expected StructuralError";
  } catch (const StructuralError& e) {
    EXPECT_NE(std::string(e.what()).find("global/fc2"), std::string::npos);
  }
}

TEST(SplitConcat, DuplicateNamesRejected) {
  Rng rng(11);
  const auto layout = small_layout();
  const auto model = random_model(layout, rng);
  EXPECT_THROW(concat(layout, {model.base, model.base}), StructuralError);
  ParameterBlock b;
  b.add("fc1", {});
  EXPECT_THROW(b.add("fc1", {}), StructuralError);
}

TEST(Predict, CombineHeadsExamples) {
  const std::vector<double> g1{0.1, 0.9}, l1{0.8, 0.2};
  EXPECT_EQ(combine_heads(g1, l1), 1u);
  const std::vector<double> tie{0.5, 0.5};
  EXPECT_EQ(combine_heads(tie, tie), 0u);
  const std::vector<double> g2{0.3, 0.7}, l2{0.05, 0.95};
  EXPECT_EQ(combine_heads(g2, l2), 1u);
  const std::vector<double> g3{0.6, 0.4}, l3{0.1, 0.9};
  EXPECT_EQ(combine_heads(g3, l3), 1u);  // local 0.9 wins, index 3 mod 2
  EXPECT_EQ(combine_heads(g3, {}), 0u);
}

TEST(Predict, AgreeingHeadsGiveGlobalArgmax) {
  Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t c = uniform_index(rng, 2, 8);
    auto f = nn::softmax(random_tensor({c}, rng, -3, 3));
    const auto v = f.values();
    const auto expected = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    EXPECT_EQ(combine_heads(v, v), expected);
  }
}

TEST(Predict, LocalCopiedFromGlobalMatchesGlobalArgmax) {
  Rng rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    const auto layout = random_mlp_layout(rng, 200);
    auto model = random_model(layout, rng);
    for (auto& e : model.local_head.entries()) e.params = model.global_head.at(global_name(e.layer.substr(6)));
    auto x = random_tensor({10, layout.input_shape()[0]}, rng, -2, 2);
    const auto out = head_outputs(model, x);
    EXPECT_EQ(out.global, out.local);
    const auto pred = predict(model, x);
    for (std::size_t n = 0; n < 10; ++n) {
      const auto row = out.global.values().subspan(n * layout.num_classes, layout.num_classes);
      EXPECT_EQ(pred[n], static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
}

TEST(Predict, ClassAlwaysBelowC) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const bool dual = uniform_index(rng, 0, 1) == 1;
    const auto layout = random_mlp_layout(rng, 200, dual);
    const auto model = random_model(layout, rng);
    for (auto c : predict(model, random_tensor({20, layout.input_shape()[0]}, rng, -5, 5))) {
      EXPECT_LT(c, layout.num_classes);
    }
  }
}

TEST(DualLoss, MatchesReferenceLoss) {
  Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const bool dual = uniform_index(rng, 0, 1) == 1;
    const auto layout = random_mlp_layout(rng, 60, dual);
    const auto model = random_model(layout, rng);
    const std::size_t n = uniform_index(rng, 1, 8);
    auto x = random_tensor({n, layout.input_shape()[0]}, rng, -2, 2);
    auto y = random_labels(n, layout.num_classes, rng);
    EXPECT_NEAR(dual_head_loss_and_grads(model, x, y).loss, testing::reference_dual_loss(model, x, y), 1e-12);
  }
}

TEST(DualLoss, GradientsMatchFiniteDifferences) {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const auto layout = random_mlp_layout(rng, 60);
    auto model = random_model(layout, rng);
    const std::size_t n = uniform_index(rng, 1, 6);
    auto x = random_tensor({n, layout.input_shape()[0]}, rng, -2, 2);
    auto y = random_labels(n, layout.num_classes, rng);
    const auto analytic = dual_head_loss_and_grads(model, x, y).grads;
    const auto fd = testing::finite_differences(
        testing::parameter_slots(model), [&] { return testing::reference_dual_loss(model, x, y); }, kFdStep);
    const auto slots = testing::gradient_slots(analytic);
    ASSERT_EQ(slots.size(), fd.size());
    for (std::size_t i = 0; i < fd.size(); ++i) EXPECT_LT(testing::relative_error(*slots[i], fd[i]), kFdTolerance);
  }
}

TEST(DualLoss, GlobalTermLeavesLocalHeadUntouched) {
  Rng rng(29);
  const auto layout = small_layout();
  const auto model = random_model(layout, rng);
  auto x = random_tensor({6, 4}, rng);
  auto y = random_labels(6, 3, rng);
  const auto g = dual_head_loss_and_grads(model, x, y, LossTerms::kGlobalOnly).grads;
  for (const auto& e : g.local_head.entries()) {
    for (double v : e.params.weights.values()) EXPECT_EQ(v, 0.0);
    for (double v : e.params.bias.values()) EXPECT_EQ(v, 0.0);
  }
  const auto l = dual_head_loss_and_grads(model, x, y, LossTerms::kLocalOnly).grads;
  for (const auto& e : l.global_head.entries()) {
    for (double v : e.params.weights.values()) EXPECT_EQ(v, 0.0);
  }
  // Base collects both terms.
  const auto both = dual_head_loss_and_grads(model, x, y).grads;
  const auto& wb = both.base.at("fc1").weights;
  for (std::size_t i = 0; i < wb.size(); ++i) {
    EXPECT_NEAR(wb[i], g.base.at("fc1").weights[i] + l.base.at("fc1").weights[i], 1e-14);
  }
}

TEST(DualLoss, ConfidentCorrectHeadsGiveNearZeroLoss) {
  const auto layout = mlp_layout(2, {2}, {}, 2, true);
  PartitionedModel m;
  m.layout = layout;
  m.base.add("fc1", {Tensor({2, 2}), Tensor({2})});
  nn::LayerParams head{Tensor({2, 2}), Tensor({2}, {60.0, 0.0})};
  m.global_head.add("global/fc2", head);
  m.local_head.add("local/fc2", head);
  Tensor x({3, 2}, {1, 2, 3, 4, 5, 6});
  EXPECT_LT(dual_head_loss_and_grads(m, x, std::vector<std::size_t>{0, 0, 0}).loss, 1e-10);
}

TEST(DualLoss, EmptyBatchIsDomainError) {
  Rng rng(31);
  const auto model = random_model(small_layout(), rng);
  EXPECT_THROW(dual_head_loss_and_grads(model, Tensor({0, 4}), std::vector<std::size_t>{}), DomainError);
}

TEST(ValueInit, ClientsShareServerPartsAndOwnLocalHeads) {
  const auto layout = small_layout();
  const auto w0 = init_server_weights(layout, 99);
  EXPECT_EQ(w0.names(), layout.shareable_layers());
  const auto a = value_init(w0, layout, 99, 0);
  const auto b = value_init(w0, layout, 99, 1);
  EXPECT_EQ(a.base, b.base);
  EXPECT_EQ(a.global_head, b.global_head);
  EXPECT_NE(a.local_head, b.local_head);
  EXPECT_EQ(a.local_head, value_init(w0, layout, 99, 0).local_head);
  for (const auto& e : a.local_head.entries()) {
    const auto& g = a.global_head.at(global_name(e.layer.substr(kLocalPrefix.size())));
    EXPECT_EQ(e.params.weights.shape(), g.weights.shape());
    EXPECT_EQ(e.params.bias.shape(), g.bias.shape());
  }
  EXPECT_EQ(init_server_weights(layout, 99), w0);
}

TEST(ValueInit, RejectsLocalLayersInServerWeights) {
  Rng rng(37);
  const auto layout = small_layout();
  const auto flat = flatten_model(random_model(layout, rng));
  EXPECT_THROW(value_init(flat, layout, 1, 0), ProtocolError);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("dualfed_ckpt_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(CheckpointTest, RoundTrip) {
  Rng rng(41);
  for (bool dual : {true, false}) {
    const auto model = random_model(cnn_layout({1, 12, 12}, 2, 3, 3, 8, 4, dual), rng);
    const auto path = (dir_ / (dual ? "dual.bin" : "single.bin")).string();
    write_checkpoint(path, model);
    EXPECT_TRUE(std::filesystem::exists(path + ".json"));
    EXPECT_EQ(read_checkpoint(path), model);
  }
}

TEST_F(CheckpointTest, TruncatedFileIsParseError) {
  Rng rng(43);
  const auto model = random_model(small_layout(), rng);
  const auto path = (dir_ / "m.bin").string();
  write_checkpoint(path, model);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 5);
  try {
    read_checkpoint(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_LE(e.offset(), size);
  }
}

TEST_F(CheckpointTest, MissingFileIsDataError) {
  EXPECT_THROW(read_checkpoint((dir_ / "absent.bin").string()), DataError);
}

}  // namespace
}  // namespace dualfed
