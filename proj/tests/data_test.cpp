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

#include <filesystem>
#include <fstream>

#include "dualfed/data.hpp"
#include "dualfed/errors.hpp"
#include "test_support.hpp"

namespace dualfed {
namespace {

namespace fs = std::filesystem;

class DataFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("dualfed_data_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& bytes) {
    const auto path = (dir_ / name).string();
    std::ofstream(path, std::ios::binary) << bytes;
    return path;
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::string be32(std::uint32_t v) {
  return {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8), static_cast<char>(v)};
}

TEST(Dataset, AddSubsetGather) {
  LabeledDataset d({2}, 3);
  d.add(std::vector<double>{1, 2}, 0);
  d.add(std::vector<double>{3, 4}, 2);
  d.add(std::vector<double>{5, 6}, 2);
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.class_histogram(), (std::vector<std::size_t>{1, 0, 2}));
  const std::vector<std::size_t> idx{2, 0};
  const auto sub = d.subset(idx);
  EXPECT_EQ(sub.labels(), (std::vector<std::size_t>{2, 0}));
  const auto x = d.gather(idx);
  EXPECT_EQ(x.shape(), (Shape{2, 2}));
  EXPECT_EQ(x[0], 5.0);
  EXPECT_EQ(x[3], 2.0);
  EXPECT_EQ(d.class_histogram(idx), (std::vector<std::size_t>{1, 0, 1}));
  EXPECT_THROW(d.add(std::vector<double>{1}, 0), StructuralError);
  EXPECT_THROW(d.add(std::vector<double>{1, 2}, 3), DomainError);
}

TEST_F(DataFiles, CsvSingleRow) {
  const auto d = load_dataset(write("one.csv", "1,0.5,0.25\n"), DatasetFormat::kCsv, 2);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.label(0), 1u);
  EXPECT_EQ(d.num_classes(), 2u);
  EXPECT_EQ(d.features(0)[0], 0.5);
  EXPECT_EQ(d.features(0)[1], 0.25);
}

TEST_F(DataFiles, CsvInfersClassCount) {
  const auto d = load_dataset(write("infer.csv", "0,1\n4,2\n"), DatasetFormat::kCsv);
  EXPECT_EQ(d.num_classes(), 5u);
}

TEST_F(DataFiles, CsvErrorsCarryOffsets) {
  try {
    load_dataset(write("big.csv", "0,1,2\n2,3,4\n"), DatasetFormat::kCsv, 2);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 6u);
  }
  try {
    load_dataset(write("ragged.csv", "0,1,2\n1,3\n"), DatasetFormat::kCsv, 2);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 6u);
  }
  EXPECT_THROW(load_dataset(write("text.csv", "0,abc\n"), DatasetFormat::kCsv, 2), ParseError);
  EXPECT_THROW(load_dataset(path("absent.csv"), DatasetFormat::kCsv, 2), DataError);
}

TEST_F(DataFiles, CsvRoundTrip) {
  Rng rng(3);
  BlobSpec spec;
  spec.samples = 200;
  const auto d = make_blobs(spec, 9);
  save_csv(d, path("blobs.csv"));
  EXPECT_EQ(load_dataset(path("blobs.csv"), DatasetFormat::kCsv, spec.classes), d);
}

TEST_F(DataFiles, IdxRoundTripAndScaling) {
  LabeledDataset d({1, 2, 3}, 10);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> px(6);
    for (auto& v : px) v = static_cast<double>(testing::uniform_index(rng, 0, 255)) / 255.0;
    d.add(px, static_cast<std::size_t>(i % 10));
  }
  save_idx(d, path("img.idx"), path("lab.idx"));
  const auto back = load_dataset(path("img.idx"), DatasetFormat::kIdx, 10, path("lab.idx"));
  EXPECT_EQ(back.sample_shape(), (Shape{1, 2, 3}));
  EXPECT_EQ(back, d);
}

TEST_F(DataFiles, IdxRawBytesScaled) {
  const auto img = write("img", be32(0x803) + be32(1) + be32(1) + be32(2) + std::string{'\x00', '\xff'});
  const auto lab = write("lab", be32(0x801) + be32(1) + std::string{'\x01'});
  const auto d = load_dataset(img, DatasetFormat::kIdx, 2, lab);
  EXPECT_EQ(d.features(0)[0], 0.0);
  EXPECT_EQ(d.features(0)[1], 1.0);
  EXPECT_EQ(d.label(0), 1u);
}

TEST_F(DataFiles, IdxErrors) {
  const auto lab = write("lab", be32(0x801) + be32(1) + std::string{'\x01'});
  try {
    load_dataset(write("bad", be32(0x802) + be32(1) + be32(1) + be32(1) + std::string{'\x00'}), DatasetFormat::kIdx,
                 2, lab);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  EXPECT_THROW(load_dataset(write("short", be32(0x803) + be32(1) + be32(2) + be32(2) + std::string{'\x00'}),
                            DatasetFormat::kIdx, 2, lab),
               ParseError);
  EXPECT_THROW(load_dataset(write("hdr", be32(0x803) + be32(1)), DatasetFormat::kIdx, 2, lab), ParseError);
  const auto img = write("img", be32(0x803) + be32(1) + be32(1) + be32(1) + std::string{'\x00'});
  const auto high = write("high", be32(0x801) + be32(1) + std::string{'\x07'});
  try {
    load_dataset(img, DatasetFormat::kIdx, 5, high);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 8u);
  }
  EXPECT_THROW(load_dataset(img, DatasetFormat::kIdx, 5, ""), DataError);
}

TEST(Blobs, BalancedDeterministicAndSeedDependent) {
  BlobSpec spec;
  spec.samples = 1000;
  const auto a = make_blobs(spec, 1);
  EXPECT_EQ(a, make_blobs(spec, 1));
  EXPECT_NE(a, make_blobs(spec, 2));
  for (auto h : a.class_histogram()) EXPECT_EQ(h, 100u);
  EXPECT_EQ(a.sample_shape(), (Shape{spec.dim}));
}

TEST(Format, Parse) {
  EXPECT_EQ(parse_dataset_format("csv"), DatasetFormat::kCsv);
  EXPECT_EQ(parse_dataset_format("idx"), DatasetFormat::kIdx);
  EXPECT_THROW(parse_dataset_format("parquet"), ConfigError);
}

}  // namespace
}  // namespace dualfed
