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
#include <omp.h>

#include "dualfed/kernels.hpp"
#include "test_support.hpp"

namespace dualfed {
namespace {

using testing::random_tensor;
using testing::uniform_index;

class KernelsTest : public ::testing::Test {
 protected:
  void SetUp() override {
    threads_ = omp_get_max_threads();
    omp_set_num_threads(4);
  }
  void TearDown() override { omp_set_num_threads(threads_); }

  Rng rng_{1234};
  int threads_ = 1;
};

std::vector<double> zeros(std::size_t n) { return std::vector<double>(n, 0.0); }

TEST_F(KernelsTest, DenseMatchesSerialBitForBit) {
  for (int trial = 0; trial < 30; ++trial) {
    // Large enough batches cross the parallel grain size.
    kernels::DenseDims d{uniform_index(rng_, 1, 600), uniform_index(rng_, 1, 40), uniform_index(rng_, 1, 40)};
    auto x = random_tensor({d.batch * d.in}, rng_);
    auto w = random_tensor({d.in * d.out}, rng_);
    auto b = random_tensor({d.out}, rng_);
    auto dy = random_tensor({d.batch * d.out}, rng_);
    auto y1 = zeros(d.batch * d.out), y2 = y1;
    kernels::serial::dense_forward(d, x.values(), w.values(), b.values(), y1);
    kernels::parallel::dense_forward(d, x.values(), w.values(), b.values(), y2);
    EXPECT_EQ(y1, y2);
    auto dw1 = zeros(d.in * d.out), dw2 = dw1, db1 = zeros(d.out), db2 = db1;
    kernels::serial::dense_backward_params(d, x.values(), dy.values(), dw1, db1);
    kernels::parallel::dense_backward_params(d, x.values(), dy.values(), dw2, db2);
    EXPECT_EQ(dw1, dw2);
    EXPECT_EQ(db1, db2);
    auto dx1 = zeros(d.batch * d.in), dx2 = dx1;
    kernels::serial::dense_backward_input(d, dy.values(), w.values(), dx1);
    kernels::parallel::dense_backward_input(d, dy.values(), w.values(), dx2);
    EXPECT_EQ(dx1, dx2);
  }
}

TEST_F(KernelsTest, ConvAndPoolMatchSerialBitForBit) {
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t k = uniform_index(rng_, 1, 5);
    kernels::ConvDims d{uniform_index(rng_, 1, 24), uniform_index(rng_, 1, 3), uniform_index(rng_, 1, 6),
                        uniform_index(rng_, k, 14), uniform_index(rng_, k, 14), k};
    const std::size_t out_sz = d.batch * d.out_ch * d.out_height() * d.out_width();
    auto x = random_tensor({d.batch * d.in_ch * d.height * d.width}, rng_);
    auto w = random_tensor({d.out_ch * d.in_ch * k * k}, rng_);
    auto b = random_tensor({d.out_ch}, rng_);
    auto dy = random_tensor({out_sz}, rng_);
    auto y1 = zeros(out_sz), y2 = y1;
    kernels::serial::conv2d_forward(d, x.values(), w.values(), b.values(), y1);
    kernels::parallel::conv2d_forward(d, x.values(), w.values(), b.values(), y2);
    EXPECT_EQ(y1, y2);
    auto dw1 = zeros(w.size()), dw2 = dw1, db1 = zeros(b.size()), db2 = db1;
    kernels::serial::conv2d_backward_params(d, x.values(), dy.values(), dw1, db1);
    kernels::parallel::conv2d_backward_params(d, x.values(), dy.values(), dw2, db2);
    EXPECT_EQ(dw1, dw2);
    EXPECT_EQ(db1, db2);
    auto dx1 = zeros(x.size()), dx2 = dx1;
    kernels::serial::conv2d_backward_input(d, dy.values(), w.values(), dx1);
    kernels::parallel::conv2d_backward_input(d, dy.values(), w.values(), dx2);
    EXPECT_EQ(dx1, dx2);

    kernels::PoolDims p{d.batch, d.in_ch, d.height, d.width};
    const std::size_t pool_sz = p.batch * p.channels * p.out_height() * p.out_width();
    auto py1 = zeros(pool_sz), py2 = py1;
    kernels::serial::maxpool2d_forward(p, x.values(), py1);
    kernels::parallel::maxpool2d_forward(p, x.values(), py2);
    EXPECT_EQ(py1, py2);
    auto pdy = random_tensor({pool_sz}, rng_);
    auto pdx1 = zeros(x.size()), pdx2 = pdx1;
    kernels::serial::maxpool2d_backward(p, x.values(), pdy.values(), pdx1);
    kernels::parallel::maxpool2d_backward(p, x.values(), pdy.values(), pdx2);
    EXPECT_EQ(pdx1, pdx2);
  }
}

TEST_F(KernelsTest, ElementwiseKernelsMatchSerial) {
  const std::size_t n = 100000;
  auto x = random_tensor({n}, rng_, -5, 5);
  auto g = random_tensor({n}, rng_);
  auto y1 = zeros(n), y2 = y1;
  kernels::serial::relu_forward(x.values(), y1);
  kernels::parallel::relu_forward(x.values(), y2);
  EXPECT_EQ(y1, y2);
  kernels::serial::relu_backward(x.values(), g.values(), y1);
  kernels::parallel::relu_backward(x.values(), g.values(), y2);
  EXPECT_EQ(y1, y2);
  kernels::serial::softmax_rows(1000, 100, x.values(), y1);
  kernels::parallel::softmax_rows(1000, 100, x.values(), y2);
  EXPECT_EQ(y1, y2);
  auto p1 = x, p2 = x;
  kernels::serial::sgd_update(0.1, g.values(), p1.values());
  kernels::parallel::sgd_update(0.1, g.values(), p2.values());
  EXPECT_EQ(p1, p2);

  std::vector<Tensor> inputs;
  std::vector<std::span<const double>> views;
  std::vector<double> weights;
  for (int k = 0; k < 5; ++k) {
    inputs.push_back(random_tensor({n}, rng_));
    weights.push_back(testing::uniform_real(rng_, 0, 1));
  }
  for (const auto& t : inputs) views.push_back(t.values());
  kernels::serial::weighted_sum(views, weights, y1);
  kernels::parallel::weighted_sum(views, weights, y2);
  EXPECT_EQ(y1, y2);
}

TEST_F(KernelsTest, DenseIdentityWeights) {
  kernels::DenseDims d{1, 2, 2};
  std::vector<double> x{1, 2}, w{1, 0, 0, 1}, b{0, 0}, y(2);
  kernels::dense_forward(d, x, w, b, y);
  EXPECT_EQ(y, (std::vector<double>{1, 2}));
}

TEST_F(KernelsTest, ConvSinglePixelKernelScales) {
  // A 1x1 kernel of weight 2 doubles every pixel and adds the bias.
  kernels::ConvDims d{1, 1, 1, 2, 2, 1};
  std::vector<double> x{1, 2, 3, 4}, w{2}, b{0.5}, y(4);
  kernels::conv2d_forward(d, x, w, b, y);
  EXPECT_EQ(y, (std::vector<double>{2.5, 4.5, 6.5, 8.5}));
}

TEST_F(KernelsTest, MaxPoolPicksWindowMaximum) {
  kernels::PoolDims d{1, 1, 2, 4};
  std::vector<double> x{1, 5, 2, 0, 3, 4, 7, 1}, y(2), dx(8);
  kernels::maxpool2d_forward(d, x, y);
  EXPECT_EQ(y, (std::vector<double>{5, 7}));
  std::vector<double> dy{1, 2};
  kernels::maxpool2d_backward(d, x, dy, dx);
  EXPECT_EQ(dx, (std::vector<double>{0, 1, 0, 0, 0, 0, 2, 0}));
}

TEST_F(KernelsTest, BackendSwitchIsGlobal) {
  kernels::set_backend(kernels::Backend::kSerial);
  EXPECT_EQ(kernels::backend(), kernels::Backend::kSerial);
  kernels::set_backend(kernels::Backend::kParallel);
  EXPECT_EQ(kernels::backend(), kernels::Backend::kParallel);
  EXPECT_GE(kernels::max_threads(), 1);
}

}  // namespace
}  // namespace dualfed
