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

// Data-parallel numeric kernels behind the nn engine.
//
// Every kernel exists twice: `serial::` is a plain textbook loop nest kept as
// the reference, `parallel::` is the OpenMP version with cache-friendly loop
// order. Both accumulate each output element over the same terms in the same
// order, so their results are bit-identical. Tests rely on that.

#include <cstddef>
#include <span>

namespace dualfed::kernels {

enum class Backend { kSerial, kParallel };

/// Process-wide backend used by the dispatching wrappers below.
void set_backend(Backend backend) noexcept;
Backend backend() noexcept;

/// Threads the parallel backend may use (1 when built without OpenMP).
int max_threads() noexcept;

struct DenseDims {
  std::size_t batch;
  std::size_t in;
  std::size_t out;
};

// Feature maps are NCHW, conv weights are [out_ch, in_ch, k, k], stride 1, no padding.
struct ConvDims {
  std::size_t batch;
  std::size_t in_ch;
  std::size_t out_ch;
  std::size_t height;
  std::size_t width;
  std::size_t kernel;

  std::size_t out_height() const { return height - kernel + 1; }
  std::size_t out_width() const { return width - kernel + 1; }
};

// 2x2 window, stride 2; odd trailing rows/columns are dropped.
struct PoolDims {
  std::size_t batch;
  std::size_t channels;
  std::size_t height;
  std::size_t width;

  std::size_t out_height() const { return height / 2; }
  std::size_t out_width() const { return width / 2; }
};

#define DUALFED_KERNEL_DECLS                                                                     \
  /* y[n,o] = b[o] + sum_i x[n,i] w[i,o];  w is [in, out] */                                     \
  void dense_forward(const DenseDims& d, std::span<const double> x, std::span<const double> w,    \
                     std::span<const double> b, std::span<double> y);                            \
  void dense_backward_params(const DenseDims& d, std::span<const double> x,                      \
                             std::span<const double> dy, std::span<double> dw,                   \
                             std::span<double> db);                                              \
  void dense_backward_input(const DenseDims& d, std::span<const double> dy,                      \
                            std::span<const double> w, std::span<double> dx);                    \
  void conv2d_forward(const ConvDims& d, std::span<const double> x, std::span<const double> w,   \
                      std::span<const double> b, std::span<double> y);                           \
  void conv2d_backward_params(const ConvDims& d, std::span<const double> x,                      \
                              std::span<const double> dy, std::span<double> dw,                  \
                              std::span<double> db);                                             \
  void conv2d_backward_input(const ConvDims& d, std::span<const double> dy,                      \
                             std::span<const double> w, std::span<double> dx);                   \
  void maxpool2d_forward(const PoolDims& d, std::span<const double> x, std::span<double> y);     \
  void maxpool2d_backward(const PoolDims& d, std::span<const double> x,                          \
                          std::span<const double> dy, std::span<double> dx);                     \
  void relu_forward(std::span<const double> x, std::span<double> y);                             \
  void relu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx); \
  /* row-wise softmax with max subtraction */                                                    \
  void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> z,               \
                    std::span<double> p);                                                        \
  /* out = sum_k weights[k] * inputs[k], summed in k order starting from the k=0 term */         \
  void weighted_sum(std::span<const std::span<const double>> inputs,                             \
                    std::span<const double> weights, std::span<double> out);                     \
  /* p -= lr * g */                                                                              \
  void sgd_update(double lr, std::span<const double> g, std::span<double> p);

namespace serial {
DUALFED_KERNEL_DECLS
}  // namespace serial

namespace parallel {
DUALFED_KERNEL_DECLS
}  // namespace parallel

// Dispatch to the active backend.
DUALFED_KERNEL_DECLS

#undef DUALFED_KERNEL_DECLS

}  // namespace dualfed::kernels
