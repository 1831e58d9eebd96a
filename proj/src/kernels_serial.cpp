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
// Reference kernels: one output element at a time, innermost loop is the reduction.

#include <algorithm>
#include <atomic>
#include <cmath>

#include "dualfed/kernels.hpp"

namespace dualfed::kernels {
namespace serial {

void dense_forward(const DenseDims& d, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y) {
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t o = 0; o < d.out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < d.in; ++i) acc += x[n * d.in + i] * w[i * d.out + o];
      y[n * d.out + o] = acc;
    }
  }
}

void dense_backward_params(const DenseDims& d, std::span<const double> x, std::span<const double> dy,
                           std::span<double> dw, std::span<double> db) {
  for (std::size_t i = 0; i < d.in; ++i) {
    for (std::size_t o = 0; o < d.out; ++o) {
      double acc = 0.0;
      for (std::size_t n = 0; n < d.batch; ++n) acc += x[n * d.in + i] * dy[n * d.out + o];
      dw[i * d.out + o] = acc;
    }
  }
  for (std::size_t o = 0; o < d.out; ++o) {
    double acc = 0.0;
    for (std::size_t n = 0; n < d.batch; ++n) acc += dy[n * d.out + o];
    db[o] = acc;
  }
}

void dense_backward_input(const DenseDims& d, std::span<const double> dy, std::span<const double> w,
                          std::span<double> dx) {
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t i = 0; i < d.in; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < d.out; ++o) acc += dy[n * d.out + o] * w[i * d.out + o];
      dx[n * d.in + i] = acc;
    }
  }
}

void conv2d_forward(const ConvDims& d, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  const std::size_t oh = d.out_height(), ow = d.out_width(), k = d.kernel;
  for (std::size_t n = 0; n < d.batch; ++n)
    for (std::size_t co = 0; co < d.out_ch; ++co)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = b[co];
          for (std::size_t ci = 0; ci < d.in_ch; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const double xv = x[((n * d.in_ch + ci) * d.height + oy + ky) * d.width + ox + kx];
                acc += xv * w[((co * d.in_ch + ci) * k + ky) * k + kx];
              }
          y[((n * d.out_ch + co) * oh + oy) * ow + ox] = acc;
        }
}

void conv2d_backward_params(const ConvDims& d, std::span<const double> x, std::span<const double> dy,
                            std::span<double> dw, std::span<double> db) {
  const std::size_t oh = d.out_height(), ow = d.out_width(), k = d.kernel;
  for (std::size_t co = 0; co < d.out_ch; ++co) {
    for (std::size_t ci = 0; ci < d.in_ch; ++ci)
      for (std::size_t ky = 0; ky < k; ++ky)
        for (std::size_t kx = 0; kx < k; ++kx) {
          double acc = 0.0;
          for (std::size_t n = 0; n < d.batch; ++n)
            for (std::size_t oy = 0; oy < oh; ++oy)
              for (std::size_t ox = 0; ox < ow; ++ox)
                acc += dy[((n * d.out_ch + co) * oh + oy) * ow + ox] *
                       x[((n * d.in_ch + ci) * d.height + oy + ky) * d.width + ox + kx];
          dw[((co * d.in_ch + ci) * k + ky) * k + kx] = acc;
        }
    double acc = 0.0;
    for (std::size_t n = 0; n < d.batch; ++n)
      for (std::size_t j = 0; j < oh * ow; ++j) acc += dy[(n * d.out_ch + co) * oh * ow + j];
    db[co] = acc;
  }
}

void conv2d_backward_input(const ConvDims& d, std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx) {
  const std::size_t oh = d.out_height(), ow = d.out_width(), k = d.kernel;
  for (std::size_t n = 0; n < d.batch; ++n)
    for (std::size_t ci = 0; ci < d.in_ch; ++ci)
      for (std::size_t yy = 0; yy < d.height; ++yy)
        for (std::size_t xx = 0; xx < d.width; ++xx) {
          double acc = 0.0;
          for (std::size_t co = 0; co < d.out_ch; ++co)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                if (yy < ky || xx < kx) continue;
                const std::size_t oy = yy - ky, ox = xx - kx;
                if (oy >= oh || ox >= ow) continue;
                acc += dy[((n * d.out_ch + co) * oh + oy) * ow + ox] *
                       w[((co * d.in_ch + ci) * k + ky) * k + kx];
              }
          dx[((n * d.in_ch + ci) * d.height + yy) * d.width + xx] = acc;
        }
}

void maxpool2d_forward(const PoolDims& d, std::span<const double> x, std::span<double> y) {
  const std::size_t oh = d.out_height(), ow = d.out_width();
  for (std::size_t plane = 0; plane < d.batch * d.channels; ++plane)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double* src = x.data() + plane * d.height * d.width;
        double best = src[(2 * oy) * d.width + 2 * ox];
        for (std::size_t ky = 0; ky < 2; ++ky)
          for (std::size_t kx = 0; kx < 2; ++kx) best = std::max(best, src[(2 * oy + ky) * d.width + 2 * ox + kx]);
        y[(plane * oh + oy) * ow + ox] = best;
      }
}

void maxpool2d_backward(const PoolDims& d, std::span<const double> x, std::span<const double> dy,
                        std::span<double> dx) {
  const std::size_t oh = d.out_height(), ow = d.out_width();
  std::fill(dx.begin(), dx.end(), 0.0);
  for (std::size_t plane = 0; plane < d.batch * d.channels; ++plane)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t base = plane * d.height * d.width;
        std::size_t arg = base + (2 * oy) * d.width + 2 * ox;
        for (std::size_t ky = 0; ky < 2; ++ky)
          for (std::size_t kx = 0; kx < 2; ++kx) {
            const std::size_t idx = base + (2 * oy + ky) * d.width + 2 * ox + kx;
            if (x[idx] > x[arg]) arg = idx;
          }
        dx[arg] += dy[(plane * oh + oy) * ow + ox];
      }
}

void relu_forward(std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx) {
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> z, std::span<double> p) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = z.data() + r * cols;
    double* pr = p.data() + r * cols;
    double m = zr[0];
    for (std::size_t c = 1; c < cols; ++c) m = std::max(m, zr[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      pr[c] = std::exp(zr[c] - m);
      sum += pr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) pr[c] /= sum;
  }
}

void weighted_sum(std::span<const std::span<const double>> inputs, std::span<const double> weights,
                  std::span<double> out) {
  for (std::size_t j = 0; j < out.size(); ++j) {
    double acc = weights[0] * inputs[0][j];
    for (std::size_t k = 1; k < inputs.size(); ++k) acc += weights[k] * inputs[k][j];
    out[j] = acc;
  }
}

void sgd_update(double lr, std::span<const double> g, std::span<double> p) {
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
}

}  // namespace serial

namespace {
std::atomic<Backend> g_backend{Backend::kParallel};
}  // namespace

void set_backend(Backend b) noexcept { g_backend.store(b, std::memory_order_relaxed); }
Backend backend() noexcept { return g_backend.load(std::memory_order_relaxed); }

#define DUALFED_DISPATCH(name, ...)                 \
  if (backend() == Backend::kSerial) {             \
    serial::name(__VA_ARGS__);                     \
  } else {                                         \
    parallel::name(__VA_ARGS__);                   \
  }

void dense_forward(const DenseDims& d, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y) {
  DUALFED_DISPATCH(dense_forward, d, x, w, b, y)
}
void dense_backward_params(const DenseDims& d, std::span<const double> x, std::span<const double> dy,
                           std::span<double> dw, std::span<double> db) {
  DUALFED_DISPATCH(dense_backward_params, d, x, dy, dw, db)
}
void dense_backward_input(const DenseDims& d, std::span<const double> dy, std::span<const double> w,
                          std::span<double> dx) {
  DUALFED_DISPATCH(dense_backward_input, d, dy, w, dx)
}
void conv2d_forward(const ConvDims& d, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  DUALFED_DISPATCH(conv2d_forward, d, x, w, b, y)
}
void conv2d_backward_params(const ConvDims& d, std::span<const double> x, std::span<const double> dy,
                            std::span<double> dw, std::span<double> db) {
  DUALFED_DISPATCH(conv2d_backward_params, d, x, dy, dw, db)
}
void conv2d_backward_input(const ConvDims& d, std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx) {
  DUALFED_DISPATCH(conv2d_backward_input, d, dy, w, dx)
}
void maxpool2d_forward(const PoolDims& d, std::span<const double> x, std::span<double> y) {
  DUALFED_DISPATCH(maxpool2d_forward, d, x, y)
}
void maxpool2d_backward(const PoolDims& d, std::span<const double> x, std::span<const double> dy,
                        std::span<double> dx) {
  DUALFED_DISPATCH(maxpool2d_backward, d, x, dy, dx)
}
void relu_forward(std::span<const double> x, std::span<double> y) { DUALFED_DISPATCH(relu_forward, x, y) }
void relu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx) {
  DUALFED_DISPATCH(relu_backward, x, dy, dx)
}
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> z, std::span<double> p) {
  DUALFED_DISPATCH(softmax_rows, rows, cols, z, p)
}
void weighted_sum(std::span<const std::span<const double>> inputs, std::span<const double> weights,
                  std::span<double> out) {
  DUALFED_DISPATCH(weighted_sum, inputs, weights, out)
}
void sgd_update(double lr, std::span<const double> g, std::span<double> p) {
  DUALFED_DISPATCH(sgd_update, lr, g, p)
}

#undef DUALFED_DISPATCH

}  // namespace dualfed::kernels
