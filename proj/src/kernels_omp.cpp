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
// OpenMP kernels. Loops are reordered so the innermost loop runs over
// contiguous outputs, but each output still sees its terms in the same order
// as the serial reference.

#include <algorithm>
#include <cmath>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dualfed/kernels.hpp"

namespace dualfed::kernels {

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace parallel {
namespace {
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kGrain = std::size_t{1} << 15;

inline bool worth_it(std::size_t work) { return work >= kGrain; }
}  // namespace

void dense_forward(const DenseDims& d, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y) {
  const auto batch = static_cast<std::int64_t>(d.batch);
#pragma omp parallel for schedule(static) if (worth_it(d.batch * d.in * d.out))
  for (std::int64_t n = 0; n < batch; ++n) {
    double* row = y.data() + n * d.out;
    std::copy(b.begin(), b.begin() + d.out, row);
    const double* xr = x.data() + n * d.in;
    for (std::size_t i = 0; i < d.in; ++i) {
      const double xi = xr[i];
      const double* wr = w.data() + i * d.out;
      for (std::size_t o = 0; o < d.out; ++o) row[o] += xi * wr[o];
    }
  }
}

void dense_backward_params(const DenseDims& d, std::span<const double> x, std::span<const double> dy,
                           std::span<double> dw, std::span<double> db) {
  const auto in = static_cast<std::int64_t>(d.in);
  const bool par = worth_it(d.batch * d.in * d.out);
#pragma omp parallel if (par)
  {
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < in; ++i) {
      double* row = dw.data() + i * d.out;
      std::fill(row, row + d.out, 0.0);
      for (std::size_t n = 0; n < d.batch; ++n) {
        const double xi = x[n * d.in + i];
        const double* g = dy.data() + n * d.out;
        for (std::size_t o = 0; o < d.out; ++o) row[o] += xi * g[o];
      }
    }
#pragma omp single
    {
      std::fill(db.begin(), db.begin() + d.out, 0.0);
      for (std::size_t n = 0; n < d.batch; ++n) {
        const double* g = dy.data() + n * d.out;
        for (std::size_t o = 0; o < d.out; ++o) db[o] += g[o];
      }
    }
  }
}

void dense_backward_input(const DenseDims& d, std::span<const double> dy, std::span<const double> w,
                          std::span<double> dx) {
  const auto batch = static_cast<std::int64_t>(d.batch);
#pragma omp parallel for schedule(static) if (worth_it(d.batch * d.in * d.out))
  for (std::int64_t n = 0; n < batch; ++n) {
    const double* g = dy.data() + n * d.out;
    for (std::size_t i = 0; i < d.in; ++i) {
      const double* wr = w.data() + i * d.out;
      double acc = 0.0;
      for (std::size_t o = 0; o < d.out; ++o) acc += g[o] * wr[o];
      dx[n * d.in + i] = acc;
    }
  }
}

void conv2d_forward(const ConvDims& d, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  const std::size_t oh = d.out_height(), ow = d.out_width(), k = d.kernel;
  const auto planes = static_cast<std::int64_t>(d.batch * d.out_ch);
#pragma omp parallel for schedule(static) if (worth_it(d.batch * d.out_ch * d.in_ch * k * k * oh * ow))
  for (std::int64_t p = 0; p < planes; ++p) {
    const std::size_t n = p / d.out_ch, co = p % d.out_ch;
    double* out = y.data() + p * oh * ow;
    std::fill(out, out + oh * ow, b[co]);
    for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
      const double* src = x.data() + (n * d.in_ch + ci) * d.height * d.width;
      for (std::size_t ky = 0; ky < k; ++ky)
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double wv = w[((co * d.in_ch + ci) * k + ky) * k + kx];
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const double* s = src + (oy + ky) * d.width + kx;
            double* o = out + oy * ow;
            for (std::size_t ox = 0; ox < ow; ++ox) o[ox] += s[ox] * wv;
          }
        }
    }
  }
}

void conv2d_backward_params(const ConvDims& d, std::span<const double> x, std::span<const double> dy,
                            std::span<double> dw, std::span<double> db) {
  const std::size_t oh = d.out_height(), ow = d.out_width(), k = d.kernel;
  const auto out_ch = static_cast<std::int64_t>(d.out_ch);
#pragma omp parallel for schedule(static) if (worth_it(d.batch * d.out_ch * d.in_ch * k * k * oh * ow))
  for (std::int64_t co = 0; co < out_ch; ++co) {
    for (std::size_t ci = 0; ci < d.in_ch; ++ci)
      for (std::size_t ky = 0; ky < k; ++ky)
        for (std::size_t kx = 0; kx < k; ++kx) {
          double acc = 0.0;
          for (std::size_t n = 0; n < d.batch; ++n) {
            const double* g = dy.data() + (n * d.out_ch + co) * oh * ow;
            const double* src = x.data() + (n * d.in_ch + ci) * d.height * d.width;
            for (std::size_t oy = 0; oy < oh; ++oy) {
              const double* s = src + (oy + ky) * d.width + kx;
              for (std::size_t ox = 0; ox < ow; ++ox) acc += g[oy * ow + ox] * s[ox];
            }
          }
          dw[((co * d.in_ch + ci) * k + ky) * k + kx] = acc;
        }
    double acc = 0.0;
    for (std::size_t n = 0; n < d.batch; ++n) {
      const double* g = dy.data() + (n * d.out_ch + co) * oh * ow;
      for (std::size_t j = 0; j < oh * ow; ++j) acc += g[j];
    }
    db[co] = acc;
  }
}

void conv2d_backward_input(const ConvDims& d, std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx) {
  const std::size_t oh = d.out_height(), ow = d.out_width(), k = d.kernel;
  const auto planes = static_cast<std::int64_t>(d.batch * d.in_ch);
#pragma omp parallel for schedule(static) if (worth_it(d.batch * d.out_ch * d.in_ch * k * k * oh * ow))
  for (std::int64_t p = 0; p < planes; ++p) {
    const std::size_t n = p / d.in_ch, ci = p % d.in_ch;
    double* out = dx.data() + p * d.height * d.width;
    std::fill(out, out + d.height * d.width, 0.0);
    for (std::size_t co = 0; co < d.out_ch; ++co) {
      const double* g = dy.data() + (n * d.out_ch + co) * oh * ow;
      for (std::size_t ky = 0; ky < k; ++ky)
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double wv = w[((co * d.in_ch + ci) * k + ky) * k + kx];
          for (std::size_t oy = 0; oy < oh; ++oy) {
            double* o = out + (oy + ky) * d.width + kx;
            const double* gr = g + oy * ow;
            for (std::size_t ox = 0; ox < ow; ++ox) o[ox] += gr[ox] * wv;
          }
        }
    }
  }
}

void maxpool2d_forward(const PoolDims& d, std::span<const double> x, std::span<double> y) {
  const std::size_t oh = d.out_height(), ow = d.out_width();
  const auto planes = static_cast<std::int64_t>(d.batch * d.channels);
#pragma omp parallel for schedule(static) if (worth_it(d.batch * d.channels * d.height * d.width))
  for (std::int64_t p = 0; p < planes; ++p) {
    const double* src = x.data() + p * d.height * d.width;
    double* out = y.data() + p * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double* s = src + 2 * oy * d.width + 2 * ox;
        double best = s[0];
        best = std::max(best, s[1]);
        best = std::max(best, s[d.width]);
        best = std::max(best, s[d.width + 1]);
        out[oy * ow + ox] = best;
      }
  }
}

void maxpool2d_backward(const PoolDims& d, std::span<const double> x, std::span<const double> dy,
                        std::span<double> dx) {
  const std::size_t oh = d.out_height(), ow = d.out_width();
  const auto planes = static_cast<std::int64_t>(d.batch * d.channels);
#pragma omp parallel for schedule(static) if (worth_it(d.batch * d.channels * d.height * d.width))
  for (std::int64_t p = 0; p < planes; ++p) {
    const std::size_t base = p * d.height * d.width;
    std::fill(dx.begin() + base, dx.begin() + base + d.height * d.width, 0.0);
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t first = base + 2 * oy * d.width + 2 * ox;
        const std::size_t cand[4] = {first, first + 1, first + d.width, first + d.width + 1};
        std::size_t arg = first;
        for (std::size_t c : cand)
          if (x[c] > x[arg]) arg = c;
        dx[arg] += dy[p * oh * ow + oy * ow + ox];
      }
  }
}

void relu_forward(std::span<const double> x, std::span<double> y) {
  const auto n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static) if (worth_it(x.size()))
  for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx) {
  const auto n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static) if (worth_it(x.size()))
  for (std::int64_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> z, std::span<double> p) {
  const auto r_count = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) if (worth_it(rows * cols * 8))
  for (std::int64_t r = 0; r < r_count; ++r) {
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
  constexpr std::size_t kChunk = 4096;
  const auto chunks = static_cast<std::int64_t>((out.size() + kChunk - 1) / kChunk);
#pragma omp parallel for schedule(static) if (worth_it(out.size() * inputs.size()))
  for (std::int64_t c = 0; c < chunks; ++c) {
    const std::size_t lo = c * kChunk, hi = std::min(out.size(), lo + kChunk);
    const double w0 = weights[0];
    const double* x0 = inputs[0].data();
    for (std::size_t j = lo; j < hi; ++j) out[j] = w0 * x0[j];
    for (std::size_t k = 1; k < inputs.size(); ++k) {
      const double wk = weights[k];
      const double* xk = inputs[k].data();
      for (std::size_t j = lo; j < hi; ++j) out[j] += wk * xk[j];
    }
  }
}

void sgd_update(double lr, std::span<const double> g, std::span<double> p) {
  const auto n = static_cast<std::int64_t>(p.size());
#pragma omp parallel for schedule(static) if (worth_it(p.size()))
  for (std::int64_t i = 0; i < n; ++i) p[i] -= lr * g[i];
}

}  // namespace parallel
}  // namespace dualfed::kernels
