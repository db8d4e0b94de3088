// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

// Reference kernels. Straight loops, no blocking, no threads.

#include <algorithm>
#include <cmath>
#include <vector>

#include "lsac/kernels.hpp"

namespace lsac::kernels::serial {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool trans_a, bool trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                double av = trans_a ? a[p * m + i] : a[i * k + p];
                double bv = trans_b ? b[j * k + p] : b[p * n + j];
                acc += av * bv;
            }
            c[i * n + j] = acc;
        }
    }
}

void im2col(std::span<const double> input, std::span<double> col, const ConvGeometry& g) {
    const std::size_t oh = g.out_h(), ow = g.out_w();
    for (std::size_t ch = 0; ch < g.channels; ++ch) {
        for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
            for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
                const std::size_t row = (ch * g.kernel_h + ki) * g.kernel_w + kj;
                for (std::size_t y = 0; y < oh; ++y) {
                    for (std::size_t x = 0; x < ow; ++x) {
                        long iy = static_cast<long>(y * g.stride + ki) - static_cast<long>(g.padding);
                        long ix = static_cast<long>(x * g.stride + kj) - static_cast<long>(g.padding);
                        double v = 0.0;
                        if (iy >= 0 && ix >= 0 && iy < static_cast<long>(g.height) &&
                            ix < static_cast<long>(g.width)) {
                            v = input[(ch * g.height + iy) * g.width + ix];
                        }
                        col[row * oh * ow + y * ow + x] = v;
                    }
                }
            }
        }
    }
}

void col2im(std::span<const double> col, std::span<double> grad, const ConvGeometry& g) {
    const std::size_t oh = g.out_h(), ow = g.out_w();
    for (std::size_t ch = 0; ch < g.channels; ++ch) {
        for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
            for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
                const std::size_t row = (ch * g.kernel_h + ki) * g.kernel_w + kj;
                for (std::size_t y = 0; y < oh; ++y) {
                    for (std::size_t x = 0; x < ow; ++x) {
                        long iy = static_cast<long>(y * g.stride + ki) - static_cast<long>(g.padding);
                        long ix = static_cast<long>(x * g.stride + kj) - static_cast<long>(g.padding);
                        if (iy >= 0 && ix >= 0 && iy < static_cast<long>(g.height) &&
                            ix < static_cast<long>(g.width)) {
                            grad[(ch * g.height + iy) * g.width + ix] += col[row * oh * ow + y * ow + x];
                        }
                    }
                }
            }
        }
    }
}

void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = x[r * cols];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[r * cols + j]);
        double total = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            y[r * cols + j] = std::exp(x[r * cols + j] - mx);
            total += y[r * cols + j];
        }
        for (std::size_t j = 0; j < cols; ++j) y[r * cols + j] /= total;
    }
}

void layer_norm_rows(std::span<const double> x, std::span<const double> gamma,
                     std::span<const double> beta, std::span<double> y, std::span<double> mean,
                     std::span<double> rstd, std::size_t rows, std::size_t cols, double eps) {
    for (std::size_t r = 0; r < rows; ++r) {
        double mu = 0.0;
        for (std::size_t j = 0; j < cols; ++j) mu += x[r * cols + j];
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            double d = x[r * cols + j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        double rs = 1.0 / std::sqrt(var + eps);
        mean[r] = mu;
        rstd[r] = rs;
        for (std::size_t j = 0; j < cols; ++j) {
            y[r * cols + j] = (x[r * cols + j] - mu) * rs * gamma[j] + beta[j];
        }
    }
}

void gelu(std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * M_SQRT1_2));
    }
}

void permute(std::span<const double> in, std::span<double> out,
             std::span<const std::size_t> shape, std::span<const std::size_t> perm) {
    const std::size_t rank = shape.size();
    std::vector<std::size_t> in_strides(rank, 1);
    for (std::size_t d = rank; d-- > 1;) in_strides[d - 1] = in_strides[d] * shape[d];
    std::vector<std::size_t> out_shape(rank);
    for (std::size_t d = 0; d < rank; ++d) out_shape[d] = shape[perm[d]];

    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        std::size_t rem = flat;
        for (std::size_t d = rank; d-- > 0;) {
            idx[d] = rem % out_shape[d];
            rem /= out_shape[d];
        }
        std::size_t src = 0;
        for (std::size_t d = 0; d < rank; ++d) src += idx[d] * in_strides[perm[d]];
        out[flat] = in[src];
    }
}

}  // namespace lsac::kernels::serial
