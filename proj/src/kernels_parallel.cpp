// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lsac/kernels.hpp"

namespace lsac::kernels {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace parallel {
namespace {

// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kMinParallelWork = 1 << 15;

std::vector<double> transposed(std::span<const double> src, std::size_t rows, std::size_t cols) {
    std::vector<double> dst(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
    }
    return dst;
}

}  // namespace

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool trans_a, bool trans_b) {
    // Pack both operands row-major so the inner loop streams contiguous rows.
    std::vector<double> a_packed, b_packed;
    const double* ap = a.data();
    const double* bp = b.data();
    if (trans_a) {
        a_packed = transposed(a, k, m);
        ap = a_packed.data();
    }
    if (trans_b) {
        b_packed = transposed(b, n, k);
        bp = b_packed.data();
    }
    double* cp = c.data();
    const long rows = static_cast<long>(m);

#pragma omp parallel for schedule(static) if (m * k * n >= kMinParallelWork && m > 1)
    for (long i = 0; i < rows; ++i) {
        double* crow = cp + i * n;
        std::fill(crow, crow + n, 0.0);
        const double* arow = ap + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = bp + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void im2col(std::span<const double> input, std::span<double> col, const ConvGeometry& g) {
    const std::size_t oh = g.out_h(), ow = g.out_w();
    const long rows = static_cast<long>(g.col_rows());
    const long pad = static_cast<long>(g.padding);

#pragma omp parallel for schedule(static) if (g.col_rows() * oh * ow >= kMinParallelWork)
    for (long row = 0; row < rows; ++row) {
        const std::size_t kj = row % g.kernel_w;
        const std::size_t ki = (row / g.kernel_w) % g.kernel_h;
        const std::size_t ch = row / (g.kernel_w * g.kernel_h);
        const double* plane = input.data() + ch * g.height * g.width;
        double* out = col.data() + row * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
            const long iy = static_cast<long>(y * g.stride + ki) - pad;
            if (iy < 0 || iy >= static_cast<long>(g.height)) {
                std::fill(out + y * ow, out + (y + 1) * ow, 0.0);
                continue;
            }
            for (std::size_t x = 0; x < ow; ++x) {
                const long ix = static_cast<long>(x * g.stride + kj) - pad;
                out[y * ow + x] = (ix < 0 || ix >= static_cast<long>(g.width))
                                      ? 0.0
                                      : plane[iy * g.width + ix];
            }
        }
    }
}

void col2im(std::span<const double> col, std::span<double> grad, const ConvGeometry& g) {
    const std::size_t oh = g.out_h(), ow = g.out_w();
    const long channels = static_cast<long>(g.channels);
    const long pad = static_cast<long>(g.padding);

    // One channel per task: no two tasks write the same grad plane.
#pragma omp parallel for schedule(static) if (g.col_rows() * oh * ow >= kMinParallelWork)
    for (long ch = 0; ch < channels; ++ch) {
        double* plane = grad.data() + ch * g.height * g.width;
        for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
            for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
                const std::size_t row = (ch * g.kernel_h + ki) * g.kernel_w + kj;
                const double* src = col.data() + row * oh * ow;
                for (std::size_t y = 0; y < oh; ++y) {
                    const long iy = static_cast<long>(y * g.stride + ki) - pad;
                    if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
                    for (std::size_t x = 0; x < ow; ++x) {
                        const long ix = static_cast<long>(x * g.stride + kj) - pad;
                        if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
                        plane[iy * g.width + ix] += src[y * ow + x];
                    }
                }
            }
        }
    }
}

void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols) {
    const long nrows = static_cast<long>(rows);
#pragma omp parallel for schedule(static) if (rows * cols >= kMinParallelWork)
    for (long r = 0; r < nrows; ++r) {
        const double* in = x.data() + r * cols;
        double* out = y.data() + r * cols;
        const double mx = *std::max_element(in, in + cols);
        double total = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            out[j] = std::exp(in[j] - mx);
            total += out[j];
        }
        const double inv = 1.0 / total;
        for (std::size_t j = 0; j < cols; ++j) out[j] *= inv;
    }
}

void layer_norm_rows(std::span<const double> x, std::span<const double> gamma,
                     std::span<const double> beta, std::span<double> y, std::span<double> mean,
                     std::span<double> rstd, std::size_t rows, std::size_t cols, double eps) {
    const long nrows = static_cast<long>(rows);
    const double inv_n = 1.0 / static_cast<double>(cols);
#pragma omp parallel for schedule(static) if (rows * cols >= kMinParallelWork)
    for (long r = 0; r < nrows; ++r) {
        const double* in = x.data() + r * cols;
        double* out = y.data() + r * cols;
        double mu = 0.0;
        for (std::size_t j = 0; j < cols; ++j) mu += in[j];
        mu *= inv_n;
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) var += (in[j] - mu) * (in[j] - mu);
        var *= inv_n;
        const double rs = 1.0 / std::sqrt(var + eps);
        mean[r] = mu;
        rstd[r] = rs;
        for (std::size_t j = 0; j < cols; ++j) out[j] = (in[j] - mu) * rs * gamma[j] + beta[j];
    }
}

void gelu(std::span<const double> x, std::span<double> y) {
    const long n = static_cast<long>(x.size());
#pragma omp parallel for schedule(static) if (x.size() >= kMinParallelWork)
    for (long i = 0; i < n; ++i) y[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * M_SQRT1_2));
}

void permute(std::span<const double> in, std::span<double> out,
             std::span<const std::size_t> shape, std::span<const std::size_t> perm) {
    const std::size_t rank = shape.size();
    std::vector<std::size_t> in_strides(rank, 1);
    for (std::size_t d = rank; d-- > 1;) in_strides[d - 1] = in_strides[d] * shape[d];
    std::vector<std::size_t> out_shape(rank);
    for (std::size_t d = 0; d < rank; ++d) out_shape[d] = shape[perm[d]];

    // Rows of the output's last axis; each row decodes its index once.
    const std::size_t inner = out_shape[rank - 1];
    const std::size_t inner_stride = in_strides[perm[rank - 1]];
    const long rows = static_cast<long>(out.size() / inner);

#pragma omp parallel for schedule(static) if (out.size() >= kMinParallelWork)
    for (long row = 0; row < rows; ++row) {
        std::size_t rem = static_cast<std::size_t>(row);
        std::size_t base = 0;
        for (std::size_t d = rank - 1; d-- > 0;) {
            base += (rem % out_shape[d]) * in_strides[perm[d]];
            rem /= out_shape[d];
        }
        double* dst = out.data() + row * inner;
        for (std::size_t j = 0; j < inner; ++j) dst[j] = in[base + j * inner_stride];
    }
}

}  // namespace parallel
}  // namespace lsac::kernels
