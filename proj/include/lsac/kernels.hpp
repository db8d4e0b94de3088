// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Dense numeric kernels behind the graph ops.
//
// Every kernel exists twice with identical signatures:
//   serial::   plain textbook loops, kept as the reference for tests
//   parallel:: OpenMP over independent output rows / channels
//
// The parallel versions give every output element to exactly one thread and
// keep a fixed per-element accumulation order, so results do not depend on
// the thread count. They may differ from the serial reference in the last
// bits because the loop order (and thus the summation order) differs.

#include <cstddef>
#include <span>

namespace lsac::kernels {

struct ConvGeometry {
    std::size_t channels = 0, height = 0, width = 0;
    std::size_t kernel_h = 0, kernel_w = 0;
    std::size_t stride = 1, padding = 0;

    std::size_t out_h() const { return (height + 2 * padding - kernel_h) / stride + 1; }
    std::size_t out_w() const { return (width + 2 * padding - kernel_w) / stride + 1; }
    std::size_t col_rows() const { return channels * kernel_h * kernel_w; }
    std::size_t col_cols() const { return out_h() * out_w(); }
};

namespace serial {
// c[m,n] = op(a) * op(b) with op(a) of shape [m,k] and op(b) of shape [k,n].
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool trans_a, bool trans_b);
// Unfold input [C,H,W] into col [C*kh*kw, Ho*Wo]; padded cells read as 0.
void im2col(std::span<const double> input, std::span<double> col, const ConvGeometry& g);
// Adjoint of im2col, accumulated into grad.
void col2im(std::span<const double> col, std::span<double> grad, const ConvGeometry& g);
void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols);
void layer_norm_rows(std::span<const double> x, std::span<const double> gamma,
                     std::span<const double> beta, std::span<double> y, std::span<double> mean,
                     std::span<double> rstd, std::size_t rows, std::size_t cols, double eps);
void gelu(std::span<const double> x, std::span<double> y);
// out.shape[i] = shape[perm[i]]
void permute(std::span<const double> in, std::span<double> out,
             std::span<const std::size_t> shape, std::span<const std::size_t> perm);
}  // namespace serial

namespace parallel {
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool trans_a, bool trans_b);
void im2col(std::span<const double> input, std::span<double> col, const ConvGeometry& g);
void col2im(std::span<const double> col, std::span<double> grad, const ConvGeometry& g);
void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols);
void layer_norm_rows(std::span<const double> x, std::span<const double> gamma,
                     std::span<const double> beta, std::span<double> y, std::span<double> mean,
                     std::span<double> rstd, std::size_t rows, std::size_t cols, double eps);
void gelu(std::span<const double> x, std::span<double> y);
void permute(std::span<const double> in, std::span<double> out,
             std::span<const std::size_t> shape, std::span<const std::size_t> perm);
}  // namespace parallel

// Number of worker threads OpenMP will use (1 when built without OpenMP).
int max_threads();

}  // namespace lsac::kernels
