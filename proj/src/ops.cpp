// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lsac/graph.hpp"
#include "lsac/kernels.hpp"

namespace lsac {

namespace kp = kernels::parallel;

std::string_view op_name(OpKind kind) {
    switch (kind) {
        case OpKind::leaf: return "leaf";
        case OpKind::matmul: return "matmul";
        case OpKind::conv2d: return "conv2d";
        case OpKind::add: return "add";
        case OpKind::mul: return "mul";
        case OpKind::layer_norm: return "layer_norm";
        case OpKind::softmax: return "softmax";
        case OpKind::gelu: return "gelu";
        case OpKind::sigmoid: return "sigmoid";
        case OpKind::mean_pool: return "mean_pool";
        case OpKind::max_pool: return "max_pool";
        case OpKind::reshape: return "reshape";
        case OpKind::transpose: return "transpose";
        case OpKind::embed_lookup: return "embed_lookup";
        case OpKind::concat: return "concat";
        case OpKind::sum: return "sum";
        case OpKind::exp: return "exp";
        case OpKind::l2_normalize: return "l2_normalize";
        case OpKind::softmax_cross_entropy: return "softmax_cross_entropy";
    }
    return "unknown";
}

namespace {

[[noreturn]] void shape_fail(OpKind kind, const std::string& what, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op_name(kind)) + ": " + what + ": " + to_string(a) + " vs " +
                     to_string(b));
}

[[noreturn]] void shape_fail(OpKind kind, const std::string& what, const Shape& a) {
    throw ShapeError(std::string(op_name(kind)) + ": " + what + ": " + to_string(a));
}

void expect_arity(OpKind kind, std::span<const Tensor> inputs, std::size_t n) {
    if (inputs.size() != n) {
        throw ShapeError(std::string(op_name(kind)) + ": expected " + std::to_string(n) +
                         " inputs, got " + std::to_string(inputs.size()));
    }
}

std::size_t resolve_axis(OpKind kind, int axis, const Shape& shape) {
    const int rank = static_cast<int>(shape.size());
    const int resolved = axis < 0 ? axis + rank : axis;
    if (resolved < 0 || resolved >= rank) {
        shape_fail(kind, "axis " + std::to_string(axis) + " out of range", shape);
    }
    return static_cast<std::size_t>(resolved);
}

// Extents around an axis: [outer, len, inner].
struct AxisSplit {
    std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
    s.len = shape[axis];
    for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
    return s;
}

// ---- broadcasting -----------------------------------------------------------

struct Broadcast {
    Shape out;
    std::vector<std::size_t> a_strides, b_strides;  // 0 on broadcast axes
};

Broadcast broadcast(OpKind kind, const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    Broadcast bc;
    bc.out.assign(rank, 1);
    Shape pa(rank, 1), pb(rank, 1);
    std::copy(a.begin(), a.end(), pa.begin() + (rank - a.size()));
    std::copy(b.begin(), b.end(), pb.begin() + (rank - b.size()));
    for (std::size_t d = 0; d < rank; ++d) {
        if (pa[d] != pb[d] && pa[d] != 1 && pb[d] != 1) shape_fail(kind, "cannot broadcast", a, b);
        bc.out[d] = std::max(pa[d], pb[d]);
    }
    auto strides = [&](const Shape& padded) {
        std::vector<std::size_t> st(rank, 0);
        std::size_t acc = 1;
        for (std::size_t d = rank; d-- > 0;) {
            st[d] = padded[d] == 1 ? 0 : acc;
            acc *= padded[d];
        }
        return st;
    };
    bc.a_strides = strides(pa);
    bc.b_strides = strides(pb);
    return bc;
}

// Calls fn(out_index, a_index, b_index) for every output element in order.
template <typename Fn>
void for_each_broadcast(const Broadcast& bc, Fn&& fn) {
    const std::size_t rank = bc.out.size();
    const std::size_t total = numel(bc.out);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t ai = 0, bi = 0;
    for (std::size_t o = 0; o < total; ++o) {
        fn(o, ai, bi);
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            ai += bc.a_strides[d];
            bi += bc.b_strides[d];
            if (idx[d] < bc.out[d]) break;
            ai -= bc.a_strides[d] * idx[d];
            bi -= bc.b_strides[d] * idx[d];
            idx[d] = 0;
        }
    }
}

// ---- matmul -----------------------------------------------------------------

struct MatmulDims {
    std::size_t batch = 1, m = 0, k = 0, n = 0;
    bool shared_rhs = true;
};

MatmulDims matmul_dims(const Shape& a, const Shape& b) {
    MatmulDims d;
    if (a.size() == 2 && b.size() == 2) {
        d.m = a[0];
        d.k = a[1];
        if (b[0] != d.k) shape_fail(OpKind::matmul, "inner dimensions differ", a, b);
        d.n = b[1];
    } else if (a.size() == 3 && b.size() == 2) {
        // Shared right operand: fold the batch into the rows.
        d.m = a[0] * a[1];
        d.k = a[2];
        if (b[0] != d.k) shape_fail(OpKind::matmul, "inner dimensions differ", a, b);
        d.n = b[1];
    } else if (a.size() == 3 && b.size() == 3) {
        if (a[0] != b[0]) shape_fail(OpKind::matmul, "batch sizes differ", a, b);
        if (a[2] != b[1]) shape_fail(OpKind::matmul, "inner dimensions differ", a, b);
        d.batch = a[0];
        d.m = a[1];
        d.k = a[2];
        d.n = b[2];
        d.shared_rhs = false;
    } else {
        shape_fail(OpKind::matmul, "unsupported ranks", a, b);
    }
    return d;
}

Tensor matmul_forward(const Tensor& a, const Tensor& b) {
    auto d = matmul_dims(a.shape(), b.shape());
    Shape out_shape = a.shape();
    out_shape.back() = d.n;
    std::vector<double> out(numel(out_shape));
    for (std::size_t i = 0; i < d.batch; ++i) {
        kp::gemm(a.data().subspan(i * d.m * d.k, d.m * d.k),
                 b.data().subspan(d.shared_rhs ? 0 : i * d.k * d.n, d.k * d.n),
                 std::span(out).subspan(i * d.m * d.n, d.m * d.n), d.m, d.k, d.n, false, false);
    }
    return Tensor(std::move(out_shape), std::move(out));
}

void matmul_backward(const Tensor& a, const Tensor& b, std::span<const double> g,
                     std::vector<double>* ga, std::vector<double>* gb) {
    auto d = matmul_dims(a.shape(), b.shape());
    std::vector<double> tmp;
    for (std::size_t i = 0; i < d.batch; ++i) {
        auto gi = g.subspan(i * d.m * d.n, d.m * d.n);
        auto ai = a.data().subspan(i * d.m * d.k, d.m * d.k);
        auto bi = b.data().subspan(d.shared_rhs ? 0 : i * d.k * d.n, d.k * d.n);
        if (ga) {
            tmp.assign(d.m * d.k, 0.0);
            kp::gemm(gi, bi, tmp, d.m, d.n, d.k, false, true);
            double* dst = ga->data() + i * d.m * d.k;
            for (std::size_t j = 0; j < tmp.size(); ++j) dst[j] += tmp[j];
        }
        if (gb) {
            tmp.assign(d.k * d.n, 0.0);
            kp::gemm(ai, gi, tmp, d.k, d.m, d.n, true, false);
            double* dst = gb->data() + (d.shared_rhs ? 0 : i * d.k * d.n);
            for (std::size_t j = 0; j < tmp.size(); ++j) dst[j] += tmp[j];
        }
    }
}

// ---- conv2d -----------------------------------------------------------------

struct ConvDims {
    std::size_t batch = 1, out_channels = 0;
    kernels::ConvGeometry geo;
    bool batched = false;
};

ConvDims conv_dims(const Shape& x, const Shape& k, const OpAttrs& attrs) {
    ConvDims d;
    if (k.size() != 4) shape_fail(OpKind::conv2d, "kernel must be [out,in,kh,kw]", x, k);
    if (x.size() == 4) {
        d.batched = true;
        d.batch = x[0];
    } else if (x.size() != 3) {
        shape_fail(OpKind::conv2d, "input must be [c,h,w] or [b,c,h,w]", x, k);
    }
    const std::size_t off = d.batched ? 1 : 0;
    d.geo.channels = x[off];
    d.geo.height = x[off + 1];
    d.geo.width = x[off + 2];
    if (k[1] != d.geo.channels) shape_fail(OpKind::conv2d, "channel mismatch", x, k);
    d.out_channels = k[0];
    d.geo.kernel_h = k[2];
    d.geo.kernel_w = k[3];
    d.geo.stride = attrs.stride;
    d.geo.padding = attrs.padding;
    if (attrs.stride == 0) shape_fail(OpKind::conv2d, "stride must be positive", x, k);
    if (d.geo.height + 2 * d.geo.padding < d.geo.kernel_h ||
        d.geo.width + 2 * d.geo.padding < d.geo.kernel_w) {
        shape_fail(OpKind::conv2d, "kernel larger than padded input", x, k);
    }
    return d;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& k, const OpAttrs& attrs) {
    auto d = conv_dims(x.shape(), k.shape(), attrs);
    const auto& geo = d.geo;
    const std::size_t in_size = geo.channels * geo.height * geo.width;
    const std::size_t out_size = d.out_channels * geo.col_cols();
    std::vector<double> col(geo.col_rows() * geo.col_cols());
    std::vector<double> out(d.batch * out_size);
    for (std::size_t b = 0; b < d.batch; ++b) {
        kp::im2col(x.data().subspan(b * in_size, in_size), col, geo);
        kp::gemm(k.data(), col, std::span(out).subspan(b * out_size, out_size), d.out_channels,
                 geo.col_rows(), geo.col_cols(), false, false);
    }
    Shape shape{d.out_channels, geo.out_h(), geo.out_w()};
    if (d.batched) shape.insert(shape.begin(), d.batch);
    return Tensor(std::move(shape), std::move(out));
}

void conv2d_backward(const Tensor& x, const Tensor& k, std::span<const double> g,
                     const OpAttrs& attrs, std::vector<double>* gx, std::vector<double>* gk) {
    auto d = conv_dims(x.shape(), k.shape(), attrs);
    const auto& geo = d.geo;
    const std::size_t in_size = geo.channels * geo.height * geo.width;
    const std::size_t out_size = d.out_channels * geo.col_cols();
    std::vector<double> col(geo.col_rows() * geo.col_cols());
    std::vector<double> tmp;
    for (std::size_t b = 0; b < d.batch; ++b) {
        auto gb = g.subspan(b * out_size, out_size);
        if (gk) {
            kp::im2col(x.data().subspan(b * in_size, in_size), col, geo);
            tmp.assign(k.numel(), 0.0);
            kp::gemm(gb, col, tmp, d.out_channels, geo.col_cols(), geo.col_rows(), false, true);
            for (std::size_t j = 0; j < tmp.size(); ++j) (*gk)[j] += tmp[j];
        }
        if (gx) {
            kp::gemm(k.data(), gb, col, geo.col_rows(), d.out_channels, geo.col_cols(), true, false);
            kp::col2im(col, std::span(*gx).subspan(b * in_size, in_size), geo);
        }
    }
}

// ---- elementwise / row ops --------------------------------------------------

double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor binary_forward(OpKind kind, const Tensor& a, const Tensor& b) {
    const bool is_add = kind == OpKind::add;
    auto av = a.data();
    auto bv = b.data();
    if (a.shape() == b.shape()) {
        std::vector<double> out(a.numel());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = is_add ? av[i] + bv[i] : av[i] * bv[i];
        return Tensor(a.shape(), std::move(out));
    }
    auto bc = broadcast(kind, a.shape(), b.shape());
    std::vector<double> out(numel(bc.out));
    for_each_broadcast(bc, [&](std::size_t o, std::size_t i, std::size_t j) {
        out[o] = is_add ? av[i] + bv[j] : av[i] * bv[j];
    });
    return Tensor(bc.out, std::move(out));
}

void binary_backward(OpKind kind, const Tensor& a, const Tensor& b, std::span<const double> g,
                     std::vector<double>* ga, std::vector<double>* gb) {
    const bool is_add = kind == OpKind::add;
    auto av = a.data();
    auto bv = b.data();
    auto bc = broadcast(kind, a.shape(), b.shape());
    for_each_broadcast(bc, [&](std::size_t o, std::size_t i, std::size_t j) {
        if (ga) (*ga)[i] += is_add ? g[o] : g[o] * bv[j];
        if (gb) (*gb)[j] += is_add ? g[o] : g[o] * av[i];
    });
}

Tensor layer_norm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::size_t cols = x.shape().back();
    if (gamma.shape() != Shape{cols} || beta.shape() != Shape{cols}) {
        shape_fail(OpKind::layer_norm, "gamma/beta must match the last axis", x.shape(), gamma.shape());
    }
    const std::size_t rows = x.numel() / cols;
    std::vector<double> out(x.numel()), mean(rows), rstd(rows);
    kp::layer_norm_rows(x.data(), gamma.data(), beta.data(), out, mean, rstd, rows, cols, eps);
    return Tensor(x.shape(), std::move(out));
}

void layer_norm_backward(const Tensor& x, const Tensor& gamma, std::span<const double> g,
                         double eps, std::vector<double>* gx, std::vector<double>* ggamma,
                         std::vector<double>* gbeta) {
    const std::size_t cols = x.shape().back();
    const std::size_t rows = x.numel() / cols;
    auto xv = x.data();
    auto gm = gamma.data();
    const double inv_n = 1.0 / static_cast<double>(cols);
    std::vector<double> xhat(cols), dxhat(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xv.data() + r * cols;
        const double* gr = g.data() + r * cols;
        double mu = 0.0;
        for (std::size_t j = 0; j < cols; ++j) mu += xr[j];
        mu *= inv_n;
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var *= inv_n;
        const double rs = 1.0 / std::sqrt(var + eps);
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            xhat[j] = (xr[j] - mu) * rs;
            dxhat[j] = gr[j] * gm[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xhat[j];
            if (ggamma) (*ggamma)[j] += gr[j] * xhat[j];
            if (gbeta) (*gbeta)[j] += gr[j];
        }
        mean_d *= inv_n;
        mean_dx *= inv_n;
        if (gx) {
            double* out = gx->data() + r * cols;
            for (std::size_t j = 0; j < cols; ++j) out[j] += rs * (dxhat[j] - mean_d - xhat[j] * mean_dx);
        }
    }
}

Tensor pool_forward(OpKind kind, const Tensor& x, int axis_attr) {
    const std::size_t axis = resolve_axis(kind, axis_attr, x.shape());
    auto s = split_at(x.shape(), axis);
    Shape out_shape = x.shape();
    out_shape[axis] = 1;
    std::vector<double> out(s.outer * s.inner);
    auto xv = x.data();
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            const double* base = xv.data() + o * s.len * s.inner + i;
            double acc = base[0];
            for (std::size_t l = 1; l < s.len; ++l) {
                acc = kind == OpKind::mean_pool ? acc + base[l * s.inner] : std::max(acc, base[l * s.inner]);
            }
            if (kind == OpKind::mean_pool) acc /= static_cast<double>(s.len);
            out[o * s.inner + i] = acc;
        }
    }
    return Tensor(std::move(out_shape), std::move(out));
}

void pool_backward(OpKind kind, const Tensor& x, const Tensor& y, std::span<const double> g,
                   int axis_attr, std::vector<double>& gx) {
    const std::size_t axis = resolve_axis(kind, axis_attr, x.shape());
    auto s = split_at(x.shape(), axis);
    auto xv = x.data();
    auto yv = y.data();
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t oi = o * s.inner + i;
            const std::size_t base = o * s.len * s.inner + i;
            if (kind == OpKind::mean_pool) {
                const double share = g[oi] / static_cast<double>(s.len);
                for (std::size_t l = 0; l < s.len; ++l) gx[base + l * s.inner] += share;
            } else {
                // First maximal element takes the gradient.
                for (std::size_t l = 0; l < s.len; ++l) {
                    if (xv[base + l * s.inner] == yv[oi]) {
                        gx[base + l * s.inner] += g[oi];
                        break;
                    }
                }
            }
        }
    }
}

std::vector<std::size_t> checked_perm(const Shape& shape, const std::vector<std::size_t>& perm) {
    if (perm.size() != shape.size()) {
        shape_fail(OpKind::transpose, "permutation rank " + std::to_string(perm.size()) + " differs", shape);
    }
    std::vector<bool> seen(perm.size(), false);
    for (auto p : perm) {
        if (p >= perm.size() || seen[p]) shape_fail(OpKind::transpose, "invalid permutation", shape);
        seen[p] = true;
    }
    return perm;
}

Tensor transpose_forward(const Tensor& x, const std::vector<std::size_t>& perm) {
    checked_perm(x.shape(), perm);
    Shape out_shape(perm.size());
    for (std::size_t d = 0; d < perm.size(); ++d) out_shape[d] = x.shape()[perm[d]];
    std::vector<double> out(x.numel());
    kp::permute(x.data(), out, x.shape(), perm);
    return Tensor(std::move(out_shape), std::move(out));
}

Tensor concat_forward(std::span<const Tensor> inputs, int axis_attr) {
    if (inputs.empty()) throw ShapeError("concat: no inputs");
    const Shape& first = inputs[0].shape();
    const std::size_t axis = resolve_axis(OpKind::concat, axis_attr, first);
    Shape out_shape = first;
    out_shape[axis] = 0;
    for (const auto& t : inputs) {
        if (t.rank() != first.size()) shape_fail(OpKind::concat, "rank mismatch", first, t.shape());
        for (std::size_t d = 0; d < first.size(); ++d) {
            if (d != axis && t.shape()[d] != first[d]) shape_fail(OpKind::concat, "extent mismatch", first, t.shape());
        }
        out_shape[axis] += t.shape()[axis];
    }
    auto s = split_at(out_shape, axis);
    std::vector<double> out(numel(out_shape));
    std::size_t offset = 0;
    for (const auto& t : inputs) {
        const std::size_t chunk = t.shape()[axis] * s.inner;
        auto tv = t.data();
        for (std::size_t o = 0; o < s.outer; ++o) {
            std::copy_n(tv.data() + o * chunk, chunk, out.data() + o * s.len * s.inner + offset);
        }
        offset += chunk;
    }
    return Tensor(std::move(out_shape), std::move(out));
}

void check_finite_rows(const Tensor& x) {
    for (double v : x.data()) {
        if (!std::isfinite(v)) throw Error("non-finite value in input");
    }
}

Tensor softmax_xent_forward(const Tensor& logits, const std::vector<std::size_t>& targets) {
    if (logits.rank() != 2) shape_fail(OpKind::softmax_cross_entropy, "logits must be [rows,classes]", logits.shape());
    const std::size_t rows = logits.dim(0), cols = logits.dim(1);
    if (targets.size() != rows) {
        shape_fail(OpKind::softmax_cross_entropy, "need one target per row", logits.shape(), Shape{targets.size()});
    }
    auto lv = logits.data();
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (targets[r] >= cols) {
            shape_fail(OpKind::softmax_cross_entropy, "target " + std::to_string(targets[r]) + " out of range", logits.shape());
        }
        const double* row = lv.data() + r * cols;
        const double mx = *std::max_element(row, row + cols);
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += std::exp(row[j] - mx);
        total += mx + std::log(acc) - row[targets[r]];
    }
    return Tensor::scalar(total / static_cast<double>(rows));
}

}  // namespace

Tensor forward_op(OpKind kind, std::span<const Tensor> in, const OpAttrs& attrs) {
    switch (kind) {
        case OpKind::leaf:
            throw Error("forward_op: leaf is not an operation");
        case OpKind::matmul:
            expect_arity(kind, in, 2);
            return matmul_forward(in[0], in[1]);
        case OpKind::conv2d:
            expect_arity(kind, in, 2);
            return conv2d_forward(in[0], in[1], attrs);
        case OpKind::add:
        case OpKind::mul:
            expect_arity(kind, in, 2);
            return binary_forward(kind, in[0], in[1]);
        case OpKind::layer_norm:
            expect_arity(kind, in, 3);
            return layer_norm_forward(in[0], in[1], in[2], attrs.eps);
        case OpKind::softmax: {
            expect_arity(kind, in, 1);
            const std::size_t cols = in[0].shape().back();
            std::vector<double> out(in[0].numel());
            kp::softmax_rows(in[0].data(), out, in[0].numel() / cols, cols);
            return Tensor(in[0].shape(), std::move(out));
        }
        case OpKind::gelu: {
            expect_arity(kind, in, 1);
            std::vector<double> out(in[0].numel());
            kp::gelu(in[0].data(), out);
            return Tensor(in[0].shape(), std::move(out));
        }
        case OpKind::sigmoid:
        case OpKind::exp: {
            expect_arity(kind, in, 1);
            auto xv = in[0].data();
            std::vector<double> out(xv.size());
            for (std::size_t i = 0; i < out.size(); ++i) {
                out[i] = kind == OpKind::exp ? std::exp(xv[i]) : sigmoid_scalar(xv[i]);
            }
            return Tensor(in[0].shape(), std::move(out));
        }
        case OpKind::mean_pool:
        case OpKind::max_pool:
            expect_arity(kind, in, 1);
            return pool_forward(kind, in[0], attrs.axis);
        case OpKind::reshape:
            expect_arity(kind, in, 1);
            if (numel(attrs.shape) != in[0].numel()) {
                shape_fail(kind, "element count differs", in[0].shape(), attrs.shape);
            }
            return in[0].reshaped(attrs.shape).with_requires_grad(false);
        case OpKind::transpose:
            expect_arity(kind, in, 1);
            return transpose_forward(in[0], attrs.perm);
        case OpKind::embed_lookup: {
            expect_arity(kind, in, 1);
            const Tensor& table = in[0];
            if (table.rank() != 2) shape_fail(kind, "table must be [rows,dim]", table.shape());
            const std::size_t dim = table.dim(1);
            std::vector<double> out(attrs.indices.size() * dim);
            for (std::size_t r = 0; r < attrs.indices.size(); ++r) {
                if (attrs.indices[r] >= table.dim(0)) {
                    shape_fail(kind, "row id " + std::to_string(attrs.indices[r]) + " out of range", table.shape());
                }
                std::copy_n(table.data().data() + attrs.indices[r] * dim, dim, out.data() + r * dim);
            }
            if (out.empty()) shape_fail(kind, "no row ids", table.shape());
            return Tensor({attrs.indices.size(), dim}, std::move(out));
        }
        case OpKind::concat:
            return concat_forward(in, attrs.axis);
        case OpKind::sum: {
            expect_arity(kind, in, 1);
            auto xv = in[0].data();
            return Tensor::scalar(std::accumulate(xv.begin(), xv.end(), 0.0));
        }
        case OpKind::l2_normalize: {
            expect_arity(kind, in, 1);
            const std::size_t cols = in[0].shape().back();
            const std::size_t rows = in[0].numel() / cols;
            auto xv = in[0].data();
            std::vector<double> out(xv.size());
            for (std::size_t r = 0; r < rows; ++r) {
                double sq = 0.0;
                for (std::size_t j = 0; j < cols; ++j) sq += xv[r * cols + j] * xv[r * cols + j];
                const double norm = std::sqrt(sq);
                if (!(norm >= 1e-12)) {
                    throw Error("l2_normalize: degenerate row " + std::to_string(r) + " (norm " +
                                std::to_string(norm) + ")");
                }
                for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = xv[r * cols + j] / norm;
            }
            return Tensor(in[0].shape(), std::move(out));
        }
        case OpKind::softmax_cross_entropy:
            expect_arity(kind, in, 1);
            check_finite_rows(in[0]);
            return softmax_xent_forward(in[0], attrs.indices);
    }
    throw Error("forward_op: unknown op");
}

void backward_op(OpKind kind, std::span<const Tensor> in, const Tensor& out,
                 std::span<const double> g, const OpAttrs& attrs,
                 std::span<std::vector<double>*> grads) {
    switch (kind) {
        case OpKind::leaf:
            return;
        case OpKind::matmul:
            matmul_backward(in[0], in[1], g, grads[0], grads[1]);
            return;
        case OpKind::conv2d:
            conv2d_backward(in[0], in[1], g, attrs, grads[0], grads[1]);
            return;
        case OpKind::add:
        case OpKind::mul:
            binary_backward(kind, in[0], in[1], g, grads[0], grads[1]);
            return;
        case OpKind::layer_norm:
            layer_norm_backward(in[0], in[1], g, attrs.eps, grads[0], grads[1], grads[2]);
            return;
        case OpKind::softmax: {
            if (!grads[0]) return;
            const std::size_t cols = out.shape().back();
            const std::size_t rows = out.numel() / cols;
            auto y = out.data();
            for (std::size_t r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (std::size_t j = 0; j < cols; ++j) dot += g[r * cols + j] * y[r * cols + j];
                for (std::size_t j = 0; j < cols; ++j) {
                    (*grads[0])[r * cols + j] += y[r * cols + j] * (g[r * cols + j] - dot);
                }
            }
            return;
        }
        case OpKind::gelu: {
            if (!grads[0]) return;
            auto x = in[0].data();
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double cdf = 0.5 * (1.0 + std::erf(x[i] * M_SQRT1_2));
                const double pdf = std::exp(-0.5 * x[i] * x[i]) * 0.5 * M_2_SQRTPI * M_SQRT1_2;
                (*grads[0])[i] += g[i] * (cdf + x[i] * pdf);
            }
            return;
        }
        case OpKind::sigmoid: {
            if (!grads[0]) return;
            auto y = out.data();
            for (std::size_t i = 0; i < y.size(); ++i) (*grads[0])[i] += g[i] * y[i] * (1.0 - y[i]);
            return;
        }
        case OpKind::exp: {
            if (!grads[0]) return;
            auto y = out.data();
            for (std::size_t i = 0; i < y.size(); ++i) (*grads[0])[i] += g[i] * y[i];
            return;
        }
        case OpKind::mean_pool:
        case OpKind::max_pool:
            if (grads[0]) pool_backward(kind, in[0], out, g, attrs.axis, *grads[0]);
            return;
        case OpKind::reshape:
            if (grads[0]) {
                for (std::size_t i = 0; i < g.size(); ++i) (*grads[0])[i] += g[i];
            }
            return;
        case OpKind::transpose: {
            if (!grads[0]) return;
            std::vector<std::size_t> inverse(attrs.perm.size());
            for (std::size_t d = 0; d < attrs.perm.size(); ++d) inverse[attrs.perm[d]] = d;
            std::vector<double> tmp(g.size());
            kp::permute(g, tmp, out.shape(), inverse);
            for (std::size_t i = 0; i < tmp.size(); ++i) (*grads[0])[i] += tmp[i];
            return;
        }
        case OpKind::embed_lookup: {
            if (!grads[0]) return;
            const std::size_t dim = in[0].dim(1);
            for (std::size_t r = 0; r < attrs.indices.size(); ++r) {
                double* dst = grads[0]->data() + attrs.indices[r] * dim;
                for (std::size_t j = 0; j < dim; ++j) dst[j] += g[r * dim + j];
            }
            return;
        }
        case OpKind::concat: {
            const std::size_t axis = resolve_axis(kind, attrs.axis, out.shape());
            auto s = split_at(out.shape(), axis);
            std::size_t offset = 0;
            for (std::size_t t = 0; t < in.size(); ++t) {
                const std::size_t chunk = in[t].shape()[axis] * s.inner;
                if (grads[t]) {
                    for (std::size_t o = 0; o < s.outer; ++o) {
                        const double* src = g.data() + o * s.len * s.inner + offset;
                        double* dst = grads[t]->data() + o * chunk;
                        for (std::size_t j = 0; j < chunk; ++j) dst[j] += src[j];
                    }
                }
                offset += chunk;
            }
            return;
        }
        case OpKind::sum:
            if (grads[0]) {
                for (auto& v : *grads[0]) v += g[0];
            }
            return;
        case OpKind::l2_normalize: {
            if (!grads[0]) return;
            const std::size_t cols = out.shape().back();
            const std::size_t rows = out.numel() / cols;
            auto x = in[0].data();
            auto y = out.data();
            for (std::size_t r = 0; r < rows; ++r) {
                double sq = 0.0, dot = 0.0;
                for (std::size_t j = 0; j < cols; ++j) {
                    sq += x[r * cols + j] * x[r * cols + j];
                    dot += y[r * cols + j] * g[r * cols + j];
                }
                const double inv_norm = 1.0 / std::sqrt(sq);
                for (std::size_t j = 0; j < cols; ++j) {
                    (*grads[0])[r * cols + j] += (g[r * cols + j] - y[r * cols + j] * dot) * inv_norm;
                }
            }
            return;
        }
        case OpKind::softmax_cross_entropy: {
            if (!grads[0]) return;
            const std::size_t rows = in[0].dim(0), cols = in[0].dim(1);
            std::vector<double> p(rows * cols);
            kp::softmax_rows(in[0].data(), p, rows, cols);
            const double scale = g[0] / static_cast<double>(rows);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t j = 0; j < cols; ++j) {
                    const double onehot = j == attrs.indices[r] ? 1.0 : 0.0;
                    (*grads[0])[r * cols + j] += scale * (p[r * cols + j] - onehot);
                }
            }
            return;
        }
    }
}

}  // namespace lsac
