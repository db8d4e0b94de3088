// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsac/nn.hpp"

#include <cmath>

namespace lsac::nn {

void add_linear(ParameterSet& ps, const std::string& prefix, std::size_t in, std::size_t out,
                bool bias, Rng& rng) {
    ps.add(prefix + ".w", init_glorot({in, out}, rng));
    if (bias) ps.add(prefix + ".b", Tensor::zeros({out}));
}

NodeRef linear(Binder& p, const std::string& prefix, NodeRef x) {
    Graph& g = p.graph();
    NodeRef y = g.matmul(x, p(prefix + ".w"));
    if (p.params().contains(prefix + ".b")) y = g.add(y, p(prefix + ".b"));
    return y;
}

void add_layer_norm(ParameterSet& ps, const std::string& prefix, std::size_t dim) {
    ps.add(prefix + ".gamma", Tensor::full({dim}, 1.0));
    ps.add(prefix + ".beta", Tensor::zeros({dim}));
}

NodeRef layer_norm(Binder& p, const std::string& prefix, NodeRef x) {
    return p.graph().layer_norm(x, p(prefix + ".gamma"), p(prefix + ".beta"));
}

namespace {

void check_layout(const AttentionLayout& l, std::size_t tokens, std::size_t dim) {
    if (l.batch * l.rows * l.cols != tokens) {
        throw ShapeError("attention: layout " + std::to_string(l.batch) + "x" + std::to_string(l.rows) +
                         "x" + std::to_string(l.cols) + " does not cover " + std::to_string(tokens) +
                         " tokens");
    }
    if (l.rows % l.window_rows || l.cols % l.window_cols) {
        throw ShapeError("attention: grid " + std::to_string(l.rows) + "x" + std::to_string(l.cols) +
                         " not divisible by window " + std::to_string(l.window_rows) + "x" +
                         std::to_string(l.window_cols));
    }
    if (dim % l.heads) {
        throw ShapeError("attention: width " + std::to_string(dim) + " not divisible by " +
                         std::to_string(l.heads) + " heads");
    }
}

// [b*r*c, dim] -> [b*windows*heads, window_tokens, head_dim]
NodeRef partition(Graph& g, NodeRef x, const AttentionLayout& l, std::size_t head_dim) {
    const std::size_t wr = l.window_rows, wc = l.window_cols;
    x = g.reshape(x, {l.batch, l.rows / wr, wr, l.cols / wc, wc, l.heads, head_dim});
    x = g.transpose(x, {0, 1, 3, 5, 2, 4, 6});
    return g.reshape(x, {l.batch * (l.rows / wr) * (l.cols / wc) * l.heads, wr * wc, head_dim});
}

NodeRef unpartition(Graph& g, NodeRef x, const AttentionLayout& l, std::size_t head_dim) {
    const std::size_t wr = l.window_rows, wc = l.window_cols;
    x = g.reshape(x, {l.batch, l.rows / wr, l.cols / wc, l.heads, wr, wc, head_dim});
    x = g.transpose(x, {0, 1, 4, 2, 5, 3, 6});
    return g.reshape(x, {l.batch * l.rows * l.cols, l.heads * head_dim});
}

}  // namespace

void add_attention(ParameterSet& ps, const std::string& prefix, std::size_t dim, Rng& rng) {
    add_linear(ps, prefix + ".q", dim, dim, true, rng);
    add_linear(ps, prefix + ".k", dim, dim, true, rng);
    add_linear(ps, prefix + ".v", dim, dim, true, rng);
    add_linear(ps, prefix + ".out", dim, dim, true, rng);
}

NodeRef attention(Binder& p, const std::string& prefix, NodeRef x, const AttentionLayout& layout) {
    Graph& g = p.graph();
    const std::size_t dim = g.shape(x).back();
    check_layout(layout, g.shape(x)[0], dim);
    const std::size_t head_dim = dim / layout.heads;
    const std::size_t window = layout.window_rows * layout.window_cols;

    NodeRef q = partition(g, linear(p, prefix + ".q", x), layout, head_dim);
    NodeRef k = partition(g, linear(p, prefix + ".k", x), layout, head_dim);
    NodeRef v = partition(g, linear(p, prefix + ".v", x), layout, head_dim);

    q = g.scale(q, 1.0 / std::sqrt(static_cast<double>(head_dim)));
    NodeRef scores = g.matmul(q, g.transpose(k, {0, 2, 1}));
    if (layout.causal) {
        std::vector<double> mask(window * window, 0.0);
        for (std::size_t i = 0; i < window; ++i) {
            for (std::size_t j = i + 1; j < window; ++j) mask[i * window + j] = -1e30;
        }
        scores = g.add(scores, g.constant(Tensor({window, window}, std::move(mask))));
    }
    NodeRef mixed = g.matmul(g.softmax(scores), v);
    return linear(p, prefix + ".out", unpartition(g, mixed, layout, head_dim));
}

void add_block(ParameterSet& ps, const std::string& prefix, std::size_t dim, std::size_t mlp_ratio,
               Rng& rng) {
    add_layer_norm(ps, prefix + ".ln1", dim);
    add_attention(ps, prefix + ".attn", dim, rng);
    add_layer_norm(ps, prefix + ".ln2", dim);
    add_linear(ps, prefix + ".fc1", dim, dim * mlp_ratio, true, rng);
    add_linear(ps, prefix + ".fc2", dim * mlp_ratio, dim, true, rng);
}

NodeRef block(Binder& p, const std::string& prefix, NodeRef x, const AttentionLayout& layout) {
    Graph& g = p.graph();
    NodeRef h = g.add(x, attention(p, prefix + ".attn", layer_norm(p, prefix + ".ln1", x), layout));
    NodeRef m = linear(p, prefix + ".fc2", g.gelu(linear(p, prefix + ".fc1", layer_norm(p, prefix + ".ln2", h))));
    return g.add(h, m);
}

}  // namespace lsac::nn
