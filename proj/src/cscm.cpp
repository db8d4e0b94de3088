// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsac/cscm.hpp"

#include <algorithm>

#include "lsac/nn.hpp"

namespace lsac {

void CscmConfig::validate() const {
    if (depth == 0 || reduction == 0 || depth % reduction != 0) {
        throw ConfigError("cscm: depth " + std::to_string(depth) + " not divisible by reduction " +
                          std::to_string(reduction));
    }
    if (spatial_kernel % 2 == 0) throw ConfigError("cscm: spatial kernel must be odd");
    if (height < 4 || width < 4) {
        throw ConfigError("cscm: map " + std::to_string(height) + "x" + std::to_string(width) +
                          " is too small for two stride-2 3x3 convolutions (need at least 4x4)");
    }
    if (head_channels == 0 || embed_dim == 0) throw ConfigError("cscm: head channels and C must be positive");
}

NodeRef reshape_tokens(Graph& g, NodeRef tokens, std::size_t batch, std::size_t h, std::size_t w) {
    const Shape& s = g.shape(tokens);
    if (s.size() != 2 || s[0] != batch * h * w) {
        throw ShapeError("reshape_tokens: " + std::to_string(s.empty() ? 0 : s[0]) + " tokens cannot fill " +
                         std::to_string(batch) + " maps of " + std::to_string(h) + "x" + std::to_string(w) +
                         " (" + std::to_string(batch * h * w) + " cells)");
    }
    const std::size_t d = s[1];
    NodeRef x = g.reshape(tokens, {batch, h * w, d});
    x = g.transpose(x, {0, 2, 1});
    return g.reshape(x, {batch, d, h, w});
}

namespace {

void add_conv(ParameterSet& ps, const std::string& prefix, std::size_t in, std::size_t out, std::size_t k, Rng& rng) {
    ps.add(prefix + ".kernel", init_glorot({out, in, k, k}, rng));
    ps.add(prefix + ".bias", Tensor::zeros({out}));
}

NodeRef conv(Binder& p, const std::string& prefix, NodeRef x, std::size_t stride, std::size_t padding) {
    Graph& g = p.graph();
    NodeRef y = g.conv2d(x, p(prefix + ".kernel"), stride, padding);
    const std::size_t out = p.params().get(prefix + ".bias").numel();
    return g.add(y, g.reshape(p(prefix + ".bias"), {out, 1, 1}));
}

// Edge-replicate padding of a [b, c, h, w] map by `pad` cells per side, as a
// row gather so gradients flow back to the source cells.
NodeRef replicate_pad(Graph& g, NodeRef x, std::size_t pad) {
    const Shape s = g.shape(x);
    const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
    const std::size_t ph = h + 2 * pad, pw = w + 2 * pad;
    std::vector<std::size_t> ids;
    ids.reserve(planes * ph * pw);
    for (std::size_t plane = 0; plane < planes; ++plane) {
        for (std::size_t i = 0; i < ph; ++i) {
            const std::size_t si = std::min(h - 1, i < pad ? 0 : i - pad);
            for (std::size_t j = 0; j < pw; ++j) {
                const std::size_t sj = std::min(w - 1, j < pad ? 0 : j - pad);
                ids.push_back((plane * h + si) * w + sj);
            }
        }
    }
    NodeRef rows = g.embed_lookup(g.reshape(x, {planes * h * w, 1}), std::move(ids));
    return g.reshape(rows, {s[0], s[1], ph, pw});
}

// Large enough that sigmoid rounds to 1.0 in double precision.
constexpr double kSaturatingBias = 50.0;

}  // namespace

void add_conv_attention(ParameterSet& ps, const CscmConfig& cfg, Rng& rng) {
    cfg.validate();
    nn::add_linear(ps, "cscm.ca.fc1", cfg.depth, cfg.depth / cfg.reduction, true, rng);
    nn::add_linear(ps, "cscm.ca.fc2", cfg.depth / cfg.reduction, cfg.depth, true, rng);
    add_conv(ps, "cscm.sa", 2, 1, cfg.spatial_kernel, rng);
}

NodeRef conv_attention(Binder& p, const CscmConfig& cfg, NodeRef map) {
    Graph& g = p.graph();
    const Shape s = g.shape(map);
    if (s.size() != 4 || s[1] != cfg.depth) {
        throw ShapeError("conv_attention: expected [batch, " + std::to_string(cfg.depth) + ", h, w], got " + to_string(s));
    }
    const std::size_t b = s[0], d = s[1], h = s[2], w = s[3];

    // Channel gate: the shared MLP sees the average- and max-pooled
    // descriptors stacked as 2b rows; their outputs are summed per item.
    NodeRef flat = g.reshape(map, {b, d, h * w});
    NodeRef avg = g.reshape(g.mean_pool(flat, 2), {b, d});
    NodeRef mx = g.reshape(g.max_pool(flat, 2), {b, d});
    const NodeRef both[] = {avg, mx};
    NodeRef hidden = g.gelu(nn::linear(p, "cscm.ca.fc1", g.concat(both, 0)));
    NodeRef paths = g.reshape(nn::linear(p, "cscm.ca.fc2", hidden), {2, b, d});
    NodeRef logits = g.scale(g.reshape(g.mean_pool(paths, 0), {b, d}), 2.0);
    NodeRef gated = g.mul(map, g.reshape(g.sigmoid(logits), {b, d, 1, 1}));

    // Spatial gate from channel-wise mean and max. Replicated edges keep the
    // gate uniform over a constant map.
    const NodeRef stats[] = {g.mean_pool(gated, 1), g.max_pool(gated, 1)};
    NodeRef padded = replicate_pad(g, g.concat(stats, 1), cfg.spatial_kernel / 2);
    NodeRef spatial = g.sigmoid(conv(p, "cscm.sa", padded, 1, 0));
    return g.mul(gated, spatial);
}

void saturate_gates(ParameterSet& ps) {
    for (const char* name : {"cscm.ca.fc1.w", "cscm.ca.fc1.b", "cscm.ca.fc2.w", "cscm.sa.kernel"}) {
        ps.set(name, Tensor::zeros(ps.get(name).shape()));
    }
    // The channel logit is twice the fc2 bias.
    ps.set("cscm.ca.fc2.b", Tensor::full(ps.get("cscm.ca.fc2.b").shape(), kSaturatingBias / 2.0));
    ps.set("cscm.sa.bias", Tensor::full(ps.get("cscm.sa.bias").shape(), kSaturatingBias));
}

void add_cscm_projection(ParameterSet& ps, const CscmConfig& cfg, Rng& rng) {
    cfg.validate();
    add_conv(ps, "cscm.conv1", cfg.depth, cfg.head_channels, 3, rng);
    add_conv(ps, "cscm.conv2", cfg.head_channels, cfg.head_channels, 3, rng);
    add_conv(ps, "cscm.conv3", cfg.head_channels, cfg.head_channels, 1, rng);
    nn::add_linear(ps, "cscm.proj", cfg.head_channels, cfg.embed_dim, true, rng);
}

NodeRef cscm_project(Binder& p, const CscmConfig& cfg, NodeRef map) {
    Graph& g = p.graph();
    const Shape& in = g.shape(map);
    if (in.size() != 4 || in[1] != cfg.depth || in[2] != cfg.height || in[3] != cfg.width) {
        throw ShapeError("cscm_project: expected [batch, " + std::to_string(cfg.depth) + ", " +
                         std::to_string(cfg.height) + ", " + std::to_string(cfg.width) + "], got " + to_string(in));
    }
    NodeRef x = g.gelu(conv(p, "cscm.conv1", map, 2, 1));
    x = g.gelu(conv(p, "cscm.conv2", x, 2, 1));
    x = conv(p, "cscm.conv3", x, 1, 0);
    const Shape s = g.shape(x);
    x = g.mean_pool(g.reshape(x, {s[0], s[1], s[2] * s[3]}), 2);
    return nn::linear(p, "cscm.proj", g.reshape(x, {s[0], s[1]}));
}

void add_cscm(ParameterSet& ps, const CscmConfig& cfg, Rng& rng) {
    add_conv_attention(ps, cfg, rng);
    add_cscm_projection(ps, cfg, rng);
}

NodeRef cscm_head(Binder& p, const CscmConfig& cfg, NodeRef tokens, std::size_t batch) {
    NodeRef map = reshape_tokens(p.graph(), tokens, batch, cfg.height, cfg.width);
    return cscm_project(p, cfg, conv_attention(p, cfg, map));
}

void add_pool_head(ParameterSet& ps, std::size_t depth, std::size_t embed_dim, Rng& rng) {
    nn::add_linear(ps, "pool.proj", depth, embed_dim, true, rng);
}

NodeRef baseline_pool_project(Binder& p, NodeRef tokens, std::size_t batch) {
    Graph& g = p.graph();
    const Shape& s = g.shape(tokens);
    if (s.size() != 2 || batch == 0 || s[0] % batch != 0) {
        throw ShapeError("baseline_pool_project: " + to_string(s) + " does not split into " +
                         std::to_string(batch) + " items");
    }
    const std::size_t d = s[1];
    NodeRef pooled = g.mean_pool(g.reshape(tokens, {batch, s[0] / batch, d}), 1);
    return nn::linear(p, "pool.proj", g.reshape(pooled, {batch, d}));
}

std::size_t cscm_parameter_count(const CscmConfig& cfg) {
    const std::size_t d = cfg.depth, r = cfg.depth / cfg.reduction, k = cfg.spatial_kernel;
    const std::size_t c = cfg.head_channels;
    const std::size_t gates = (d * r + r) + (r * d + d) + (2 * k * k + 1);
    const std::size_t convs = (d * c * 9 + c) + (c * c * 9 + c) + (c * c + c);
    return gates + convs + c * cfg.embed_dim + cfg.embed_dim;
}

std::size_t dense_projection_parameter_count(const CscmConfig& cfg) {
    return cfg.height * cfg.width * cfg.depth * cfg.embed_dim + cfg.embed_dim;
}

std::string to_string(HeadKind kind) { return kind == HeadKind::cscm ? "cscm" : "pool"; }

HeadKind parse_head_kind(const std::string& text) {
    if (text == "cscm") return HeadKind::cscm;
    if (text == "pool") return HeadKind::pool;
    throw ConfigError("unknown head \"" + text + "\" (expected cscm or pool)");
}

}  // namespace lsac
