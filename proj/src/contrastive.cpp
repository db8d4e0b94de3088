// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsac/contrastive.hpp"

#include <cmath>

namespace lsac {

double cosine_similarity(std::span<const double> a, std::span<const double> t) {
    if (a.size() != t.size() || a.empty()) {
        throw ShapeError("cosine_similarity: lengths " + std::to_string(a.size()) + " and " + std::to_string(t.size()));
    }
    double dot = 0.0, aa = 0.0, tt = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * t[i];
        aa += a[i] * a[i];
        tt += t[i] * t[i];
    }
    const double na = std::sqrt(aa), nt = std::sqrt(tt);
    if (na < kMinNorm || nt < kMinNorm) {
        throw DegenerateEmbedding("cosine_similarity: " + std::string(na < kMinNorm ? "first" : "second") +
                                  " embedding has norm below 1e-12");
    }
    return dot / (na * nt);
}

Tensor similarity_matrix(const Tensor& audio, const Tensor& text) {
    if (audio.rank() != 2 || text.rank() != 2 || audio.shape() != text.shape()) {
        throw ShapeError("similarity_matrix: need two [n, C] inputs of equal shape, got " + to_string(audio.shape()) +
                         " and " + to_string(text.shape()));
    }
    const std::size_t n = audio.dim(0), c = audio.dim(1);
    auto row = [c](const Tensor& t, std::size_t i) { return t.data().subspan(i * c, c); };
    auto check = [&](const Tensor& t, const char* side) {
        for (std::size_t i = 0; i < n; ++i) {
            double sq = 0.0;
            for (double v : row(t, i)) sq += v * v;
            if (std::sqrt(sq) < kMinNorm) {
                throw DegenerateEmbedding(std::string("similarity_matrix: ") + side + " embedding " + std::to_string(i) +
                                          " has norm below 1e-12");
            }
        }
    };
    check(audio, "audio");
    check(text, "text");
    std::vector<double> s(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) s[i * n + j] = cosine_similarity(row(audio, i), row(text, j));
    }
    return Tensor({n, n}, std::move(s));
}

NodeRef similarity_matrix(Graph& g, NodeRef audio, NodeRef text) {
    return g.matmul(g.l2_normalize(audio), g.transpose(g.l2_normalize(text), {1, 0}));
}

namespace {

std::vector<std::size_t> diagonal(std::size_t n) {
    std::vector<std::size_t> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = i;
    return t;
}

NodeRef symmetric_xent(Graph& g, NodeRef logits) {
    const Shape& s = g.shape(logits);
    if (s.size() != 2 || s[0] != s[1]) throw ShapeError("contrastive_loss: need a square matrix, got " + to_string(s));
    const std::size_t n = s[0];
    NodeRef rows = g.softmax_cross_entropy(logits, diagonal(n));
    NodeRef cols = g.softmax_cross_entropy(g.transpose(logits, {1, 0}), diagonal(n));
    return g.scale(g.add(rows, cols), 0.5);
}

}  // namespace

double contrastive_loss(const Tensor& s, double scale) {
    Graph g;
    return g.value(contrastive_loss(g, g.constant(s), scale)).item();
}

NodeRef contrastive_loss(Graph& g, NodeRef s, double scale) {
    if (!(scale > 0.0)) throw ConfigError("contrastive_loss: scale must be positive");
    return symmetric_xent(g, scale == 1.0 ? s : g.scale(s, scale));
}

NodeRef contrastive_loss(Graph& g, NodeRef s, NodeRef log_scale) {
    return symmetric_xent(g, g.mul(s, g.exp(log_scale)));
}

Classification classify(std::span<const double> embedding, const std::vector<std::pair<std::size_t, Tensor>>& classes) {
    if (classes.empty()) throw ConfigError("classify: no class embeddings");
    Classification out;
    bool first = true;
    double best = 0.0;
    for (const auto& [id, e] : classes) {
        const double score = cosine_similarity(embedding, e.data());
        out.scores.push_back({id, score});
        if (first || score > best || (score == best && id < out.class_id)) {
            best = score;
            out.class_id = id;
            first = false;
        }
    }
    return out;
}

}  // namespace lsac
