// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "lsac/graph.hpp"

namespace lsac {

// An embedding whose norm is below kMinNorm.
struct DegenerateEmbedding : Error {
    using Error::Error;
};

inline constexpr double kMinNorm = 1e-12;

// dot(a, t) / (|a| |t|). Throws DegenerateEmbedding instead of dividing by a
// vanishing norm.
double cosine_similarity(std::span<const double> a, std::span<const double> t);

// s_ij = cosine(audio_i, text_j) for [n, C] inputs, evaluated pair by pair.
// The error for a degenerate row names its side and index.
Tensor similarity_matrix(const Tensor& audio, const Tensor& text);

// Differentiable form: row-normalize both sides, then audio * text^T.
NodeRef similarity_matrix(Graph& g, NodeRef audio, NodeRef text);

// Mean of the row-wise softmax cross-entropies of scale*S and scale*S^T with
// diagonal targets.
double contrastive_loss(const Tensor& s, double scale = 1.0);
NodeRef contrastive_loss(Graph& g, NodeRef s, double scale = 1.0);
// Learnable temperature: the logits are exp(log_scale) * S, log_scale a [1] node.
NodeRef contrastive_loss(Graph& g, NodeRef s, NodeRef log_scale);

struct ClassScore {
    std::size_t class_id = 0;
    double score = 0.0;
};

struct Classification {
    std::size_t class_id = 0;
    std::vector<ClassScore> scores;  // in the order the classes were given
};

// Argmax cosine similarity; equal scores go to the lowest class id.
Classification classify(std::span<const double> embedding, const std::vector<std::pair<std::size_t, Tensor>>& classes);

}  // namespace lsac
