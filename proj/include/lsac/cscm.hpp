// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Audio heads: map encoder tokens to a C-dimensional embedding.
//
// The convolutional head reshapes the token grid into a [d, h, w] feature
// map, gates it by channel and then by spatial position, and reduces it with
// two stride-2 3x3 convolutions, a 1x1 convolution, global average pooling
// and a linear layer. The pooled head averages tokens and applies a linear
// layer, discarding spatial layout.

#include <string>

#include "lsac/params.hpp"

namespace lsac {

struct CscmConfig {
    std::size_t depth = 192;  // d, the audio token width
    std::size_t height = 8;   // h
    std::size_t width = 32;   // w
    std::size_t reduction = 8;       // channel-gate MLP hidden width is depth / reduction
    std::size_t spatial_kernel = 7;  // odd; edge-replicated to keep the map size
    std::size_t head_channels = 256;
    std::size_t embed_dim = 1024;  // C

    // Requires depth divisible by reduction, an odd spatial kernel and a map
    // at least 4x4 so both strided convolutions see real cells.
    void validate() const;
};

// [batch*h*w, d] tokens in row-major grid order -> [batch, d, h, w].
NodeRef reshape_tokens(Graph& g, NodeRef tokens, std::size_t batch, std::size_t h, std::size_t w);

void add_conv_attention(ParameterSet& ps, const CscmConfig& cfg, Rng& rng);
// [batch, d, h, w] -> same shape, scaled by channel and spatial gates in (0, 1).
NodeRef conv_attention(Binder& p, const CscmConfig& cfg, NodeRef map);

// Sets every gate weight to zero and every gate bias high enough that both
// sigmoids round to exactly 1, turning conv_attention into the identity.
void saturate_gates(ParameterSet& ps);

void add_cscm_projection(ParameterSet& ps, const CscmConfig& cfg, Rng& rng);
// [batch, d, h, w] -> [batch, C].
NodeRef cscm_project(Binder& p, const CscmConfig& cfg, NodeRef map);

// Registers conv attention and projection under "cscm.".
void add_cscm(ParameterSet& ps, const CscmConfig& cfg, Rng& rng);
// Tokens -> map -> gates -> projection.
NodeRef cscm_head(Binder& p, const CscmConfig& cfg, NodeRef tokens, std::size_t batch);

// Mean over each item's tokens, then linear to C. Parameters under "pool.".
void add_pool_head(ParameterSet& ps, std::size_t depth, std::size_t embed_dim, Rng& rng);
NodeRef baseline_pool_project(Binder& p, NodeRef tokens, std::size_t batch);

std::size_t cscm_parameter_count(const CscmConfig& cfg);
// A single linear map from the flattened [h*w*d] token matrix to C, with bias.
std::size_t dense_projection_parameter_count(const CscmConfig& cfg);

enum class HeadKind { cscm, pool };
std::string to_string(HeadKind kind);
HeadKind parse_head_kind(const std::string& text);

}  // namespace lsac
