// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Layers shared by both towers. Each layer is a pair: add_* registers its
// parameters under a prefix, the matching function applies it inside a graph.

#include <string>

#include "lsac/params.hpp"

namespace lsac::nn {

void add_linear(ParameterSet& ps, const std::string& prefix, std::size_t in, std::size_t out,
                bool bias, Rng& rng);
// x is [rows, in] or [b, rows, in].
NodeRef linear(Binder& p, const std::string& prefix, NodeRef x);

void add_layer_norm(ParameterSet& ps, const std::string& prefix, std::size_t dim);
NodeRef layer_norm(Binder& p, const std::string& prefix, NodeRef x);

// Token layout for self-attention. Tokens are rows of a [batch*rows*cols, dim]
// matrix in (batch, row, col) order; attention only mixes tokens inside the
// same window_rows x window_cols window.
struct AttentionLayout {
    std::size_t batch = 1, rows = 1, cols = 1;
    std::size_t window_rows = 1, window_cols = 1;
    std::size_t heads = 1;
    bool causal = false;  // within a window, token j sees tokens <= j
};

void add_attention(ParameterSet& ps, const std::string& prefix, std::size_t dim, Rng& rng);
NodeRef attention(Binder& p, const std::string& prefix, NodeRef x, const AttentionLayout& layout);

// Pre-norm transformer block: x + attn(ln(x)), then h + mlp(ln(h)).
void add_block(ParameterSet& ps, const std::string& prefix, std::size_t dim, std::size_t mlp_ratio,
               Rng& rng);
NodeRef block(Binder& p, const std::string& prefix, NodeRef x, const AttentionLayout& layout);

}  // namespace lsac::nn
