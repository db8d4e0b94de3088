// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Causal transformer over BPE tokens. The embedding of a sequence is the
// final-layer activation at its end token, projected to the shared space.

#include <span>
#include <string>
#include <vector>

#include "lsac/bpe.hpp"
#include "lsac/params.hpp"

namespace lsac {

struct TextTowerConfig {
    std::size_t vocab_size = 1024;
    std::size_t max_len = kDefaultMaxTokens;  // positional table length
    std::size_t width = 256;
    std::size_t layers = 4;
    std::size_t heads = 4;
    std::size_t mlp_ratio = 4;
    std::size_t embed_dim = 1024;  // C

    void validate() const;
};

// Registers parameters under "text.".
void add_text_tower(ParameterSet& ps, const TextTowerConfig& cfg, Rng& rng);

// Encodes a batch of sequences into an [n, C] node. Sequences are padded to
// a common length; the causal mask keeps padding out of every end token.
// Throws ConfigError for sequences longer than max_len or ids outside the
// vocabulary.
NodeRef encode_text(Binder& p, const TextTowerConfig& cfg, std::span<const TokenSequence> tokens);

// Single sequence with frozen weights; returns a [C] tensor.
Tensor encode_text(const ParameterSet& ps, const TextTowerConfig& cfg, const TokenSequence& tokens);

// Prompts and tokenizes each label.
std::vector<TokenSequence> label_tokens(std::span<const std::string> labels, const PromptTemplate& prompt,
                                        const BpeVocab& vocab, std::size_t max_len);

}  // namespace lsac
