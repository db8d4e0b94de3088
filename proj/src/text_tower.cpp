// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsac/text_tower.hpp"

#include <algorithm>
#include <cmath>

#include "lsac/nn.hpp"

namespace lsac {

void TextTowerConfig::validate() const {
    if (vocab_size < 2 || max_len < 2 || width == 0 || layers == 0 || heads == 0 || mlp_ratio == 0 || embed_dim == 0) {
        throw ConfigError("text tower: all sizes must be positive (vocab and max_len at least 2)");
    }
    if (width % heads != 0) {
        throw ConfigError("text tower: width " + std::to_string(width) + " not divisible by " +
                          std::to_string(heads) + " heads");
    }
}

void add_text_tower(ParameterSet& ps, const TextTowerConfig& cfg, Rng& rng) {
    cfg.validate();
    ps.add("text.token_embedding", init_normal({cfg.vocab_size, cfg.width}, 0.02, rng));
    ps.add("text.positional_embedding", init_normal({cfg.max_len, cfg.width}, 0.01, rng));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        nn::add_block(ps, "text.block" + std::to_string(l), cfg.width, cfg.mlp_ratio, rng);
    }
    nn::add_layer_norm(ps, "text.ln_final", cfg.width);
    ps.add("text.proj.w", init_normal({cfg.width, cfg.embed_dim}, 1.0 / std::sqrt(static_cast<double>(cfg.width)), rng));
}

NodeRef encode_text(Binder& p, const TextTowerConfig& cfg, std::span<const TokenSequence> tokens) {
    if (tokens.empty()) throw ConfigError("encode_text: empty batch");
    std::size_t longest = 0;
    for (const auto& t : tokens) {
        if (t.length() == 0) throw ConfigError("encode_text: empty token sequence");
        if (t.length() > cfg.max_len) {
            throw ConfigError("encode_text: sequence of " + std::to_string(t.length()) +
                              " tokens exceeds the positional table (" + std::to_string(cfg.max_len) + ")");
        }
        for (std::size_t id : t.ids) {
            if (id >= cfg.vocab_size) {
                throw ConfigError("encode_text: token id " + std::to_string(id) + " outside vocabulary of " +
                                  std::to_string(cfg.vocab_size));
            }
        }
        longest = std::max(longest, t.length());
    }

    const std::size_t n = tokens.size();
    std::vector<std::size_t> ids, positions, ends;
    ids.reserve(n * longest);
    positions.reserve(n * longest);
    for (std::size_t s = 0; s < n; ++s) {
        const auto& seq = tokens[s].ids;
        for (std::size_t i = 0; i < longest; ++i) {
            ids.push_back(i < seq.size() ? seq[i] : seq.back());
            positions.push_back(i);
        }
        ends.push_back(s * longest + seq.size() - 1);
    }

    Graph& g = p.graph();
    NodeRef x = g.add(g.embed_lookup(p("text.token_embedding"), std::move(ids)),
                      g.embed_lookup(p("text.positional_embedding"), std::move(positions)));
    nn::AttentionLayout layout;
    layout.batch = n;
    layout.cols = longest;
    layout.window_cols = longest;
    layout.heads = cfg.heads;
    layout.causal = true;
    for (std::size_t l = 0; l < cfg.layers; ++l) x = nn::block(p, "text.block" + std::to_string(l), x, layout);
    x = nn::layer_norm(p, "text.ln_final", x);
    return nn::linear(p, "text.proj", g.embed_lookup(x, std::move(ends)));
}

Tensor encode_text(const ParameterSet& ps, const TextTowerConfig& cfg, const TokenSequence& tokens) {
    Graph g;
    Binder p(g, ps, false);
    const TokenSequence batch[] = {tokens};
    return g.value(encode_text(p, cfg, batch)).reshaped({cfg.embed_dim});
}

std::vector<TokenSequence> label_tokens(std::span<const std::string> labels, const PromptTemplate& prompt,
                                        const BpeVocab& vocab, std::size_t max_len) {
    std::vector<TokenSequence> out;
    out.reserve(labels.size());
    for (const auto& label : labels) out.push_back(tokenize(apply_prompt(label, prompt), vocab, max_len));
    return out;
}

}  // namespace lsac
