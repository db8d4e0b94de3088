// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsac/audio_tower.hpp"

#include <cmath>

#include "lsac/nn.hpp"

namespace lsac {

PatchSequence patchify(const MelSpectrogram& mel, std::size_t ph, std::size_t pw) {
    if (ph == 0 || pw == 0) throw ConfigError("patchify: patch extents must be positive");
    if (mel.bins == 0 || mel.frames == 0 || mel.values.size() != mel.bins * mel.frames) {
        throw ShapeError("patchify: malformed spectrogram");
    }
    PatchSequence out;
    out.rows = (mel.bins + ph - 1) / ph;
    out.cols = (mel.frames + pw - 1) / pw;
    const double pad = std::log(kLogFloor);
    std::vector<double> data;
    data.reserve(out.rows * out.cols * ph * pw);
    for (std::size_t r = 0; r < out.rows; ++r) {
        for (std::size_t c = 0; c < out.cols; ++c) {
            for (std::size_t i = 0; i < ph; ++i) {
                for (std::size_t j = 0; j < pw; ++j) {
                    const std::size_t f = r * ph + i, t = c * pw + j;
                    data.push_back(f < mel.bins && t < mel.frames ? mel.at(f, t) : pad);
                }
            }
        }
    }
    out.tokens = Tensor({out.rows * out.cols, ph * pw}, std::move(data));
    return out;
}

AudioTowerConfig AudioTowerConfig::desk() { return {}; }

AudioTowerConfig AudioTowerConfig::full() {
    AudioTowerConfig cfg;
    cfg.mel_bins = 64;
    cfg.frames = 256;
    cfg.patch_h = 1;
    cfg.patch_w = 4;
    cfg.window = 8;
    cfg.widths = {96, 192, 384, 768};
    cfg.depths = {2, 2, 6, 2};
    cfg.heads = {4, 8, 16, 32};
    return cfg;
}

std::size_t AudioTowerConfig::grid_rows(std::size_t stage) const {
    return ((mel_bins + patch_h - 1) / patch_h) >> stage;
}

std::size_t AudioTowerConfig::grid_cols(std::size_t stage) const {
    return ((frames + patch_w - 1) / patch_w) >> stage;
}

void AudioTowerConfig::validate() const {
    if (mel_bins == 0 || frames == 0 || patch_h == 0 || patch_w == 0 || window == 0 || mlp_ratio == 0) {
        throw ConfigError("audio tower: sizes must be positive");
    }
    if (widths.empty() || depths.size() != widths.size() || heads.size() != widths.size()) {
        throw ConfigError("audio tower: widths, depths and heads need one entry per stage");
    }
    for (std::size_t s = 0; s < stages(); ++s) {
        const std::size_t r = grid_rows(s), c = grid_cols(s);
        const std::string where = "audio tower stage " + std::to_string(s) + ": ";
        if (widths[s] == 0 || heads[s] == 0 || widths[s] % heads[s] != 0) {
            throw ConfigError(where + "width " + std::to_string(widths[s]) + " not divisible by " +
                              std::to_string(heads[s]) + " heads");
        }
        if (r == 0 || c == 0 || r % window != 0 || c % window != 0) {
            throw ConfigError(where + "grid " + std::to_string(r) + "x" + std::to_string(c) +
                              " not divisible by window " + std::to_string(window));
        }
        if (s + 1 < stages() && (r % 2 != 0 || c % 2 != 0)) {
            throw ConfigError(where + "grid " + std::to_string(r) + "x" + std::to_string(c) +
                              " cannot be merged 2x2");
        }
    }
}

void add_audio_tower(ParameterSet& ps, const AudioTowerConfig& cfg, Rng& rng) {
    cfg.validate();
    nn::add_linear(ps, "audio.patch", cfg.patch_h * cfg.patch_w, cfg.widths[0], true, rng);
    ps.add("audio.positional_embedding", init_normal({cfg.grid_rows() * cfg.grid_cols(), cfg.widths[0]}, 0.02, rng));
    for (std::size_t s = 0; s < cfg.stages(); ++s) {
        const std::string stage = "audio.stage" + std::to_string(s);
        for (std::size_t b = 0; b < cfg.depths[s]; ++b) {
            nn::add_block(ps, stage + ".block" + std::to_string(b), cfg.widths[s], cfg.mlp_ratio, rng);
        }
        if (s + 1 < cfg.stages()) {
            nn::add_layer_norm(ps, stage + ".merge.ln", 4 * cfg.widths[s]);
            nn::add_linear(ps, stage + ".merge.proj", 4 * cfg.widths[s], cfg.widths[s + 1], false, rng);
        }
    }
    nn::add_layer_norm(ps, "audio.ln_final", cfg.widths.back());
}

NodeRef encode_audio(Binder& p, const AudioTowerConfig& cfg, std::span<const PatchSequence> batch) {
    if (batch.empty()) throw ConfigError("encode_audio: empty batch");
    const std::size_t n = batch.size(), rows = cfg.grid_rows(), cols = cfg.grid_cols();
    const std::size_t patch_dim = cfg.patch_h * cfg.patch_w;
    std::vector<double> flat;
    flat.reserve(n * rows * cols * patch_dim);
    for (const auto& item : batch) {
        if (item.rows != rows || item.cols != cols || item.tokens.shape() != Shape{rows * cols, patch_dim}) {
            throw ShapeError("encode_audio: patch grid " + std::to_string(item.rows) + "x" + std::to_string(item.cols) +
                             " of dim " + std::to_string(item.tokens.empty() ? 0 : item.tokens.shape().back()) +
                             ", tower expects " + std::to_string(rows) + "x" + std::to_string(cols) + " of dim " +
                             std::to_string(patch_dim));
        }
        flat.insert(flat.end(), item.tokens.data().begin(), item.tokens.data().end());
    }

    Graph& g = p.graph();
    NodeRef x = nn::linear(p, "audio.patch", g.constant(Tensor({n * rows * cols, patch_dim}, std::move(flat))));
    std::vector<std::size_t> positions;
    positions.reserve(n * rows * cols);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t k = 0; k < rows * cols; ++k) positions.push_back(k);
    }
    x = g.add(x, g.embed_lookup(p("audio.positional_embedding"), std::move(positions)));

    for (std::size_t s = 0; s < cfg.stages(); ++s) {
        const std::string stage = "audio.stage" + std::to_string(s);
        const std::size_t r = cfg.grid_rows(s), c = cfg.grid_cols(s), d = cfg.widths[s];
        nn::AttentionLayout layout;
        layout.batch = n;
        layout.rows = r;
        layout.cols = c;
        layout.window_rows = cfg.window;
        layout.window_cols = cfg.window;
        layout.heads = cfg.heads[s];
        for (std::size_t b = 0; b < cfg.depths[s]; ++b) x = nn::block(p, stage + ".block" + std::to_string(b), x, layout);
        if (s + 1 < cfg.stages()) {
            x = g.reshape(x, {n, r / 2, 2, c / 2, 2, d});
            x = g.transpose(x, {0, 1, 3, 2, 4, 5});
            x = g.reshape(x, {n * (r / 2) * (c / 2), 4 * d});
            x = nn::linear(p, stage + ".merge.proj", nn::layer_norm(p, stage + ".merge.ln", x));
        }
    }
    return nn::layer_norm(p, "audio.ln_final", x);
}

Tensor encode_audio(const ParameterSet& ps, const AudioTowerConfig& cfg, const MelSpectrogram& mel) {
    Graph g;
    Binder p(g, ps, false);
    const PatchSequence batch[] = {patchify(mel, cfg.patch_h, cfg.patch_w)};
    return g.value(encode_audio(p, cfg, batch));
}

}  // namespace lsac
