// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "lsac/audio_tower.hpp"

using namespace lsac;

namespace {

MelSpectrogram random_mel(std::size_t bins, std::size_t frames, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(-4.0, 2.0);
    MelSpectrogram m;
    m.bins = bins;
    m.frames = frames;
    m.values.resize(bins * frames);
    for (auto& v : m.values) v = dist(rng);
    return m;
}

AudioTowerConfig tiny() {
    AudioTowerConfig cfg;
    cfg.mel_bins = 16;
    cfg.frames = 16;
    cfg.patch_h = 2;
    cfg.patch_w = 2;
    cfg.window = 4;
    cfg.mlp_ratio = 2;
    cfg.widths = {16, 32};
    cfg.depths = {1, 1};
    cfg.heads = {2, 4};
    return cfg;
}

}  // namespace

TEST_CASE("patchify: 64x256 with 4x4 patches gives 1024 patches of 16") {
    std::mt19937_64 rng(1);
    PatchSequence p = patchify(random_mel(64, 256, rng), 4, 4);
    CHECK(p.rows == 16);
    CHECK(p.cols == 64);
    CHECK(p.tokens.shape() == Shape{1024, 16});
}

TEST_CASE("patchify: a single patch is the flattened input") {
    std::mt19937_64 rng(2);
    MelSpectrogram m = random_mel(4, 4, rng);
    PatchSequence p = patchify(m, 4, 4);
    REQUIRE(p.tokens.shape() == Shape{1, 16});
    for (std::size_t i = 0; i < 16; ++i) CHECK(p.tokens[i] == m.values[i]);
}

TEST_CASE("patchify: ragged edges are padded with the log floor") {
    std::mt19937_64 rng(3);
    MelSpectrogram m = random_mel(5, 4, rng);
    PatchSequence p = patchify(m, 4, 4);
    CHECK(p.rows == 2);
    CHECK(p.cols == 1);
    REQUIRE(p.tokens.shape() == Shape{2, 16});
    // Second patch: row 4 of the mel, then three rows of padding.
    for (std::size_t j = 0; j < 4; ++j) CHECK(p.tokens[16 + j] == m.at(4, j));
    for (std::size_t k = 4; k < 16; ++k) CHECK(p.tokens[16 + k] == std::log(1e-10));
}

TEST_CASE("patchify: patches are ordered frequency-major then time") {
    MelSpectrogram m;
    m.bins = 4;
    m.frames = 6;
    for (std::size_t i = 0; i < 24; ++i) m.values.push_back(static_cast<double>(i));
    PatchSequence p = patchify(m, 2, 3);
    REQUIRE(p.rows == 2);
    REQUIRE(p.cols == 2);
    // Patch (0,1) starts at bin 0 frame 3; patch (1,0) at bin 2 frame 0.
    CHECK(p.tokens[1 * 6 + 0] == m.at(0, 3));
    CHECK(p.tokens[1 * 6 + 3] == m.at(1, 3));
    CHECK(p.tokens[2 * 6 + 0] == m.at(2, 0));
    CHECK(p.tokens[3 * 6 + 5] == m.at(3, 5));
}

TEST_CASE("config arithmetic: desk and full profiles") {
    AudioTowerConfig desk = AudioTowerConfig::desk();
    CHECK_NOTHROW(desk.validate());
    CHECK(desk.grid_rows() == 16);
    CHECK(desk.grid_cols() == 64);
    CHECK(desk.h_map() == 8);
    CHECK(desk.w_map() == 32);
    CHECK(desk.d_map() == 192);
    CHECK(desk.tokens_out() == desk.h_map() * desk.w_map());

    AudioTowerConfig full = AudioTowerConfig::full();
    CHECK_NOTHROW(full.validate());
    CHECK(full.grid_rows() == 64);
    CHECK(full.grid_cols() == 64);
    CHECK(full.tokens_out() == 64);
    CHECK(full.h_map() == 8);
    CHECK(full.w_map() == 8);
    CHECK(full.d_map() == 768);
}

TEST_CASE("config validation rejects indivisible grids") {
    AudioTowerConfig cfg = tiny();
    cfg.window = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny();
    cfg.widths = {16, 30};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny();
    cfg.depths = {1};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny();
    cfg.widths = {16, 32, 64};
    cfg.depths = {1, 1, 1};
    cfg.heads = {2, 2, 2};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);  // third stage grid is 2x2
    ParameterSet ps;
    Rng rng(0);
    CHECK_THROWS_AS(add_audio_tower(ps, cfg, rng), ConfigError);
}

TEST_CASE("encode_audio: desk profile output shape") {
    AudioTowerConfig cfg = AudioTowerConfig::desk();
    ParameterSet ps;
    Rng rng(4);
    add_audio_tower(ps, cfg, rng);
    std::mt19937_64 data(4);
    Tensor out = encode_audio(ps, cfg, random_mel(64, 256, data));
    CHECK(out.shape() == Shape{256, 192});
}

TEST_CASE("encode_audio: zero spectrogram gives finite tokens") {
    AudioTowerConfig cfg = tiny();
    ParameterSet ps;
    Rng rng(5);
    add_audio_tower(ps, cfg, rng);
    MelSpectrogram m;
    m.bins = 16;
    m.frames = 16;
    m.values.assign(256, 0.0);
    Tensor out = encode_audio(ps, cfg, m);
    CHECK(out.shape() == Shape{cfg.tokens_out(), cfg.d_map()});
    for (double v : out.data()) CHECK(std::isfinite(v));
}

TEST_CASE("encode_audio: mismatched spectrogram size is a shape error") {
    AudioTowerConfig cfg = tiny();
    ParameterSet ps;
    Rng rng(6);
    add_audio_tower(ps, cfg, rng);
    std::mt19937_64 data(6);
    CHECK_THROWS_AS(encode_audio(ps, cfg, random_mel(16, 20, data)), ShapeError);
}

TEST_CASE("encode_audio: attention stays inside windows") {
    // One stage on an 8x8 grid with 4x4 windows: changing patches in the
    // bottom-right window must leave the other three windows untouched.
    AudioTowerConfig cfg = tiny();
    cfg.widths = {16};
    cfg.depths = {2};
    cfg.heads = {2};
    ParameterSet ps;
    Rng rng(7);
    add_audio_tower(ps, cfg, rng);
    std::mt19937_64 data(7);
    MelSpectrogram a = random_mel(16, 16, data);
    MelSpectrogram b = a;
    for (std::size_t f = 8; f < 16; ++f) {
        for (std::size_t t = 8; t < 16; ++t) b.values[f * 16 + t] = 0.0;
    }
    Tensor ya = encode_audio(ps, cfg, a), yb = encode_audio(ps, cfg, b);
    for (std::size_t r = 0; r < 8; ++r) {
        for (std::size_t c = 0; c < 8; ++c) {
            bool same = true;
            for (std::size_t d = 0; d < 16; ++d) same = same && ya[(r * 8 + c) * 16 + d] == yb[(r * 8 + c) * 16 + d];
            CHECK(same == (r < 4 || c < 4));
        }
    }
}

TEST_CASE("encode_audio: batched items match single encodes") {
    AudioTowerConfig cfg = tiny();
    ParameterSet ps;
    Rng rng(8);
    add_audio_tower(ps, cfg, rng);
    std::mt19937_64 data(8);
    std::vector<MelSpectrogram> mels{random_mel(16, 16, data), random_mel(16, 16, data), random_mel(16, 16, data)};
    std::vector<PatchSequence> patches;
    for (const auto& m : mels) patches.push_back(patchify(m, 2, 2));
    Graph g;
    Binder p(g, ps, false);
    Tensor all = g.value(encode_audio(p, cfg, patches));
    const std::size_t per = cfg.tokens_out() * cfg.d_map();
    REQUIRE(all.numel() == 3 * per);
    for (std::size_t i = 0; i < 3; ++i) {
        Tensor one = encode_audio(ps, cfg, mels[i]);
        for (std::size_t k = 0; k < per; ++k) CHECK(all[i * per + k] == doctest::Approx(one[k]).epsilon(1e-12));
    }
}

TEST_CASE("encode_audio: every parameter receives gradient") {
    AudioTowerConfig cfg = tiny();
    ParameterSet ps;
    Rng rng(9);
    add_audio_tower(ps, cfg, rng);
    std::mt19937_64 data(9);
    const PatchSequence batch[] = {patchify(random_mel(16, 16, data), 2, 2), patchify(random_mel(16, 16, data), 2, 2)};
    Graph g;
    Binder p(g, ps);
    NodeRef out = encode_audio(p, cfg, batch);
    NodeRef loss = g.sum(g.mul(out, g.constant(init_normal(g.shape(out), 1.0, rng))));
    auto grads = p.gradients(g.backward(loss));
    CHECK(grads.size() == ps.size());
    for (const auto& [name, grad] : grads) {
        double norm = 0.0;
        for (double v : grad.data()) norm += std::abs(v);
        INFO(name);
        CHECK(norm > 0.0);
    }
}
