// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Hierarchical window-attention encoder over mel-spectrogram patches.
//
// patch linear + absolute position -> stage 0 blocks -> merge -> stage 1
// blocks -> ... -> final layer norm. Each merge concatenates 2x2 neighbours
// and projects them to the next stage width, halving both grid extents.

#include <span>
#include <string>
#include <vector>

#include "lsac/dsp.hpp"
#include "lsac/params.hpp"

namespace lsac {

struct PatchSequence {
    Tensor tokens;  // [rows*cols, patch_h*patch_w], frequency-major then time
    std::size_t rows = 0, cols = 0;
};

// Pads the bottom and right edges with log(1e-10) to whole patches.
PatchSequence patchify(const MelSpectrogram& mel, std::size_t patch_h, std::size_t patch_w);

struct AudioTowerConfig {
    std::size_t mel_bins = 64;
    std::size_t frames = 256;
    std::size_t patch_h = 4, patch_w = 4;
    std::size_t window = 4;
    std::size_t mlp_ratio = 4;
    // One entry per stage.
    std::vector<std::size_t> widths{96, 192};
    std::vector<std::size_t> depths{2, 2};
    std::vector<std::size_t> heads{4, 4};

    static AudioTowerConfig desk();
    // 64x256 mel, 1x4 patches, four stages ending in an 8x8 grid of width 768.
    static AudioTowerConfig full();

    std::size_t stages() const { return widths.size(); }
    std::size_t grid_rows(std::size_t stage = 0) const;
    std::size_t grid_cols(std::size_t stage = 0) const;
    // Output map geometry.
    std::size_t h_map() const { return grid_rows(stages() - 1); }
    std::size_t w_map() const { return grid_cols(stages() - 1); }
    std::size_t d_map() const { return widths.back(); }
    std::size_t tokens_out() const { return h_map() * w_map(); }

    // Throws ConfigError naming the first stage whose grid does not divide
    // by the window, cannot be merged, or whose width does not split into
    // its heads.
    void validate() const;
};

// Registers parameters under "audio.".
void add_audio_tower(ParameterSet& ps, const AudioTowerConfig& cfg, Rng& rng);

// Batch of patch grids -> [batch*h_map*w_map, d_map] tokens, each item's
// tokens in row-major grid order.
NodeRef encode_audio(Binder& p, const AudioTowerConfig& cfg, std::span<const PatchSequence> batch);

// Single spectrogram with frozen weights; returns [h_map*w_map, d_map].
Tensor encode_audio(const ParameterSet& ps, const AudioTowerConfig& cfg, const MelSpectrogram& mel);

}  // namespace lsac
