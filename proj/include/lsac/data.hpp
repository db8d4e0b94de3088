// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lsac/dsp.hpp"

namespace lsac {

struct Sample {
    std::filesystem::path path;
    std::size_t class_id = 0;
    std::string label;  // human-readable; underscores already replaced by spaces
    std::size_t fold = 1;  // 1-based
    // Set for generated clips; file-backed samples load from `path`.
    std::shared_ptr<const Waveform> waveform;
};

struct DatasetSpec {
    std::string name;
    std::size_t n_classes = 0;
    std::size_t n_folds = 0;
    std::vector<std::string> labels;  // indexed by class id
    double train_rate = 0.0;  // Hz
    double eval_rate = 0.0;
};

struct Dataset {
    DatasetSpec spec;
    std::vector<Sample> samples;
};

const std::vector<std::string>& esc50_categories();
const std::vector<std::string>& us8k_classes();

// root/meta/esc50.csv with columns filename, fold, target, category; audio
// under root/audio/. A row count other than 2000 is reported on stderr.
Dataset load_esc50(const std::filesystem::path& root);

// root/metadata/UrbanSound8K.csv with columns slice_file_name, fold, classID,
// class; audio under root/audio/fold<N>/.
Dataset load_us8k(const std::filesystem::path& root);

// (train, eval): eval holds exactly the samples of eval_fold.
std::pair<std::vector<Sample>, std::vector<Sample>> fold_split(const std::vector<Sample>& samples,
                                                               std::size_t eval_fold);

struct ToneConfig {
    std::size_t n_classes = 4;
    std::size_t clips_per_class = 40;
    std::size_t n_folds = 5;
    double sample_rate = 16000.0;
    double duration = 1.0;      // seconds
    double jitter = 0.1;        // relative frequency jitter, uniform in [-j, j]
    double amplitude = 0.5;
    double noise_std = 0.05;
};

// 300 * 2^(k/2) Hz.
double tone_frequency(std::size_t k);

// Class k is a sine near tone_frequency(k) with random phase and white
// noise, labelled "tone <f> hz". Clip i of each class goes to fold
// i % n_folds + 1.
Dataset synth_tone_dataset(const ToneConfig& cfg, Rng& rng);

Waveform load_waveform(const Sample& sample);

// Seeded mini-batches over sample indices. Each batch takes one item from
// each of the classes with the most remaining items (random tie-break), so
// batches are class-distinct whenever enough classes remain.
class BatchSampler {
public:
    BatchSampler(std::vector<std::size_t> class_ids, std::size_t batch_size, std::uint64_t seed);

    // One pass over every index.
    std::vector<std::vector<std::size_t>> epoch();

    const Rng& rng() const { return rng_; }
    void set_rng(const Rng& rng) { rng_ = rng; }

private:
    std::vector<std::size_t> class_ids_;
    std::size_t batch_size_;
    Rng rng_;
};

// Minimal RFC 4180 reader: header row, comma separated, optional quotes.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index by name; throws FormatError naming the column.
    std::size_t column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text, const std::string& what);

}  // namespace lsac
