// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <complex>
#include <fstream>
#include <numbers>
#include <set>

#include "doctest.h"
#include "lsac/data.hpp"

using namespace lsac;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = LSAC_FIXTURE_DIR;

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "lsac_test_data" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
}

// The public ESC-50 layout: 40 clips per class per fold.
fs::path full_esc50() {
    auto root = scratch("esc50_full");
    std::string csv = "filename,fold,target,category,esc10,src_file,take\n";
    const auto& cats = esc50_categories();
    for (std::size_t fold = 1; fold <= 5; ++fold) {
        for (std::size_t c = 0; c < 50; ++c) {
            for (std::size_t i = 0; i < 8; ++i) {
                csv += std::to_string(fold) + "-" + std::to_string(1000 + c * 8 + i) + "-A-" + std::to_string(c) +
                       ".wav," + std::to_string(fold) + "," + std::to_string(c) + "," + cats[c] + ",False," +
                       std::to_string(c) + ",A\n";
            }
        }
    }
    write_text(root / "meta" / "esc50.csv", csv);
    return root;
}

double peak_frequency(const Waveform& w, double lo, double hi) {
    // Direct DFT scan in 2 Hz steps over [lo, hi]; clips of 0.25 s have a
    // main lobe of +-4 Hz, so a step cannot skip the peak.
    double best = lo, best_mag = -1.0;
    for (double f = lo; f <= hi; f += 2.0) {
        std::complex<double> acc = 0.0;
        for (std::size_t t = 0; t < w.samples.size(); ++t) {
            acc += w.samples[t] * std::polar(1.0, -2.0 * std::numbers::pi * f * static_cast<double>(t) / w.sample_rate);
        }
        if (std::abs(acc) > best_mag) {
            best_mag = std::abs(acc);
            best = f;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("csv: quoting, CRLF and column lookup") {
    CsvTable t = parse_csv("a,b,c\r\n1,\"x,y\",\"say \"\"hi\"\"\"\r\n\r\n2,,z", "inline");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][1] == "x,y");
    CHECK(t.rows[0][2] == "say \"hi\"");
    CHECK(t.rows[1][1].empty());
    CHECK(t.column("c") == 2);
    CHECK_THROWS_AS(t.column("d"), FormatError);
    CHECK_THROWS_AS(parse_csv("", "empty"), FormatError);
    CHECK_THROWS_AS(parse_csv("a,b\n1\n", "ragged"), FormatError);
    CHECK_THROWS_AS(parse_csv("a\n\"open\n", "quote"), FormatError);
}

TEST_CASE("esc50: canonical fixture rows") {
    Dataset ds = load_esc50(kFixtures / "esc50");
    CHECK(ds.spec.n_classes == 50);
    CHECK(ds.spec.n_folds == 5);
    REQUIRE(ds.spec.labels.size() == 50);
    CHECK(ds.spec.labels[11] == "sea waves");
    REQUIRE(ds.samples.size() == 8);
    const Sample& s = ds.samples[0];
    CHECK(s.path == kFixtures / "esc50" / "audio" / "1-100032-A-0.wav");
    CHECK(s.fold == 1);
    CHECK(s.class_id == 0);
    CHECK(s.label == "dog");
    CHECK(ds.samples[2].label == "vacuum cleaner");
    CHECK(ds.spec.train_rate == 44100.0);
    CHECK(ds.spec.eval_rate == 32000.0);
}

TEST_CASE("esc50: full layout has five folds of 400") {
    Dataset ds = load_esc50(full_esc50());
    REQUIRE(ds.samples.size() == 2000);
    std::vector<std::size_t> per_fold(6, 0);
    for (const auto& s : ds.samples) ++per_fold[s.fold];
    for (std::size_t f = 1; f <= 5; ++f) CHECK(per_fold[f] == 400);
    auto [train, eval] = fold_split(ds.samples, 4);
    CHECK(train.size() == 1600);
    CHECK(eval.size() == 400);
    for (std::size_t k = 0; k < 50; ++k) {
        std::string raw = esc50_categories()[k];
        std::replace(raw.begin(), raw.end(), '_', ' ');
        CHECK(ds.spec.labels[k] == raw);
    }
}

TEST_CASE("esc50: malformed metadata") {
    auto root = scratch("esc50_bad");
    write_text(root / "meta" / "esc50.csv", "");
    CHECK_THROWS_AS(load_esc50(root), FormatError);
    write_text(root / "meta" / "esc50.csv", "filename,fold,target,category\n");
    CHECK_THROWS_AS(load_esc50(root), FormatError);
    write_text(root / "meta" / "esc50.csv", "filename,fold,category\na.wav,1,dog\n");
    try {
        load_esc50(root);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("'target'") != std::string::npos);
    }
    write_text(root / "meta" / "esc50.csv", "filename,fold,target,category\na.wav,x,0,dog\n");
    CHECK_THROWS_AS(load_esc50(root), FormatError);
    write_text(root / "meta" / "esc50.csv", "filename,fold,target,category\na.wav,1,0,dog\nb.wav,1,0,cat\n");
    CHECK_THROWS_AS(load_esc50(root), FormatError);
    CHECK_THROWS_AS(load_esc50(scratch("esc50_missing")), Error);
}

TEST_CASE("us8k: fixture rows and class list") {
    Dataset ds = load_us8k(kFixtures / "us8k");
    CHECK(ds.spec.n_folds == 10);
    REQUIRE(ds.spec.labels.size() == 10);
    CHECK(us8k_classes().size() == 10);
    CHECK(ds.spec.labels.front() == "air conditioner");
    CHECK(ds.spec.labels.back() == "street music");
    REQUIRE(ds.samples.size() == 6);
    CHECK(ds.samples[0].fold == 5);
    CHECK(ds.samples[0].class_id == 3);
    CHECK(ds.samples[0].label == "dog bark");
    CHECK(ds.samples[2].path == kFixtures / "us8k" / "audio" / "fold10" / "100648-1-0-0.wav");
}

TEST_CASE("us8k: fold 11 is rejected") {
    auto root = scratch("us8k_bad");
    write_text(root / "metadata" / "UrbanSound8K.csv",
               "slice_file_name,fsID,start,end,salience,fold,classID,class\nx.wav,1,0,1,1,11,3,dog_bark\n");
    CHECK_THROWS_AS(load_us8k(root), FormatError);
    write_text(root / "metadata" / "UrbanSound8K.csv",
               "slice_file_name,fsID,start,end,salience,fold,classID,class\nx.wav,1,0,1,1,0,3,dog_bark\n");
    CHECK_THROWS_AS(load_us8k(root), FormatError);
}

TEST_CASE("fold_split partitions every fold") {
    Dataset ds = load_esc50(full_esc50());
    for (std::size_t fold = 1; fold <= 5; ++fold) {
        auto [train, eval] = fold_split(ds.samples, fold);
        CHECK(train.size() + eval.size() == ds.samples.size());
        std::set<fs::path> a, b;
        for (const auto& s : train) a.insert(s.path);
        for (const auto& s : eval) {
            b.insert(s.path);
            CHECK(s.fold == fold);
        }
        for (const auto& p : b) CHECK(a.count(p) == 0);
        CHECK(a.size() + b.size() == ds.samples.size());
    }
    CHECK_THROWS_AS(fold_split(ds.samples, 6), ConfigError);
}

TEST_CASE("synthetic tones: counts, labels, folds") {
    ToneConfig cfg;
    cfg.clips_per_class = 32;
    cfg.duration = 0.25;
    Rng rng(1);
    Dataset ds = synth_tone_dataset(cfg, rng);
    CHECK(ds.samples.size() == 128);
    CHECK(std::set<std::string>(ds.spec.labels.begin(), ds.spec.labels.end()).size() == 4);
    CHECK(ds.spec.labels[0] == "tone 300 hz");
    CHECK(ds.spec.labels[1] == "tone 424 hz");
    for (const auto& s : ds.samples) {
        CHECK(s.label == ds.spec.labels[s.class_id]);
        CHECK(s.fold >= 1);
        CHECK(s.fold <= 5);
        CHECK(s.waveform->samples.size() == 4000);
    }
    cfg.n_classes = 9;
    CHECK_THROWS_AS(synth_tone_dataset(cfg, rng), ConfigError);
}

TEST_CASE("synthetic tones: deterministic per seed") {
    ToneConfig cfg;
    cfg.clips_per_class = 3;
    cfg.duration = 0.1;
    Rng a(7), b(7), c(8);
    Dataset x = synth_tone_dataset(cfg, a), y = synth_tone_dataset(cfg, b), z = synth_tone_dataset(cfg, c);
    for (std::size_t i = 0; i < x.samples.size(); ++i) CHECK(x.samples[i].waveform->samples == y.samples[i].waveform->samples);
    CHECK(x.samples[0].waveform->samples != z.samples[0].waveform->samples);
}

TEST_CASE("synthetic tones: class 2 peaks within 10% of its frequency") {
    ToneConfig cfg;
    cfg.clips_per_class = 5;
    cfg.duration = 0.25;
    Rng rng(3);
    Dataset ds = synth_tone_dataset(cfg, rng);
    const double f2 = tone_frequency(2);
    CHECK(f2 == doctest::Approx(600.0).epsilon(1e-12));
    for (const auto& s : ds.samples) {
        if (s.class_id != 2) continue;
        const double peak = peak_frequency(*s.waveform, 100.0, 2000.0);
        CHECK(std::abs(peak - f2) <= 0.1 * f2 + 1.0);
    }
}

TEST_CASE("batch sampler: class-distinct, exhaustive and seeded") {
    std::vector<std::size_t> classes;
    for (std::size_t k = 0; k < 4; ++k) {
        for (std::size_t i = 0; i < 7 + k; ++i) classes.push_back(k);
    }
    for (std::size_t batch : {1u, 2u, 4u}) {
        BatchSampler s(classes, batch, 11), t(classes, batch, 11);
        for (int e = 0; e < 3; ++e) {
            auto epoch = s.epoch();
            CHECK(epoch == t.epoch());
            std::multiset<std::size_t> seen;
            std::vector<std::size_t> left{7, 8, 9, 10};
            for (const auto& b : epoch) {
                CHECK(b.size() <= batch);
                // Distinct unless fewer classes than slots still have items.
                const auto live = static_cast<std::size_t>(std::count_if(left.begin(), left.end(), [](std::size_t n) { return n > 0; }));
                std::set<std::size_t> labels;
                for (std::size_t i : b) {
                    seen.insert(i);
                    labels.insert(classes[i]);
                    --left[classes[i]];
                }
                CHECK(labels.size() == std::min(b.size(), live));
            }
            CHECK(seen.size() == classes.size());
            CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == classes.size());
        }
    }
    // Balanced classes: every batch is fully distinct.
    std::vector<std::size_t> balanced;
    for (std::size_t i = 0; i < 32; ++i) balanced.push_back(i % 4);
    BatchSampler even(balanced, 4, 5);
    for (const auto& b : even.epoch()) {
        std::set<std::size_t> labels;
        for (std::size_t i : b) labels.insert(balanced[i]);
        CHECK(labels.size() == 4);
    }
    BatchSampler a(classes, 4, 1), b(classes, 4, 2);
    CHECK(a.epoch() != b.epoch());
    // More slots than classes: duplicates become unavoidable but every item is still used once.
    BatchSampler wide(classes, 6, 3);
    std::size_t total = 0;
    for (const auto& b : wide.epoch()) total += b.size();
    CHECK(total == classes.size());
}

TEST_CASE("load_waveform prefers the in-memory clip and falls back to the file") {
    auto dir = scratch("wave");
    Waveform w;
    w.sample_rate = 8000;
    w.samples = {0.0, 0.5, -0.5};
    save_wav(dir / "x.wav", w);
    Sample s;
    s.path = dir / "x.wav";
    CHECK(load_waveform(s).samples == w.samples);
    s.waveform = std::make_shared<Waveform>(Waveform{{0.25}, 8000});
    CHECK(load_waveform(s).samples == std::vector<double>{0.25});
}
