// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsac/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>

#include "binary_io.hpp"

namespace lsac {

const std::vector<std::string>& esc50_categories() {
    static const std::vector<std::string> names{
        "dog", "rooster", "pig", "cow", "frog", "cat", "hen", "insects", "sheep", "crow",
        "rain", "sea_waves", "crackling_fire", "crickets", "chirping_birds", "water_drops", "wind",
        "pouring_water", "toilet_flush", "thunderstorm", "crying_baby", "sneezing", "clapping", "breathing",
        "coughing", "footsteps", "laughing", "brushing_teeth", "snoring", "drinking_sipping",
        "door_wood_knock", "mouse_click", "keyboard_typing", "door_wood_creaks", "can_opening",
        "washing_machine", "vacuum_cleaner", "clock_alarm", "clock_tick", "glass_breaking",
        "helicopter", "chainsaw", "siren", "car_horn", "engine", "train", "church_bells", "airplane",
        "fireworks", "hand_saw"};
    return names;
}

const std::vector<std::string>& us8k_classes() {
    static const std::vector<std::string> names{
        "air_conditioner", "car_horn", "children_playing", "dog_bark", "drilling",
        "engine_idling", "gun_shot", "jackhammer", "siren", "street_music"};
    return names;
}

// ---- CSV ----

std::size_t CsvTable::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError("CSV is missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(const std::string& text, const std::string& what) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false, field_started = false;
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
        record.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            end_record();
        } else if (c == '\r') {
            continue;
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (quoted) throw FormatError(what + ": unterminated quoted field");
    if (!field.empty() || !record.empty()) end_record();
    if (records.empty()) throw FormatError(what + ": empty CSV (no header row)");
    CsvTable t;
    t.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.header.size()) {
            throw FormatError(what + ": row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                              " fields, header has " + std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

namespace {

std::size_t parse_index(const std::string& text, const std::string& column, std::size_t row, const std::string& what) {
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw FormatError(what + ": row " + std::to_string(row) + " column '" + column + "' is not a non-negative integer: '" +
                          text + "'");
    }
    return value;
}

std::string spaced(std::string s) {
    std::replace(s.begin(), s.end(), '_', ' ');
    return s;
}

struct Columns {
    std::string file, fold, id, name;
};

// Shared by both loaders: validates folds and ids and keeps id <-> name a
// bijection.
Dataset load_table(const std::filesystem::path& csv, const Columns& cols, DatasetSpec spec,
                   const std::vector<std::string>& canonical,
                   const std::function<std::filesystem::path(const std::string&, std::size_t)>& audio_path) {
    const std::string what = csv.string();
    CsvTable t = parse_csv(io::read_file(csv), what);
    const std::size_t c_file = t.column(cols.file), c_fold = t.column(cols.fold);
    const std::size_t c_id = t.column(cols.id), c_name = t.column(cols.name);
    if (t.rows.empty()) throw FormatError(what + ": no data rows");

    Dataset ds;
    std::map<std::size_t, std::string> id_to_name;
    std::map<std::string, std::size_t> name_to_id;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        Sample s;
        s.fold = parse_index(row[c_fold], cols.fold, r + 1, what);
        if (s.fold < 1 || s.fold > spec.n_folds) {
            throw FormatError(what + ": row " + std::to_string(r + 1) + " fold " + std::to_string(s.fold) +
                              " outside 1.." + std::to_string(spec.n_folds));
        }
        s.class_id = parse_index(row[c_id], cols.id, r + 1, what);
        if (s.class_id >= spec.n_classes) {
            throw FormatError(what + ": row " + std::to_string(r + 1) + " class id " + std::to_string(s.class_id) +
                              " outside 0.." + std::to_string(spec.n_classes - 1));
        }
        const std::string& name = row[c_name];
        if (name.empty()) throw FormatError(what + ": row " + std::to_string(r + 1) + " has an empty '" + cols.name + "'");
        auto [it_id, new_id] = id_to_name.emplace(s.class_id, name);
        auto [it_name, new_name] = name_to_id.emplace(name, s.class_id);
        if (it_id->second != name || it_name->second != s.class_id) {
            throw FormatError(what + ": row " + std::to_string(r + 1) + " maps class " + std::to_string(s.class_id) +
                              " to '" + name + "', inconsistent with earlier rows");
        }
        s.label = spaced(name);
        s.path = audio_path(row[c_file], s.fold);
        ds.samples.push_back(std::move(s));
    }
    spec.labels.resize(spec.n_classes);
    for (std::size_t k = 0; k < spec.n_classes; ++k) {
        auto it = id_to_name.find(k);
        spec.labels[k] = spaced(it != id_to_name.end() ? it->second : canonical.at(k));
    }
    ds.spec = std::move(spec);
    return ds;
}

}  // namespace

Dataset load_esc50(const std::filesystem::path& root) {
    DatasetSpec spec{"esc50", 50, 5, {}, 44100.0, 32000.0};
    Dataset ds = load_table(root / "meta" / "esc50.csv", {"filename", "fold", "target", "category"}, std::move(spec),
                            esc50_categories(),
                            [&](const std::string& f, std::size_t) { return root / "audio" / f; });
    if (ds.samples.size() != 2000) {
        std::cerr << "warning: ESC-50 metadata lists " << ds.samples.size() << " clips, expected 2000\n";
    }
    return ds;
}

Dataset load_us8k(const std::filesystem::path& root) {
    DatasetSpec spec{"us8k", 10, 10, {}, 44100.0, 44100.0};
    return load_table(root / "metadata" / "UrbanSound8K.csv", {"slice_file_name", "fold", "classID", "class"},
                      std::move(spec), us8k_classes(), [&](const std::string& f, std::size_t fold) {
                          return root / "audio" / ("fold" + std::to_string(fold)) / f;
                      });
}

std::pair<std::vector<Sample>, std::vector<Sample>> fold_split(const std::vector<Sample>& samples, std::size_t eval_fold) {
    std::pair<std::vector<Sample>, std::vector<Sample>> out;
    for (const auto& s : samples) (s.fold == eval_fold ? out.second : out.first).push_back(s);
    if (out.second.empty()) throw ConfigError("fold_split: fold " + std::to_string(eval_fold) + " has no samples");
    return out;
}

double tone_frequency(std::size_t k) { return 300.0 * std::pow(2.0, static_cast<double>(k) / 2.0); }

Dataset synth_tone_dataset(const ToneConfig& cfg, Rng& rng) {
    if (cfg.n_classes == 0 || cfg.n_classes > 8) throw ConfigError("synth_tone_dataset: n_classes must be in 1..8");
    if (cfg.clips_per_class == 0 || cfg.n_folds == 0) throw ConfigError("synth_tone_dataset: need clips and folds");
    if (!(cfg.sample_rate > 0.0) || !(cfg.duration > 0.0)) throw ConfigError("synth_tone_dataset: rate and duration must be positive");
    if (tone_frequency(cfg.n_classes - 1) * (1.0 + cfg.jitter) >= cfg.sample_rate / 2.0) {
        throw ConfigError("synth_tone_dataset: highest tone exceeds Nyquist");
    }
    Dataset ds;
    ds.spec.name = "tones";
    ds.spec.n_classes = cfg.n_classes;
    ds.spec.n_folds = cfg.n_folds;
    ds.spec.train_rate = ds.spec.eval_rate = cfg.sample_rate;
    for (std::size_t k = 0; k < cfg.n_classes; ++k) {
        ds.spec.labels.push_back("tone " + std::to_string(std::lround(tone_frequency(k))) + " hz");
    }
    const auto n = static_cast<std::size_t>(std::llround(cfg.sample_rate * cfg.duration));
    std::uniform_real_distribution<double> jitter(-cfg.jitter, cfg.jitter), phase(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t k = 0; k < cfg.n_classes; ++k) {
        for (std::size_t i = 0; i < cfg.clips_per_class; ++i) {
            const double f = tone_frequency(k) * (1.0 + jitter(rng));
            const double ph = phase(rng);
            auto w = std::make_shared<Waveform>();
            w->sample_rate = cfg.sample_rate;
            w->samples.resize(n);
            for (std::size_t t = 0; t < n; ++t) {
                w->samples[t] = cfg.amplitude * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(t) / cfg.sample_rate + ph) +
                                cfg.noise_std * noise(rng);
            }
            Sample s;
            s.path = "synthetic/tone" + std::to_string(k) + "_" + std::to_string(i) + ".wav";
            s.class_id = k;
            s.label = ds.spec.labels[k];
            s.fold = i % cfg.n_folds + 1;
            s.waveform = std::move(w);
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

Waveform load_waveform(const Sample& sample) { return sample.waveform ? *sample.waveform : load_wav(sample.path); }

BatchSampler::BatchSampler(std::vector<std::size_t> class_ids, std::size_t batch_size, std::uint64_t seed)
    : class_ids_(std::move(class_ids)), batch_size_(batch_size), rng_(seed) {
    if (batch_size_ == 0) throw ConfigError("BatchSampler: batch size must be positive");
    if (class_ids_.empty()) throw ConfigError("BatchSampler: no samples");
}

std::vector<std::vector<std::size_t>> BatchSampler::epoch() {
    std::map<std::size_t, std::vector<std::size_t>> pools;
    for (std::size_t i = 0; i < class_ids_.size(); ++i) pools[class_ids_[i]].push_back(i);
    for (auto& [c, pool] : pools) std::shuffle(pool.begin(), pool.end(), rng_);

    std::vector<std::vector<std::size_t>> batches;
    std::size_t remaining = class_ids_.size();
    while (remaining > 0) {
        std::vector<std::size_t> batch;
        while (batch.size() < batch_size_ && remaining > 0) {
            // Classes ordered by remaining count, ties in a random order.
            std::vector<std::pair<std::size_t, std::uint64_t>> order;
            for (auto& [c, pool] : pools) {
                if (!pool.empty()) order.emplace_back(c, rng_());
            }
            std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
                const std::size_t na = pools[a.first].size(), nb = pools[b.first].size();
                return na != nb ? na > nb : a.second < b.second;
            });
            for (const auto& [c, key] : order) {
                if (batch.size() == batch_size_) break;
                batch.push_back(pools[c].back());
                pools[c].pop_back();
                --remaining;
            }
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

}  // namespace lsac
