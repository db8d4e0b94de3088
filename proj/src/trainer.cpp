// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsac/trainer.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "lsac/contrastive.hpp"

namespace lsac {

namespace {

// ---- config fields ----------------------------------------------------------

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError("not a number: \"" + s + "\"");
    return v;
}

std::uint64_t parse_u64(const std::string& s) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ConfigError("not a non-negative integer: \"" + s + "\"");
    }
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw ConfigError("not a boolean (true or false): \"" + s + "\"");
}

std::string format_list(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

std::vector<std::size_t> parse_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(parse_u64(trim(item)));
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

struct Field {
    const char* key;
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const std::string&)> set;
};

template <typename T>
Field field(const char* key, T TrainConfig::*member) {
    Field f{key, {}, {}};
    if constexpr (std::is_same_v<T, std::string>) {
        f.get = [member](const TrainConfig& c) { return c.*member; };
        f.set = [member](TrainConfig& c, const std::string& v) { c.*member = v; };
    } else if constexpr (std::is_same_v<T, bool>) {
        f.get = [member](const TrainConfig& c) { return std::string(c.*member ? "true" : "false"); };
        f.set = [member](TrainConfig& c, const std::string& v) { c.*member = parse_bool(v); };
    } else if constexpr (std::is_same_v<T, double>) {
        f.get = [member](const TrainConfig& c) { return format_double(c.*member); };
        f.set = [member](TrainConfig& c, const std::string& v) { c.*member = parse_double(v); };
    } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
        f.get = [member](const TrainConfig& c) { return format_list(c.*member); };
        f.set = [member](TrainConfig& c, const std::string& v) { c.*member = parse_list(v); };
    } else if constexpr (std::is_same_v<T, HeadKind>) {
        f.get = [member](const TrainConfig& c) { return to_string(c.*member); };
        f.set = [member](TrainConfig& c, const std::string& v) { c.*member = parse_head_kind(v); };
    } else {
        f.get = [member](const TrainConfig& c) { return std::to_string(c.*member); };
        f.set = [member](TrainConfig& c, const std::string& v) { c.*member = static_cast<T>(parse_u64(v)); };
    }
    return f;
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        field("dataset", &TrainConfig::dataset),
        field("root", &TrainConfig::root),
        field("eval_fold", &TrainConfig::eval_fold),
        field("train_rate", &TrainConfig::train_rate),
        field("eval_rate", &TrainConfig::eval_rate),
        field("synth_classes", &TrainConfig::synth_classes),
        field("synth_clips", &TrainConfig::synth_clips),
        field("synth_folds", &TrainConfig::synth_folds),
        field("synth_duration", &TrainConfig::synth_duration),
        field("synth_rate", &TrainConfig::synth_rate),
        field("synth_seed", &TrainConfig::synth_seed),
        field("epochs", &TrainConfig::epochs),
        field("seed", &TrainConfig::seed),
        field("lr0", &TrainConfig::lr0),
        field("gamma", &TrainConfig::gamma),
        field("weight_decay", &TrainConfig::weight_decay),
        field("momentum", &TrainConfig::momentum),
        field("batch_size", &TrainConfig::batch_size),
        field("scale", &TrainConfig::scale),
        field("learnable_scale", &TrainConfig::learnable_scale),
        field("prompt", &TrainConfig::prompt),
        field("augment", &TrainConfig::augment),
        field("crop_min", &TrainConfig::crop_min),
        field("crop_max", &TrainConfig::crop_max),
        field("noise", &TrainConfig::noise),
        field("snr_min", &TrainConfig::snr_min),
        field("snr_max", &TrainConfig::snr_max),
        field("profile", &TrainConfig::profile),
        field("n_fft", &TrainConfig::n_fft),
        field("hop", &TrainConfig::hop),
        field("n_mels", &TrainConfig::n_mels),
        field("fmin", &TrainConfig::fmin),
        field("fmax", &TrainConfig::fmax),
        field("clip_frames", &TrainConfig::clip_frames),
        field("patch_h", &TrainConfig::patch_h),
        field("patch_w", &TrainConfig::patch_w),
        field("window", &TrainConfig::window),
        field("audio_widths", &TrainConfig::audio_widths),
        field("audio_depths", &TrainConfig::audio_depths),
        field("audio_heads", &TrainConfig::audio_heads),
        field("text_width", &TrainConfig::text_width),
        field("text_layers", &TrainConfig::text_layers),
        field("text_heads", &TrainConfig::text_heads),
        field("max_tokens", &TrainConfig::max_tokens),
        field("head", &TrainConfig::head),
        field("embed_dim", &TrainConfig::embed_dim),
        field("cscm_reduction", &TrainConfig::cscm_reduction),
        field("cscm_kernel", &TrainConfig::cscm_kernel),
        field("cscm_channels", &TrainConfig::cscm_channels),
    };
    return table;
}

struct ConfigLine {
    std::size_t line_no;
    std::string key, value;
};

std::vector<ConfigLine> split_config(const std::string& text) {
    std::vector<ConfigLine> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        // Trailing comments are stripped except from the prompt, which is
        // taken verbatim.
        std::string value = line.substr(eq + 1);
        if (key != "prompt") {
            const auto hash = value.find('#');
            if (hash != std::string::npos) value.resize(hash);
        }
        out.push_back({line_no, key, trim(value)});
    }
    return out;
}

std::string crc_hex(std::string_view bytes) {
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
    return buf;
}

std::uint32_t crc_of(std::string_view bytes) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
}

}  // namespace

// ---- TrainConfig ------------------------------------------------------------

TrainConfig TrainConfig::with_profile(const std::string& name) {
    TrainConfig cfg;
    if (name == "desk") return cfg;
    if (name != "full") throw ConfigError("unknown profile '" + name + "' (desk, full)");
    cfg.profile = "full";
    const auto audio = AudioTowerConfig::full();
    cfg.n_mels = audio.mel_bins;
    cfg.clip_frames = audio.frames;
    cfg.patch_h = audio.patch_h;
    cfg.patch_w = audio.patch_w;
    cfg.window = audio.window;
    cfg.audio_widths = audio.widths;
    cfg.audio_depths = audio.depths;
    cfg.audio_heads = audio.heads;
    cfg.text_width = 512;
    cfg.text_layers = 12;
    cfg.text_heads = 8;
    return cfg;
}

TrainConfig TrainConfig::parse(const std::string& text) {
    const auto lines = split_config(text);
    TrainConfig cfg;
    for (const auto& l : lines) {
        if (l.key == "profile") cfg = with_profile(l.value);
    }
    for (const auto& l : lines) {
        const auto& table = fields();
        auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return l.key == f.key; });
        if (it == table.end()) {
            throw ConfigError("config line " + std::to_string(l.line_no) + ": unknown key '" + l.key + "'");
        }
        try {
            it->set(cfg, l.value);
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(l.line_no) + " (" + l.key + "): " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) { return parse(io::read_file(path)); }

std::string TrainConfig::serialize() const {
    std::string out;
    for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
    return out;
}

std::string TrainConfig::hash() const { return crc_hex(serialize()); }

void TrainConfig::validate() const {
    require(dataset == "esc50" || dataset == "us8k" || dataset == "synth", "dataset must be esc50, us8k or synth");
    require(eval_fold >= 1, "eval_fold is 1-based");
    require(train_rate >= 0.0 && eval_rate >= 0.0, "rates must be non-negative (0 = dataset rate)");
    require(synth_classes > 0 && synth_clips > 0 && synth_folds > 0 && synth_duration > 0.0 && synth_rate > 0.0,
            "synth fields must be positive");
    require(lr0 > 0.0 && std::isfinite(lr0), "lr0 must be positive");
    require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
    require(weight_decay >= 0.0, "weight_decay must be non-negative");
    require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
    require(batch_size > 0, "batch_size must be positive");
    require(scale > 0.0 && std::isfinite(scale), "scale must be positive");
    PromptTemplate{prompt};
    require(crop_min > 0.0 && crop_min <= crop_max && crop_max <= 1.0, "need 0 < crop_min <= crop_max <= 1");
    require(snr_min <= snr_max, "need snr_min <= snr_max");
    require(n_fft > 0 && hop > 0 && n_mels > 0 && clip_frames > 0, "mel sizes must be positive");
    require(fmin >= 0.0 && fmin < fmax, "need 0 <= fmin < fmax");
    require(embed_dim > 0, "embed_dim must be positive");
    audio().validate();
    text().validate();
    if (head == HeadKind::cscm) cscm().validate();
}

MelConfig TrainConfig::mel() const { return MelConfig{n_fft, hop, n_mels, fmin, fmax}; }

AugmentConfig TrainConfig::augmentation() const {
    AugmentConfig a;
    a.crop_fraction = {crop_min, crop_max};
    if (noise) {
        a.noise_snr_db = std::array<double, 2>{snr_min, snr_max};
    } else {
        a.noise_snr_db.reset();
    }
    return a;
}

AudioTowerConfig TrainConfig::audio() const {
    AudioTowerConfig a;
    a.mel_bins = n_mels;
    a.frames = clip_frames;
    a.patch_h = patch_h;
    a.patch_w = patch_w;
    a.window = window;
    a.widths = audio_widths;
    a.depths = audio_depths;
    a.heads = audio_heads;
    return a;
}

TextTowerConfig TrainConfig::text() const {
    TextTowerConfig t;
    t.vocab_size = default_vocab().size();
    t.max_len = max_tokens;
    t.width = text_width;
    t.layers = text_layers;
    t.heads = text_heads;
    t.embed_dim = embed_dim;
    return t;
}

CscmConfig TrainConfig::cscm() const {
    const auto a = audio();
    CscmConfig c;
    c.depth = a.d_map();
    c.height = a.h_map();
    c.width = a.w_map();
    c.reduction = cscm_reduction;
    c.spatial_kernel = cscm_kernel;
    c.head_channels = cscm_channels;
    c.embed_dim = embed_dim;
    return c;
}

// ---- optimization -----------------------------------------------------------

void sgd_step(ParameterSet& params, const std::map<std::string, Tensor>& grads, double lr, double weight_decay,
              double momentum, std::map<std::string, Tensor>* velocity) {
    for (const auto& [name, g] : grads) {
        const Tensor& p = params.get(name);
        if (g.shape() != p.shape()) {
            throw ShapeError("sgd_step: gradient of '" + name + "' has shape " + to_string(g.shape()) +
                             ", parameter has " + to_string(p.shape()));
        }
        for (double v : g.data()) {
            if (!std::isfinite(v)) throw Error("sgd_step: non-finite gradient in parameter '" + name + "'");
        }
    }
    if (momentum > 0.0 && !velocity) throw ConfigError("sgd_step: momentum needs a velocity buffer");
    for (const auto& [name, g] : grads) {
        const Tensor& p = params.get(name);
        const auto pd = p.data();
        const auto gd = g.data();
        std::vector<double> out(pd.size());
        if (momentum > 0.0) {
            auto it = velocity->find(name);
            std::vector<double> v(pd.size(), 0.0);
            if (it != velocity->end()) v.assign(it->second.data().begin(), it->second.data().end());
            for (std::size_t i = 0; i < pd.size(); ++i) {
                v[i] = momentum * v[i] + (gd[i] + weight_decay * pd[i]);
                out[i] = pd[i] - lr * v[i];
            }
            (*velocity)[name] = Tensor(p.shape(), std::move(v));
        } else {
            for (std::size_t i = 0; i < pd.size(); ++i) out[i] = pd[i] - lr * (gd[i] + weight_decay * pd[i]);
        }
        params.set(name, Tensor(p.shape(), std::move(out)));
    }
}

double lr_at_epoch(double lr0, double gamma, std::size_t epoch) {
    // Extended precision keeps the result within one rounding of lr0 * gamma^epoch.
    return static_cast<double>(static_cast<long double>(lr0) *
                               std::pow(static_cast<long double>(gamma), static_cast<long double>(epoch)));
}

// ---- model ------------------------------------------------------------------

Model init_model(const TrainConfig& cfg) {
    cfg.validate();
    Model m{cfg, {}};
    Rng rng(cfg.seed);
    const auto audio = cfg.audio();
    add_audio_tower(m.params, audio, rng);
    if (cfg.head == HeadKind::cscm) {
        add_cscm(m.params, cfg.cscm(), rng);
    } else {
        add_pool_head(m.params, audio.d_map(), cfg.embed_dim, rng);
    }
    add_text_tower(m.params, cfg.text(), rng);
    if (cfg.learnable_scale) m.params.add(kLogScaleParam, Tensor::vector({std::log(cfg.scale)}));
    return m;
}

NodeRef embed_audio(Binder& p, const TrainConfig& cfg, std::span<const MelSpectrogram> mels) {
    std::vector<PatchSequence> patches;
    patches.reserve(mels.size());
    for (const auto& m : mels) {
        if (m.bins != cfg.n_mels || m.frames != cfg.clip_frames) {
            throw ShapeError("embed_audio: spectrogram is " + std::to_string(m.bins) + "x" + std::to_string(m.frames) +
                             ", model expects " + std::to_string(cfg.n_mels) + "x" + std::to_string(cfg.clip_frames));
        }
        patches.push_back(patchify(m, cfg.patch_h, cfg.patch_w));
    }
    const NodeRef tokens = encode_audio(p, cfg.audio(), patches);
    if (cfg.head == HeadKind::cscm) return cscm_head(p, cfg.cscm(), tokens, mels.size());
    return baseline_pool_project(p, tokens, mels.size());
}

NodeRef embed_text(Binder& p, const TrainConfig& cfg, std::span<const std::string> labels) {
    const auto seqs = label_tokens(labels, PromptTemplate(cfg.prompt), default_vocab(), cfg.max_tokens);
    return encode_text(p, cfg.text(), seqs);
}

double train_rate(const TrainConfig& cfg, const DatasetSpec& spec) {
    return cfg.train_rate > 0.0 ? cfg.train_rate : spec.train_rate;
}

double eval_rate(const TrainConfig& cfg, const DatasetSpec& spec) {
    return cfg.eval_rate > 0.0 ? cfg.eval_rate : spec.eval_rate;
}

Waveform prepare_waveform(const Sample& sample, const TrainConfig& cfg, double rate) {
    Waveform w = load_waveform(sample);
    if (w.sample_rate != rate) w = resample(w, rate);
    return fix_length(w, samples_for_frames(cfg.clip_frames, cfg.mel()));
}

// ---- training ---------------------------------------------------------------

namespace {

std::vector<std::size_t> class_ids_of(const std::vector<Sample>& samples) {
    std::vector<std::size_t> ids;
    ids.reserve(samples.size());
    for (const auto& s : samples) ids.push_back(s.class_id);
    return ids;
}

std::vector<MelSpectrogram> mels_of(const MelFrontend& frontend, const std::vector<Waveform>& waves) {
    std::vector<MelSpectrogram> out(waves.size());
    const auto n = static_cast<std::ptrdiff_t>(waves.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = frontend(waves[i]);
    return out;
}

}  // namespace

Trainer::Trainer(Model model, const DatasetSpec& spec, std::vector<Sample> train_set)
    : model_(std::move(model)),
      samples_(std::move(train_set)),
      sampler_(class_ids_of(samples_), model_.config.batch_size, model_.config.seed + 1),
      augment_rng_(model_.config.seed + 2) {
    if (samples_.empty()) throw ConfigError("train: empty train set");
    const double rate = train_rate(model_.config, spec);
    frontend_ = std::make_shared<const MelFrontend>(model_.config.mel(), rate);
    waves_.resize(samples_.size());
    const auto n = static_cast<std::ptrdiff_t>(samples_.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) waves_[i] = prepare_waveform(samples_[i], model_.config, rate);
    for (const auto& s : samples_) labels_.push_back(s.label);
}

Trainer::Trainer(const TrainConfig& cfg, const DatasetSpec& spec, std::vector<Sample> train_set)
    : Trainer(init_model(cfg), spec, std::move(train_set)) {}

Trainer::Trainer(const Checkpoint& ckpt, const DatasetSpec& spec, std::vector<Sample> train_set)
    : Trainer(model_from(ckpt), spec, std::move(train_set)) {
    velocity_ = ckpt.optimizer;
    epoch_ = ckpt.epoch;
    loss_log_ = ckpt.loss_log;
    std::istringstream in(ckpt.rng_state);
    Rng sampler_rng;
    if (!(in >> sampler_rng >> augment_rng_)) throw FormatError("checkpoint: unreadable rng state");
    sampler_.set_rng(sampler_rng);
}

double Trainer::run_epoch() {
    const TrainConfig& cfg = model_.config;
    const double lr = lr_at_epoch(cfg.lr0, cfg.gamma, epoch_);
    const AugmentConfig aug = cfg.augmentation();
    const auto batches = sampler_.epoch();
    double total = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
        const auto& idx = batches[b];
        // One generator per clip, seeded in batch order, keeps the parallel
        // augmentation deterministic.
        std::vector<std::uint64_t> seeds(idx.size());
        for (auto& s : seeds) s = augment_rng_();
        std::vector<Waveform> waves(idx.size());
        const auto n = static_cast<std::ptrdiff_t>(idx.size());
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            if (cfg.augment) {
                Rng r(seeds[i]);
                waves[i] = augment(waves_[idx[i]], aug, r);
            } else {
                waves[i] = waves_[idx[i]];
            }
        }
        const auto mels = mels_of(*frontend_, waves);

        std::vector<std::string> unique;
        std::vector<std::size_t> rows;
        for (std::size_t i : idx) {
            auto it = std::find(unique.begin(), unique.end(), labels_[i]);
            rows.push_back(static_cast<std::size_t>(it - unique.begin()));
            if (it == unique.end()) unique.push_back(labels_[i]);
        }

        // Any failure inside a step is reported with its position in the run.
        try {
            Graph g;
            Binder p(g, model_.params);
            const NodeRef a = embed_audio(p, cfg, mels);
            const NodeRef t = g.embed_lookup(embed_text(p, cfg, unique), rows);
            const NodeRef s = similarity_matrix(g, a, t);
            const NodeRef loss = cfg.learnable_scale ? contrastive_loss(g, s, p(kLogScaleParam))
                                                     : contrastive_loss(g, s, cfg.scale);
            const double value = g.value(loss).item();
            if (!std::isfinite(value)) throw Error("non-finite loss");
            total += value;
            sgd_step(model_.params, p.gradients(g.backward(loss)), lr, cfg.weight_decay, cfg.momentum, &velocity_);
        } catch (const Error& e) {
            throw Error("train: epoch " + std::to_string(epoch_) + ", batch " + std::to_string(b) + ": " + e.what());
        }
    }
    const double mean = total / static_cast<double>(batches.size());
    loss_log_.push_back(mean);
    ++epoch_;
    return mean;
}

Checkpoint Trainer::checkpoint() const {
    std::ostringstream rng;
    rng << sampler_.rng() << "\n" << augment_rng_;
    return Checkpoint{model_.config, model_.params, velocity_, epoch_, rng.str(), loss_log_};
}

Checkpoint train(const TrainConfig& cfg, const DatasetSpec& spec, const std::vector<Sample>& train_set,
                 std::ostream* log) {
    Trainer trainer(cfg, spec, train_set);
    while (trainer.epoch() < cfg.epochs) {
        const double lr = lr_at_epoch(cfg.lr0, cfg.gamma, trainer.epoch());
        const double loss = trainer.run_epoch();
        if (log) *log << "epoch " << trainer.epoch() << " lr " << lr << " loss " << loss << "\n" << std::flush;
    }
    return trainer.checkpoint();
}

// ---- evaluation -------------------------------------------------------------

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string EvalReport::to_csv() const {
    std::string out = "class_id,class_name,support,accuracy\n";
    std::size_t total = 0;
    for (std::size_t k = 0; k < class_names.size(); ++k) {
        total += support[k];
        out += std::to_string(k) + "," + csv_field(class_names[k]) + "," + std::to_string(support[k]) + "," +
               (accuracy[k] ? format_double(*accuracy[k]) : std::string("absent")) + "\n";
    }
    out += "overall,all," + std::to_string(total) + "," + format_double(overall) + "\n";
    out += "# fold " + std::to_string(fold) + ", config " + config_hash + "\n";
    return out;
}

EvalReport make_report(const std::vector<std::string>& class_names, const std::vector<std::size_t>& truth,
                       const std::vector<std::size_t>& predicted, std::size_t fold, std::string config_hash) {
    if (truth.size() != predicted.size()) throw ShapeError("make_report: truth and prediction counts differ");
    const std::size_t k = class_names.size();
    EvalReport r;
    r.class_names = class_names;
    r.fold = fold;
    r.config_hash = std::move(config_hash);
    r.confusion.assign(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= k || predicted[i] >= k) throw ConfigError("make_report: class id out of range");
        ++r.confusion[truth[i]][predicted[i]];
    }
    std::size_t correct = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t n = std::accumulate(r.confusion[c].begin(), r.confusion[c].end(), std::size_t{0});
        r.support.push_back(n);
        correct += r.confusion[c][c];
        r.accuracy.push_back(n ? std::optional<double>(static_cast<double>(r.confusion[c][c]) / static_cast<double>(n))
                               : std::nullopt);
    }
    r.overall = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
    return r;
}

std::vector<Classification> predict(const Model& model, const std::vector<std::string>& class_names,
                                    const std::vector<Sample>& samples, double rate) {
    const TrainConfig& cfg = model.config;
    std::vector<std::pair<std::size_t, Tensor>> classes;
    {
        Graph g;
        Binder p(g, model.params, false);
        const Tensor t = g.value(embed_text(p, cfg, class_names));
        const std::size_t c = t.dim(1);
        for (std::size_t k = 0; k < class_names.size(); ++k) {
            classes.emplace_back(k, Tensor({c}, std::vector<double>(t.data().begin() + k * c,
                                                                    t.data().begin() + (k + 1) * c)));
        }
    }
    const MelFrontend frontend(cfg.mel(), rate);
    std::vector<Classification> out;
    for (std::size_t start = 0; start < samples.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(samples.size(), start + cfg.batch_size);
        std::vector<Waveform> waves(end - start);
        const auto n = static_cast<std::ptrdiff_t>(waves.size());
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < n; ++i) waves[i] = prepare_waveform(samples[start + i], cfg, rate);
        const auto mels = mels_of(frontend, waves);
        Graph g;
        Binder p(g, model.params, false);
        const Tensor a = g.value(embed_audio(p, cfg, mels));
        const std::size_t c = a.dim(1);
        for (std::size_t i = 0; i < mels.size(); ++i) out.push_back(classify(a.data().subspan(i * c, c), classes));
    }
    return out;
}

EvalReport evaluate(const Model& model, const DatasetSpec& spec, const std::vector<Sample>& eval_set,
                    std::size_t fold) {
    const auto predictions = predict(model, spec.labels, eval_set, eval_rate(model.config, spec));
    std::vector<std::size_t> truth, predicted;
    for (std::size_t i = 0; i < eval_set.size(); ++i) {
        truth.push_back(eval_set[i].class_id);
        predicted.push_back(predictions[i].class_id);
    }
    return make_report(spec.labels, truth, predicted, fold, model.config.hash());
}

// ---- checkpoints ------------------------------------------------------------

namespace {

constexpr std::uint8_t kFloat64Tag = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 8;

void put_string(std::string& out, const std::string& s) {
    io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    io::put_bytes(out, s);
}

std::string get_string(io::Reader& in) {
    const auto n = in.le<std::uint32_t>();
    return std::string(in.bytes(n));
}

template <typename Map>
void put_table(std::string& out, const Map& tensors) {
    io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(std::distance(tensors.begin(), tensors.end())));
    for (const auto& [name, t] : tensors) {
        put_string(out, name);
        out.push_back(static_cast<char>(kFloat64Tag));
        io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t e : t.shape()) io::put_le<std::uint64_t>(out, e);
        for (double v : t.data()) io::put_le<double>(out, v);
    }
}

std::map<std::string, Tensor> get_table(io::Reader& in) {
    std::map<std::string, Tensor> out;
    const auto count = in.le<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = get_string(in);
        const auto tag = in.le<std::uint8_t>();
        if (tag != kFloat64Tag) throw FormatError("checkpoint: tensor '" + name + "' has unknown dtype tag " + std::to_string(tag));
        const auto rank = in.le<std::uint32_t>();
        Shape shape;
        std::size_t n = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            shape.push_back(static_cast<std::size_t>(in.le<std::uint64_t>()));
            n *= shape.back();
        }
        if (n > in.remaining() / 8) throw FormatError("checkpoint: tensor '" + name + "' overruns the payload");
        std::vector<double> values(n);
        for (auto& v : values) v = in.le<double>();
        if (!out.emplace(name, Tensor(shape, std::move(values))).second) {
            throw FormatError("checkpoint: duplicate tensor '" + name + "'");
        }
    }
    return out;
}

}  // namespace

ConfigMismatch::ConfigMismatch(std::string field_, std::string expected_, std::string found_)
    : ConfigError("checkpoint does not fit the config: " + field_ + " expected " + expected_ + ", found " + found_),
      field(std::move(field_)),
      expected(std::move(expected_)),
      found(std::move(found_)) {}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    std::string payload;
    put_string(payload, ckpt.config.serialize());
    put_table(payload, ckpt.params);
    put_table(payload, ckpt.optimizer);
    io::put_le<std::uint64_t>(payload, ckpt.epoch);
    put_string(payload, ckpt.rng_state);
    io::put_le<std::uint64_t>(payload, ckpt.loss_log.size());
    for (double v : ckpt.loss_log) io::put_le<double>(payload, v);

    std::string out = "SACK";
    io::put_le<std::uint32_t>(out, kCheckpointVersion);
    io::put_le<std::uint32_t>(out, crc_of(payload));
    io::put_le<std::uint64_t>(out, payload.size());
    return out + payload;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    io::write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint parse_checkpoint(const std::string& bytes) {
    if (bytes.size() < 8 || bytes.compare(0, 4, "SACK") != 0) throw FormatError("checkpoint: bad magic");
    io::Reader head(std::string_view(bytes).substr(4), "checkpoint");
    const auto version = head.le<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw VersionMismatch("checkpoint: file has format version " + std::to_string(version) +
                              ", this build reads version " + std::to_string(kCheckpointVersion));
    }
    if (bytes.size() < kHeaderBytes) throw ChecksumError("checkpoint: checksum mismatch (header truncated)");
    const auto crc = head.le<std::uint32_t>();
    const auto length = head.le<std::uint64_t>();
    const std::string_view payload = std::string_view(bytes).substr(kHeaderBytes);
    if (payload.size() != length || crc_of(payload) != crc) {
        throw ChecksumError("checkpoint: checksum mismatch (payload " + std::to_string(payload.size()) +
                            " bytes, header says " + std::to_string(length) + ")");
    }

    io::Reader in(payload, "checkpoint");
    Checkpoint ckpt;
    ckpt.config = TrainConfig::parse(get_string(in));
    for (auto& [name, t] : get_table(in)) ckpt.params.add(name, std::move(t));
    ckpt.optimizer = get_table(in);
    ckpt.epoch = static_cast<std::size_t>(in.le<std::uint64_t>());
    ckpt.rng_state = get_string(in);
    const auto n_loss = in.le<std::uint64_t>();
    if (n_loss > in.remaining() / 8) throw FormatError("checkpoint: loss log overruns the payload");
    for (std::uint64_t i = 0; i < n_loss; ++i) ckpt.loss_log.push_back(in.le<double>());
    if (in.remaining() != 0) throw FormatError("checkpoint: trailing bytes after the loss log");
    check_compatible(ckpt, ckpt.config);
    return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(io::read_file(path)); }

void check_compatible(const Checkpoint& ckpt, const TrainConfig& cfg) {
    if (ckpt.config.embed_dim != cfg.embed_dim) {
        throw ConfigMismatch("embed_dim", std::to_string(cfg.embed_dim), std::to_string(ckpt.config.embed_dim));
    }
    const Model expected = init_model(cfg);
    for (const auto& [name, t] : expected.params) {
        if (!ckpt.params.contains(name)) throw ConfigMismatch(name, to_string(t.shape()), "nothing");
        const auto& found = ckpt.params.get(name).shape();
        if (found != t.shape()) throw ConfigMismatch(name, to_string(t.shape()), to_string(found));
    }
    for (const auto& [name, t] : ckpt.params) {
        if (!expected.params.contains(name)) throw ConfigMismatch(name, "nothing", to_string(t.shape()));
    }
}

Model model_from(const Checkpoint& ckpt) { return Model{ckpt.config, ckpt.params}; }

// ---- data -------------------------------------------------------------------

Dataset load_dataset(const TrainConfig& cfg) {
    if (cfg.dataset == "esc50") return load_esc50(cfg.root);
    if (cfg.dataset == "us8k") return load_us8k(cfg.root);
    if (cfg.dataset == "synth") {
        ToneConfig tone;
        tone.n_classes = cfg.synth_classes;
        tone.clips_per_class = cfg.synth_clips;
        tone.n_folds = cfg.synth_folds;
        tone.sample_rate = cfg.synth_rate;
        tone.duration = cfg.synth_duration;
        Rng rng(cfg.synth_seed);
        return synth_tone_dataset(tone, rng);
    }
    throw ConfigError("unknown dataset '" + cfg.dataset + "'");
}

// ---- prompt ablation --------------------------------------------------------

std::vector<AblationRow> prompt_ablation(const TrainConfig& cfg, const Dataset& data,
                                         const std::vector<std::string>& templates,
                                         const std::vector<std::uint64_t>& seeds, std::ostream* warn) {
    if (templates.empty()) throw ConfigError("prompt_ablation: no templates");
    if (seeds.empty()) throw ConfigError("prompt_ablation: no seeds");
    if (seeds.size() == 1 && warn) *warn << "warning: one seed per template, standard deviation reported as 0\n";
    const auto [train_set, eval_set] = fold_split(data.samples, cfg.eval_fold);
    std::vector<AblationRow> rows;
    for (const auto& t : templates) {
        AblationRow row;
        row.prompt = t;
        for (auto seed : seeds) {
            TrainConfig run = cfg;
            run.prompt = t;
            run.seed = seed;
            const Checkpoint ckpt = train(run, data.spec, train_set);
            row.accuracies.push_back(evaluate(model_from(ckpt), data.spec, eval_set, cfg.eval_fold).overall);
        }
        const double n = static_cast<double>(row.accuracies.size());
        row.mean = std::accumulate(row.accuracies.begin(), row.accuracies.end(), 0.0) / n;
        if (row.accuracies.size() > 1) {
            double ss = 0.0;
            for (double a : row.accuracies) ss += (a - row.mean) * (a - row.mean);
            row.std = std::sqrt(ss / (n - 1.0));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
    std::string out = "template,runs,mean_accuracy,std_accuracy\n";
    for (const auto& r : rows) {
        out += csv_field(r.prompt) + "," + std::to_string(r.accuracies.size()) + "," + format_double(r.mean) + "," +
               format_double(r.std) + "\n";
    }
    return out;
}

}  // namespace lsac
