// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Training, evaluation, checkpoints and the prompt ablation harness.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsac/audio_tower.hpp"
#include "lsac/contrastive.hpp"
#include "lsac/cscm.hpp"
#include "lsac/data.hpp"
#include "lsac/dsp.hpp"
#include "lsac/text_tower.hpp"

namespace lsac {

// Every field has a config-file key of the same name. A "profile" key
// resets the tower and mel fields to that profile before later keys apply.
struct TrainConfig {
    // data
    std::string dataset = "synth";  // esc50 | us8k | synth
    std::string root;
    std::size_t eval_fold = 5;
    double train_rate = 0.0;  // Hz; 0 takes the dataset's own rate
    double eval_rate = 0.0;
    std::size_t synth_classes = 4;
    std::size_t synth_clips = 40;  // per class
    std::size_t synth_folds = 5;
    double synth_duration = 1.0;
    double synth_rate = 16000.0;
    std::uint64_t synth_seed = 7;

    // optimization
    std::size_t epochs = 50;
    std::uint64_t seed = 0;
    double lr0 = 8e-5;
    double gamma = 0.96;
    double weight_decay = 5e-4;
    double momentum = 0.0;
    std::size_t batch_size = 16;
    double scale = 1.0;  // logit scale, or its initial value when learnable
    bool learnable_scale = false;
    std::string prompt = "an audio clip of {}";

    // augmentation
    bool augment = true;
    double crop_min = 0.6, crop_max = 1.0;
    bool noise = true;
    double snr_min = 15.0, snr_max = 40.0;

    // mel frontend; every clip is cut or padded to clip_frames frames
    std::string profile = "desk";
    std::size_t n_fft = 1024;
    std::size_t hop = 320;
    std::size_t n_mels = 64;
    double fmin = 50.0;
    double fmax = 14000.0;
    std::size_t clip_frames = 256;

    // audio tower
    std::size_t patch_h = 4, patch_w = 4;
    std::size_t window = 4;
    std::vector<std::size_t> audio_widths{96, 192};
    std::vector<std::size_t> audio_depths{2, 2};
    std::vector<std::size_t> audio_heads{4, 4};

    // text tower
    std::size_t text_width = 256;
    std::size_t text_layers = 4;
    std::size_t text_heads = 4;
    std::size_t max_tokens = kDefaultMaxTokens;

    // head
    HeadKind head = HeadKind::cscm;
    std::size_t embed_dim = 1024;  // C
    std::size_t cscm_reduction = 8;
    std::size_t cscm_kernel = 7;
    std::size_t cscm_channels = 256;

    // Named profiles: "desk" and "full".
    static TrainConfig with_profile(const std::string& name);

    // "key = value" lines; '#' starts a comment. Unknown keys and malformed
    // values are ConfigErrors naming the line.
    static TrainConfig parse(const std::string& text);
    static TrainConfig load(const std::filesystem::path& path);
    // Every field, one per line; parse(serialize()) reproduces the config.
    std::string serialize() const;
    // CRC-32 of serialize(), as 8 lowercase hex digits.
    std::string hash() const;

    // Numeric fields positive (momentum, weight decay and SNRs may be zero),
    // gamma in (0, 1], and the towers and head consistent with each other.
    void validate() const;

    MelConfig mel() const;
    AugmentConfig augmentation() const;
    AudioTowerConfig audio() const;
    TextTowerConfig text() const;
    CscmConfig cscm() const;
};

// p <- p - lr * (g + weight_decay * p), plus heavy-ball momentum when
// momentum > 0 (velocity keyed by parameter name). Parameters without a
// gradient are left alone. A non-finite gradient throws Error naming the
// parameter before anything is updated.
void sgd_step(ParameterSet& params, const std::map<std::string, Tensor>& grads, double lr, double weight_decay,
              double momentum = 0.0, std::map<std::string, Tensor>* velocity = nullptr);

// lr0 * gamma^epoch, with epoch counted from 0.
double lr_at_epoch(double lr0, double gamma, std::size_t epoch);

// Name of the learnable log logit scale.
inline constexpr const char* kLogScaleParam = "logit.log_scale";

struct Model {
    TrainConfig config;
    ParameterSet params;
};

// Freshly initialized weights drawn from config.seed.
Model init_model(const TrainConfig& cfg);

// [n, C] audio embeddings for spectrograms of shape n_mels x clip_frames.
NodeRef embed_audio(Binder& p, const TrainConfig& cfg, std::span<const MelSpectrogram> mels);
// [n, C] text embeddings of the prompted labels.
NodeRef embed_text(Binder& p, const TrainConfig& cfg, std::span<const std::string> labels);

// cfg.train_rate / cfg.eval_rate, or the dataset's own rate when those are 0.
double train_rate(const TrainConfig& cfg, const DatasetSpec& spec);
double eval_rate(const TrainConfig& cfg, const DatasetSpec& spec);

// Resampled to `rate` and cut or zero-padded to exactly clip_frames frames.
Waveform prepare_waveform(const Sample& sample, const TrainConfig& cfg, double rate);

struct Checkpoint {
    TrainConfig config;
    ParameterSet params;
    std::map<std::string, Tensor> optimizer;  // momentum velocities; empty without momentum
    std::size_t epoch = 0;                    // completed epochs
    std::string rng_state;
    std::vector<double> loss_log;             // mean loss per completed epoch
};

// Stateful loop so a run can stop and resume from a checkpoint.
class Trainer {
public:
    Trainer(const TrainConfig& cfg, const DatasetSpec& spec, std::vector<Sample> train_set);
    // Continues from ckpt; train_set must be the one it was trained on.
    Trainer(const Checkpoint& ckpt, const DatasetSpec& spec, std::vector<Sample> train_set);

    // One pass over the train set. Returns the mean batch loss. A failing
    // step, including a non-finite loss, throws Error naming epoch and batch.
    double run_epoch();

    std::size_t epoch() const { return epoch_; }
    const std::vector<double>& loss_log() const { return loss_log_; }
    const Model& model() const { return model_; }
    Checkpoint checkpoint() const;

private:
    Trainer(Model model, const DatasetSpec& spec, std::vector<Sample> train_set);

    Model model_;
    std::shared_ptr<const MelFrontend> frontend_;
    std::vector<Sample> samples_;
    std::vector<Waveform> waves_;
    std::vector<std::string> labels_;
    BatchSampler sampler_;
    Rng augment_rng_;
    std::map<std::string, Tensor> velocity_;
    std::size_t epoch_ = 0;
    std::vector<double> loss_log_;
};

// Runs cfg.epochs epochs. `log`, when given, receives one line per epoch.
Checkpoint train(const TrainConfig& cfg, const DatasetSpec& spec, const std::vector<Sample>& train_set,
                 std::ostream* log = nullptr);

struct EvalReport {
    std::vector<std::string> class_names;  // by class id
    std::vector<std::size_t> support;
    // Empty for classes with no eval samples.
    std::vector<std::optional<double>> accuracy;
    std::vector<std::vector<std::size_t>> confusion;  // [truth][predicted]
    double overall = 0.0;
    std::size_t fold = 0;
    std::string config_hash;

    // Header class_id,class_name,support,accuracy; absent classes print
    // "absent"; a final "overall" row carries the total support and
    // accuracy, then a comment line with the fold and config hash.
    std::string to_csv() const;
};

// Assembles a report from per-sample truth and prediction.
EvalReport make_report(const std::vector<std::string>& class_names, const std::vector<std::size_t>& truth,
                       const std::vector<std::size_t>& predicted, std::size_t fold, std::string config_hash);

// Class embeddings from the prompted class names (computed once), then
// classify() per clip. No augmentation.
EvalReport evaluate(const Model& model, const DatasetSpec& spec, const std::vector<Sample>& eval_set,
                    std::size_t fold);

// Predicted class per sample, same procedure as evaluate().
std::vector<Classification> predict(const Model& model, const std::vector<std::string>& class_names,
                                    const std::vector<Sample>& samples, double rate);

// ---- checkpoints ------------------------------------------------------------
//
// "SACK", u32 version, u32 CRC-32 of the payload, u64 payload length, then the
// payload: config text, tensor table, optimizer tensor table, u64 epoch, rng
// state text, loss log. A tensor table is a u32 count of entries (name,
// u8 dtype tag, u32 rank, u64 extents, little-endian float64 values).

constexpr std::uint32_t kCheckpointVersion = 1;

struct ChecksumError : FormatError {
    using FormatError::FormatError;
};
struct VersionMismatch : FormatError {
    using FormatError::FormatError;
};
// A checkpoint whose tensors do not fit the config they are loaded against.
struct ConfigMismatch : ConfigError {
    ConfigMismatch(std::string field, std::string expected, std::string found);
    std::string field, expected, found;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
std::string serialize_checkpoint(const Checkpoint& ckpt);
// Also checks the tensors against the shapes its own config implies.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint parse_checkpoint(const std::string& bytes);
// Throws ConfigMismatch if ckpt cannot serve a model built from cfg.
void check_compatible(const Checkpoint& ckpt, const TrainConfig& cfg);

Model model_from(const Checkpoint& ckpt);

// ---- data --------------------------------------------------------------------

// The dataset named by cfg.dataset (cfg.root for the file-backed ones).
Dataset load_dataset(const TrainConfig& cfg);

// ---- prompt ablation --------------------------------------------------------

struct AblationRow {
    std::string prompt;
    std::vector<double> accuracies;  // one per seed
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for a single seed
};

// Train and evaluate on cfg.eval_fold for every (template, seed) pair. A
// single seed prints a warning to `warn` when given.
std::vector<AblationRow> prompt_ablation(const TrainConfig& cfg, const Dataset& data,
                                         const std::vector<std::string>& templates,
                                         const std::vector<std::uint64_t>& seeds, std::ostream* warn = nullptr);

// CSV: template,runs,mean_accuracy,std_accuracy.
std::string format_ablation(const std::vector<AblationRow>& rows);

}  // namespace lsac
