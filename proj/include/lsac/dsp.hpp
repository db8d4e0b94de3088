// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "lsac/params.hpp"
#include "lsac/tensor.hpp"

namespace lsac {

struct Waveform {
    std::vector<double> samples;  // mono, nominally in [-1, 1]
    double sample_rate = 0.0;     // Hz

    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Log-mel energies, bins x frames, row-major (bin-major).
struct MelSpectrogram {
    std::size_t bins = 0;
    std::size_t frames = 0;
    std::vector<double> values;

    double at(std::size_t bin, std::size_t frame) const { return values[bin * frames + frame]; }
};

// ---- WAV --------------------------------------------------------------------

// Reads RIFF/WAVE with PCM-16 or IEEE float-32 samples, one or two channels.
// Stereo is averaged to mono; PCM-16 is scaled by 1/32768.
Waveform load_wav(const std::filesystem::path& path);

enum class WavEncoding { pcm16, float32 };

void save_wav(const std::filesystem::path& path, const Waveform& w,
              WavEncoding encoding = WavEncoding::pcm16, std::size_t channels = 1);

// ---- resampling -------------------------------------------------------------

// Band-limited interpolation with a 64-tap Kaiser-windowed sinc. Output length
// is round(n * target / source), so duration is kept within one sample.
Waveform resample(const Waveform& w, double target_rate);

// Zero-pads or truncates to exactly n samples.
Waveform fix_length(const Waveform& w, std::size_t n);

// ---- mel spectrogram --------------------------------------------------------

struct MelConfig {
    std::size_t n_fft = 1024;
    std::size_t hop = 320;
    std::size_t n_mels = 64;
    double fmin = 50.0;
    double fmax = 14000.0;
};

double hz_to_mel(double hz);  // HTK: 2595 log10(1 + f/700)
double mel_to_hz(double mel);

// Frame count for a clip of n samples with centred frames. Reflection padding
// of n_fft/2 per side makes this 1 + floor(n / hop) for even n_fft. Throws
// ConfigError when n <= n_fft/2, which is too short to reflect.
std::size_t mel_frames(std::size_t n_samples, const MelConfig& cfg);

// Smallest clip length that yields exactly `frames` frames.
std::size_t samples_for_frames(std::size_t frames, const MelConfig& cfg);

// Hann-windowed STFT -> power -> triangular HTK mel filterbank ->
// log(1e-10 + energy). Owns its FFT plan; operator() is safe to call from
// several threads at once.
class MelFrontend {
public:
    MelFrontend(const MelConfig& cfg, double sample_rate);

    MelSpectrogram operator()(const Waveform& w) const;

    const MelConfig& config() const { return cfg_; }
    double sample_rate() const { return sample_rate_; }
    std::size_t fft_bins() const { return cfg_.n_fft / 2 + 1; }
    // n_mels x fft_bins, row-major.
    const std::vector<double>& filterbank() const { return filterbank_; }

private:
    struct Plan;
    MelConfig cfg_;
    double sample_rate_;
    std::vector<double> window_;
    std::vector<double> filterbank_;
    std::shared_ptr<Plan> plan_;
};

MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& cfg);

constexpr double kLogFloor = 1e-10;

// ---- augmentation -----------------------------------------------------------

struct AugmentConfig {
    std::array<double, 2> crop_fraction{0.6, 1.0};
    // Disabled when empty.
    std::optional<std::array<double, 2>> noise_snr_db = std::array<double, 2>{15.0, 40.0};
};

// Random contiguous crop to a fraction of the clip, zero-padded back to the
// original length, then white Gaussian noise at a random SNR. Deterministic
// for a given generator state.
Waveform augment(const Waveform& w, const AugmentConfig& cfg, Rng& rng);

// ---- spectrogram cache ------------------------------------------------------
//
// Layout: "SACS", u32 version, u32 F, u32 T, then F*T little-endian float32
// values, row-major.

constexpr std::uint32_t kSpectrogramCacheVersion = 1;

void write_spectrogram_cache(const std::filesystem::path& path, const MelSpectrogram& mel);
MelSpectrogram read_spectrogram_cache(const std::filesystem::path& path);

}  // namespace lsac
