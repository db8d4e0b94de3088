// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsac/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numbers>
#include <numeric>

#include "binary_io.hpp"

namespace lsac {

namespace {

constexpr std::uint16_t kTagPcm = 0x0001;
constexpr std::uint16_t kTagFloat = 0x0003;
constexpr std::uint16_t kTagExtensible = 0xFFFE;

std::string hex_tag(std::uint16_t tag) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "0x%04X", tag);
    return buf;
}

}  // namespace

// ---- WAV --------------------------------------------------------------------

Waveform load_wav(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    io::Reader r(bytes, "WAV " + path.string());
    if (r.bytes(4) != "RIFF") throw FormatError(path.string() + ": not a RIFF file");
    r.le<std::uint32_t>();
    if (r.bytes(4) != "WAVE") throw FormatError(path.string() + ": RIFF form is not WAVE");

    bool have_fmt = false;
    std::uint16_t tag = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    while (true) {
        if (r.remaining() == 0) throw FormatError(path.string() + ": truncated (no data chunk)");
        const std::string id(r.bytes(4));
        const std::uint32_t size = r.le<std::uint32_t>();
        if (id == "fmt ") {
            io::Reader f(r.bytes(size), "WAV fmt chunk " + path.string());
            tag = f.le<std::uint16_t>();
            channels = f.le<std::uint16_t>();
            rate = f.le<std::uint32_t>();
            f.le<std::uint32_t>();  // byte rate
            f.le<std::uint16_t>();  // block align
            bits = f.le<std::uint16_t>();
            if (tag == kTagExtensible) {
                f.le<std::uint16_t>();  // extension size
                f.le<std::uint16_t>();  // valid bits
                f.le<std::uint32_t>();  // channel mask
                tag = f.le<std::uint16_t>();  // leading bytes of the subformat GUID
            }
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw FormatError(path.string() + ": data chunk before fmt chunk");
            const bool pcm16 = tag == kTagPcm && bits == 16;
            const bool f32 = tag == kTagFloat && bits == 32;
            if (!pcm16 && !f32) {
                throw FormatError(path.string() + ": unsupported WAV encoding, format tag " +
                                  hex_tag(tag) + " with " + std::to_string(bits) +
                                  " bits per sample (need PCM-16 or float-32)");
            }
            if (channels < 1 || channels > 2) {
                throw FormatError(path.string() + ": " + std::to_string(channels) +
                                  " channels (need 1 or 2)");
            }
            if (rate == 0) throw FormatError(path.string() + ": zero sample rate");
            const std::size_t frame_bytes = channels * (bits / 8);
            if (size % frame_bytes != 0 || size > r.remaining()) {
                throw FormatError(path.string() + ": truncated data chunk (" +
                                  std::to_string(size) + " bytes declared, " +
                                  std::to_string(r.remaining()) + " present)");
            }
            io::Reader d(r.bytes(size), "WAV data " + path.string());
            const std::size_t frames = size / frame_bytes;
            Waveform w;
            w.sample_rate = rate;
            w.samples.resize(frames);
            for (std::size_t i = 0; i < frames; ++i) {
                double acc = 0.0;
                for (std::size_t c = 0; c < channels; ++c) {
                    acc += pcm16 ? d.le<std::int16_t>() / 32768.0 : static_cast<double>(d.le<float>());
                }
                w.samples[i] = acc / channels;
                if (!std::isfinite(w.samples[i])) {
                    throw FormatError(path.string() + ": non-finite sample at frame " + std::to_string(i));
                }
            }
            return w;
        } else {
            r.skip(size);
        }
        if (size % 2 == 1 && r.remaining() > 0) r.skip(1);
    }
}

void save_wav(const std::filesystem::path& path, const Waveform& w, WavEncoding encoding,
              std::size_t channels) {
    if (channels < 1 || channels > 2) throw ConfigError("save_wav: channels must be 1 or 2");
    const bool pcm = encoding == WavEncoding::pcm16;
    const std::uint16_t bits = pcm ? 16 : 32;
    const std::uint32_t block = static_cast<std::uint32_t>(channels * bits / 8);
    const std::uint32_t data_size = static_cast<std::uint32_t>(w.samples.size() * block);
    const auto rate = static_cast<std::uint32_t>(std::lround(w.sample_rate));

    std::string out;
    out.reserve(44 + data_size);
    io::put_bytes(out, "RIFF");
    io::put_le<std::uint32_t>(out, 36 + data_size);
    io::put_bytes(out, "WAVEfmt ");
    io::put_le<std::uint32_t>(out, 16);
    io::put_le<std::uint16_t>(out, pcm ? kTagPcm : kTagFloat);
    io::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels));
    io::put_le<std::uint32_t>(out, rate);
    io::put_le<std::uint32_t>(out, rate * block);
    io::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(block));
    io::put_le<std::uint16_t>(out, bits);
    io::put_bytes(out, "data");
    io::put_le<std::uint32_t>(out, data_size);
    for (double s : w.samples) {
        for (std::size_t c = 0; c < channels; ++c) {
            if (pcm) {
                const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
                io::put_le<std::int16_t>(out, static_cast<std::int16_t>(q));
            } else {
                io::put_le<float>(out, static_cast<float>(s));
            }
        }
    }
    io::write_file(path, out);
}

// ---- resampling -------------------------------------------------------------

namespace {

constexpr int kTaps = 64;
constexpr int kHalf = kTaps / 2;
constexpr double kKaiserBeta = 8.0;

// Weights for the kTaps source samples floor(x)-kHalf+1 .. floor(x)+kHalf,
// where frac = x - floor(x). Normalized to unit sum so DC passes exactly.
void sinc_weights(double frac, double cutoff, double* w) {
    const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);
    double total = 0.0;
    for (int t = 0; t < kTaps; ++t) {
        const double d = static_cast<double>(t - kHalf + 1) - frac;
        const double r = d / kHalf;
        double win = 0.0;
        if (std::abs(r) < 1.0) win = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) / i0_beta;
        const double arg = std::numbers::pi * cutoff * d;
        const double sinc = arg == 0.0 ? 1.0 : std::sin(arg) / arg;
        w[t] = cutoff * sinc * win;
        total += w[t];
    }
    for (int t = 0; t < kTaps; ++t) w[t] /= total;
}

}  // namespace

Waveform resample(const Waveform& w, double target_rate) {
    if (!(target_rate > 0.0)) throw ConfigError("resample: target rate must be positive");
    if (!(w.sample_rate > 0.0)) throw ConfigError("resample: source rate must be positive");
    if (target_rate == w.sample_rate) return w;

    const double ratio = target_rate / w.sample_rate;
    const std::size_t n_in = w.samples.size();
    const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(n_in) * ratio));
    const double cutoff = std::min(1.0, ratio);

    // Integer rates repeat with period target/gcd output samples, so the
    // filters can be computed once per phase.
    const bool integral = std::floor(target_rate) == target_rate && std::floor(w.sample_rate) == w.sample_rate;
    std::size_t phases = 0;
    std::uint64_t src = 0, tgt = 0;
    if (integral) {
        src = static_cast<std::uint64_t>(w.sample_rate);
        tgt = static_cast<std::uint64_t>(target_rate);
        const std::uint64_t g = std::gcd(src, tgt);
        src /= g;
        tgt /= g;
        if (tgt <= 8192) phases = tgt;
    }
    std::vector<double> table(phases * kTaps);
    for (std::size_t p = 0; p < phases; ++p) {
        sinc_weights(static_cast<double>(p) / static_cast<double>(tgt), cutoff, &table[p * kTaps]);
    }

    Waveform out;
    out.sample_rate = target_rate;
    out.samples.resize(n_out);
    std::vector<double> scratch(kTaps);
    for (std::size_t j = 0; j < n_out; ++j) {
        std::int64_t base;
        const double* weights;
        if (phases) {
            const std::uint64_t num = j * src;
            base = static_cast<std::int64_t>(num / tgt);
            weights = &table[(num % tgt) * kTaps];
        } else {
            const double x = static_cast<double>(j) / ratio;
            base = static_cast<std::int64_t>(std::floor(x));
            sinc_weights(x - static_cast<double>(base), cutoff, scratch.data());
            weights = scratch.data();
        }
        double acc = 0.0;
        for (int t = 0; t < kTaps; ++t) {
            const std::int64_t idx = base - kHalf + 1 + t;
            if (idx >= 0 && idx < static_cast<std::int64_t>(n_in)) acc += weights[t] * w.samples[idx];
        }
        out.samples[j] = acc;
    }
    return out;
}

Waveform fix_length(const Waveform& w, std::size_t n) {
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples.assign(n, 0.0);
    std::copy_n(w.samples.begin(), std::min(n, w.samples.size()), out.samples.begin());
    return out;
}

// ---- mel spectrogram --------------------------------------------------------

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

void validate(const MelConfig& cfg) {
    if (cfg.n_fft < 2 || cfg.n_fft % 2 != 0) throw ConfigError("mel: n_fft must be even and >= 2");
    if (cfg.hop == 0 || cfg.hop > cfg.n_fft) throw ConfigError("mel: need 0 < hop <= n_fft");
    if (cfg.n_mels == 0) throw ConfigError("mel: n_mels must be positive");
    if (!(cfg.fmin >= 0.0 && cfg.fmin < cfg.fmax)) throw ConfigError("mel: need 0 <= fmin < fmax");
}

}  // namespace

std::size_t mel_frames(std::size_t n_samples, const MelConfig& cfg) {
    validate(cfg);
    if (n_samples <= cfg.n_fft / 2) {
        throw ConfigError("mel: clip of " + std::to_string(n_samples) +
                          " samples is too short for centred frames with n_fft " +
                          std::to_string(cfg.n_fft) + " (need more than " +
                          std::to_string(cfg.n_fft / 2) + ")");
    }
    return 1 + n_samples / cfg.hop;
}

std::size_t samples_for_frames(std::size_t frames, const MelConfig& cfg) {
    validate(cfg);
    if (frames == 0) throw ConfigError("mel: frame count must be positive");
    const std::size_t n = std::max((frames - 1) * cfg.hop, cfg.n_fft / 2 + 1);
    if (mel_frames(n, cfg) != frames) {
        throw ConfigError("mel: no clip length gives exactly " + std::to_string(frames) + " frames");
    }
    return n;
}

struct MelFrontend::Plan {
    fftw_plan plan = nullptr;
    std::size_t n = 0;

    explicit Plan(std::size_t n_fft) : n(n_fft) {
        std::lock_guard lock(mutex());
        double* in = fftw_alloc_real(n);
        fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
        fftw_free(in);
        fftw_free(out);
        if (!plan) throw Error("FFTW plan creation failed for n_fft " + std::to_string(n));
    }
    ~Plan() {
        std::lock_guard lock(mutex());
        fftw_destroy_plan(plan);
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;

    // Only plan creation and destruction touch FFTW's global state.
    static std::mutex& mutex() {
        static std::mutex m;
        return m;
    }
};

MelFrontend::MelFrontend(const MelConfig& cfg, double sample_rate)
    : cfg_(cfg), sample_rate_(sample_rate) {
    validate(cfg_);
    if (!(sample_rate > 0.0)) throw ConfigError("mel: sample rate must be positive");
    if (cfg_.fmax > sample_rate / 2.0 + 1e-9) {
        throw ConfigError("mel: fmax " + std::to_string(cfg_.fmax) + " Hz exceeds Nyquist for " +
                          std::to_string(sample_rate) + " Hz");
    }
    const std::size_t n = cfg_.n_fft;
    window_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }

    const std::size_t bins = fft_bins();
    const std::size_t m = cfg_.n_mels;
    std::vector<double> edges(m + 2);
    const double lo = hz_to_mel(cfg_.fmin), hi = hz_to_mel(cfg_.fmax);
    for (std::size_t i = 0; i < m + 2; ++i) {
        edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m + 1));
    }
    filterbank_.assign(m * bins, 0.0);
    const double bin_hz = sample_rate / static_cast<double>(n);
    for (std::size_t r = 0; r < m; ++r) {
        const double left = edges[r], centre = edges[r + 1], right = edges[r + 2];
        bool any = false;
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * bin_hz;
            const double up = (f - left) / (centre - left);
            const double down = (right - f) / (right - centre);
            const double v = std::max(0.0, std::min(up, down));
            filterbank_[r * bins + k] = v;
            any = any || v > 0.0;
        }
        // Narrow low filters can fall between bins; give them the nearest one.
        if (!any) {
            const auto k = std::min<std::size_t>(bins - 1, static_cast<std::size_t>(std::lround(centre / bin_hz)));
            filterbank_[r * bins + k] = 1.0;
        }
    }
    plan_ = std::make_shared<Plan>(n);
}

MelSpectrogram MelFrontend::operator()(const Waveform& w) const {
    if (std::abs(w.sample_rate - sample_rate_) > 1e-9) {
        throw ConfigError("mel: waveform is " + std::to_string(w.sample_rate) + " Hz, frontend expects " +
                          std::to_string(sample_rate_) + " Hz");
    }
    const std::size_t len = w.samples.size();
    const std::size_t frames = mel_frames(len, cfg_);
    const std::size_t n = cfg_.n_fft, pad = n / 2, bins = fft_bins(), m = cfg_.n_mels;

    auto sample = [&](std::ptrdiff_t j) {
        const auto last = static_cast<std::ptrdiff_t>(len) - 1;
        if (j < 0) j = -j;
        if (j > last) j = 2 * last - j;
        return w.samples[static_cast<std::size_t>(j)];
    };

    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(bins);
    std::vector<double> power(bins);
    MelSpectrogram mel;
    mel.bins = m;
    mel.frames = frames;
    mel.values.resize(m * frames);
    for (std::size_t t = 0; t < frames; ++t) {
        const auto start = static_cast<std::ptrdiff_t>(t * cfg_.hop) - static_cast<std::ptrdiff_t>(pad);
        for (std::size_t i = 0; i < n; ++i) in[i] = window_[i] * sample(start + static_cast<std::ptrdiff_t>(i));
        fftw_execute_dft_r2c(plan_->plan, in, out);
        for (std::size_t k = 0; k < bins; ++k) power[k] = out[k][0] * out[k][0] + out[k][1] * out[k][1];
        for (std::size_t r = 0; r < m; ++r) {
            const double* row = &filterbank_[r * bins];
            double e = 0.0;
            for (std::size_t k = 0; k < bins; ++k) e += row[k] * power[k];
            mel.values[r * frames + t] = std::log(kLogFloor + e);
        }
    }
    fftw_free(in);
    fftw_free(out);
    return mel;
}

MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& cfg) {
    return MelFrontend(cfg, w.sample_rate)(w);
}

// ---- augmentation -----------------------------------------------------------

Waveform augment(const Waveform& w, const AugmentConfig& cfg, Rng& rng) {
    const auto [flo, fhi] = cfg.crop_fraction;
    if (!(0.0 < flo && flo <= fhi && fhi <= 1.0)) throw ConfigError("augment: crop fraction range must satisfy 0 < lo <= hi <= 1");
    const std::size_t n = w.samples.size();
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples.assign(n, 0.0);
    if (n == 0) return out;

    const double fraction = std::uniform_real_distribution<double>(flo, fhi)(rng);
    const std::size_t keep = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n);
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, n - keep)(rng);
    std::copy_n(w.samples.begin() + static_cast<std::ptrdiff_t>(start), keep, out.samples.begin());

    if (cfg.noise_snr_db) {
        const auto [slo, shi] = *cfg.noise_snr_db;
        if (slo > shi) throw ConfigError("augment: noise SNR range must satisfy lo <= hi");
        const double snr = std::uniform_real_distribution<double>(slo, shi)(rng);
        double power = 0.0;
        for (double s : out.samples) power += s * s;
        power /= static_cast<double>(n);
        const double sigma = std::sqrt(power / std::pow(10.0, snr / 10.0));
        std::normal_distribution<double> noise(0.0, 1.0);
        for (double& s : out.samples) s += sigma * noise(rng);
    }
    return out;
}

// ---- spectrogram cache ------------------------------------------------------

void write_spectrogram_cache(const std::filesystem::path& path, const MelSpectrogram& mel) {
    if (mel.values.size() != mel.bins * mel.frames || mel.values.empty()) {
        throw ConfigError("spectrogram cache: inconsistent spectrogram dimensions");
    }
    std::string out;
    out.reserve(16 + 4 * mel.values.size());
    io::put_bytes(out, "SACS");
    io::put_le<std::uint32_t>(out, kSpectrogramCacheVersion);
    io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(mel.bins));
    io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(mel.frames));
    for (double v : mel.values) io::put_le<float>(out, static_cast<float>(v));
    io::write_file(path, out);
}

MelSpectrogram read_spectrogram_cache(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    io::Reader r(bytes, "spectrogram cache " + path.string());
    if (r.bytes(4) != "SACS") throw FormatError(path.string() + ": bad spectrogram cache magic");
    const auto version = r.le<std::uint32_t>();
    if (version != kSpectrogramCacheVersion) {
        throw FormatError(path.string() + ": spectrogram cache version " + std::to_string(version) +
                          ", expected " + std::to_string(kSpectrogramCacheVersion));
    }
    MelSpectrogram mel;
    mel.bins = r.le<std::uint32_t>();
    mel.frames = r.le<std::uint32_t>();
    if (mel.bins == 0 || mel.frames == 0) throw FormatError(path.string() + ": empty spectrogram");
    mel.values.resize(mel.bins * mel.frames);
    for (double& v : mel.values) v = r.le<float>();
    if (r.remaining() != 0) throw FormatError(path.string() + ": trailing bytes after spectrogram");
    return mel;
}

}  // namespace lsac
