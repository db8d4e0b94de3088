// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include "doctest.h"
#include "lsac/dsp.hpp"

using namespace lsac;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    auto dir = fs::temp_directory_path() / "lsac_test_dsp";
    fs::create_directories(dir);
    return dir;
}

void put16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>(v >> 8));
}
void put32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

// Hand-assembled WAV so the reader is not only tested against its own writer.
std::string wav_bytes(std::uint16_t tag, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits,
                      const std::string& payload, std::uint32_t declared_size) {
    std::string s = "RIFF";
    put32(s, 36 + declared_size);
    s += "WAVE";
    // An unknown chunk ahead of fmt must be skipped, including its pad byte.
    s += "LIST";
    put32(s, 3);
    s += "abc";
    s.push_back('\0');
    s += "fmt ";
    put32(s, 16);
    put16(s, tag);
    put16(s, channels);
    put32(s, rate);
    put32(s, rate * channels * bits / 8);
    put16(s, static_cast<std::uint16_t>(channels * bits / 8));
    put16(s, bits);
    s += "data";
    put32(s, declared_size);
    s += payload;
    return s;
}

fs::path write_bytes(const std::string& name, const std::string& bytes) {
    auto p = scratch_dir() / name;
    std::ofstream(p, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    return p;
}

Waveform tone(double hz, double rate, std::size_t n, double amp = 0.5, double phase = 0.0) {
    Waveform w;
    w.sample_rate = rate;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate + phase);
    }
    return w;
}

// Magnitude of the DFT of x at an integer frequency bin, by direct summation.
double dft_magnitude(const std::vector<double>& x, std::size_t bin) {
    std::complex<double> acc = 0.0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(bin) * static_cast<double>(i) / n);
    }
    return std::abs(acc);
}

}  // namespace

// ---- WAV ----

TEST_CASE("load_wav: one second of PCM-16 silence") {
    std::string payload(2 * 44100, '\0');
    auto p = write_bytes("silence.wav", wav_bytes(1, 1, 44100, 16, payload, static_cast<std::uint32_t>(payload.size())));
    Waveform w = load_wav(p);
    CHECK(w.sample_rate == 44100.0);
    REQUIRE(w.samples.size() == 44100);
    for (double s : w.samples) CHECK(s == 0.0);
}

TEST_CASE("load_wav: PCM-16 16384 is 0.5 and stereo averages to mono") {
    std::string payload;
    put16(payload, 16384);
    auto p = write_bytes("half.wav", wav_bytes(1, 1, 8000, 16, payload, 2));
    CHECK(load_wav(p).samples.at(0) == 0.5);

    // Float-32 stereo frame L=+0.5, R=-0.5.
    std::string stereo;
    put32(stereo, 0x3f000000u);
    put32(stereo, 0xbf000000u);
    auto q = write_bytes("stereo.wav", wav_bytes(3, 2, 8000, 32, stereo, 8));
    Waveform w = load_wav(q);
    REQUIRE(w.samples.size() == 1);
    CHECK(w.samples[0] == 0.0);

    // PCM-16 stereo (16384, 0) -> 0.25.
    std::string pcm_stereo;
    put16(pcm_stereo, 16384);
    put16(pcm_stereo, 0);
    auto r = write_bytes("pcm_stereo.wav", wav_bytes(1, 2, 8000, 16, pcm_stereo, 4));
    CHECK(load_wav(r).samples.at(0) == 0.25);
}

TEST_CASE("load_wav: unsupported encodings name the format tag") {
    std::string payload(4, '\0');
    auto p = write_bytes("alaw.wav", wav_bytes(6, 1, 8000, 8, payload, 4));
    try {
        load_wav(p);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("0x0006") != std::string::npos);
    }
    auto q = write_bytes("pcm24.wav", wav_bytes(1, 1, 8000, 24, std::string(6, '\0'), 6));
    CHECK_THROWS_AS(load_wav(q), FormatError);
}

TEST_CASE("load_wav: truncated files are rejected") {
    std::string payload(10, '\0');
    auto p = write_bytes("trunc.wav", wav_bytes(1, 1, 8000, 16, payload, 100));
    CHECK_THROWS_AS(load_wav(p), FormatError);
    auto q = write_bytes("header_only.wav", std::string("RIFF\x10\0\0\0WAVEfm", 14));
    CHECK_THROWS_AS(load_wav(q), FormatError);
    CHECK_THROWS_AS(load_wav(scratch_dir() / "does_not_exist.wav"), Error);
}

TEST_CASE("save_wav and load_wav round trip") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(-0.9, 0.9);
    Waveform w;
    w.sample_rate = 16000;
    w.samples.resize(1000);
    for (auto& s : w.samples) s = dist(rng);
    auto p = scratch_dir() / "rt_float.wav";
    save_wav(p, w, WavEncoding::float32, 2);
    Waveform f = load_wav(p);
    REQUIRE(f.samples.size() == w.samples.size());
    for (std::size_t i = 0; i < w.samples.size(); ++i) CHECK(f.samples[i] == static_cast<double>(static_cast<float>(w.samples[i])));
    save_wav(p, w, WavEncoding::pcm16, 1);
    Waveform q = load_wav(p);
    for (std::size_t i = 0; i < w.samples.size(); ++i) CHECK(std::abs(q.samples[i] - w.samples[i]) <= 0.5 / 32768.0 + 1e-12);
}

// ---- resampling ----

TEST_CASE("resample: equal rates are the identity") {
    Waveform w = tone(440, 32000, 5000);
    Waveform r = resample(w, 32000);
    CHECK(r.samples == w.samples);
    CHECK(r.sample_rate == 32000.0);
}

TEST_CASE("resample: duration is kept within one sample") {
    for (auto [src, dst, n] : {std::tuple{32000.0, 44100.0, 32000u}, std::tuple{44100.0, 32000.0, 44100u},
                               std::tuple{16000.0, 44100.0, 12345u}, std::tuple{22050.5, 16000.0, 777u}}) {
        Waveform w = tone(300, src, n);
        Waveform r = resample(w, dst);
        CHECK(std::abs(static_cast<double>(r.samples.size()) - n * dst / src) <= 1.0);
        CHECK(std::abs(r.duration() - w.duration()) <= 1.0 / dst);
    }
    CHECK(resample(tone(440, 32000, 32000), 44100).samples.size() == 44100);
}

TEST_CASE("resample: a 440 Hz tone keeps its spectral peak") {
    // One second at the output rate gives 1 Hz bins; scan 0..2 kHz directly.
    Waveform r = resample(tone(440, 32000, 32000), 44100);
    REQUIRE(r.samples.size() == 44100);
    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t bin = 0; bin <= 2000; bin += 1) {
        const double m = dft_magnitude(r.samples, bin);
        if (m > best_mag) {
            best_mag = m;
            best = bin;
        }
    }
    CHECK(best >= 439);
    CHECK(best <= 441);
}

TEST_CASE("resample: round trip of a band-limited signal") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    for (auto [lo_rate, hi_rate] : {std::pair{32000.0, 44100.0}, std::pair{16000.0, 44100.0}, std::pair{16000.0, 22050.0}}) {
        // Components below 40% of the lower Nyquist frequency.
        const double limit = 0.4 * lo_rate / 2.0;
        Waveform w;
        w.sample_rate = lo_rate;
        w.samples.assign(8000, 0.0);
        for (double f : {0.05 * limit, 0.3 * limit, 0.7 * limit, 0.99 * limit}) {
            Waveform t = tone(f, lo_rate, 8000, 0.2, phase(rng));
            for (std::size_t i = 0; i < 8000; ++i) w.samples[i] += t.samples[i];
        }
        Waveform back = resample(resample(w, hi_rate), lo_rate);
        REQUIRE(back.samples.size() == w.samples.size());
        // Edges see the zero extension; compare the interior.
        double err = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 200; i + 200 < w.samples.size(); ++i, ++count) {
            const double d = back.samples[i] - w.samples[i];
            err += d * d;
        }
        CHECK(std::sqrt(err / static_cast<double>(count)) < 1e-2);
    }
}

TEST_CASE("fix_length pads with zeros or truncates") {
    Waveform w = tone(100, 1000, 10);
    CHECK(fix_length(w, 4).samples == std::vector<double>(w.samples.begin(), w.samples.begin() + 4));
    Waveform p = fix_length(w, 15);
    REQUIRE(p.samples.size() == 15);
    CHECK(p.samples[9] == w.samples[9]);
    CHECK(p.samples[14] == 0.0);
}

// ---- mel spectrogram ----

TEST_CASE("mel: HTK scale reference points") {
    CHECK(hz_to_mel(0.0) == 0.0);
    CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-14));
    for (double f : {50.0, 1000.0, 14000.0}) CHECK(mel_to_hz(hz_to_mel(f)) == doctest::Approx(f).epsilon(1e-12));
}

TEST_CASE("mel: all-zero waveform gives log of the floor everywhere") {
    Waveform w;
    w.sample_rate = 32000;
    w.samples.assign(32000, 0.0);
    MelSpectrogram m = mel_spectrogram(w, MelConfig{});
    CHECK(m.bins == 64);
    CHECK(m.frames == 101);
    for (double v : m.values) CHECK(v == std::log(1e-10));
}

TEST_CASE("mel: output shape follows the frame formula") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> pick(0, 3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const std::size_t ffts[] = {64, 128, 256, 512};
    for (int trial = 0; trial < 40; ++trial) {
        MelConfig cfg;
        cfg.n_fft = ffts[pick(rng)];
        cfg.hop = std::uniform_int_distribution<std::size_t>(1, cfg.n_fft)(rng);
        cfg.n_mels = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
        cfg.fmin = 0.0;
        cfg.fmax = 4000.0;
        const std::size_t n = std::uniform_int_distribution<std::size_t>(cfg.n_fft / 2 + 1, 3000)(rng);
        Waveform w;
        w.sample_rate = 8000;
        w.samples.resize(n);
        for (auto& s : w.samples) s = dist(rng);
        MelSpectrogram m = mel_spectrogram(w, cfg);
        // Padded length n + n_fft, frames = 1 + floor((padded - n_fft) / hop).
        CHECK(m.bins == cfg.n_mels);
        CHECK(m.frames == 1 + (n + cfg.n_fft - cfg.n_fft) / cfg.hop);
        CHECK(m.values.size() == m.bins * m.frames);
        for (double v : m.values) CHECK(std::isfinite(v));
        CHECK(samples_for_frames(m.frames, cfg) <= n);
        CHECK(mel_frames(samples_for_frames(m.frames, cfg), cfg) == m.frames);
    }
}

TEST_CASE("mel: clips too short to reflect are rejected") {
    MelConfig cfg;
    Waveform w;
    w.sample_rate = 32000;
    w.samples.assign(cfg.n_fft / 2, 0.1);
    CHECK_THROWS_AS(mel_spectrogram(w, cfg), ConfigError);
    w.samples.push_back(0.1);
    CHECK_NOTHROW(mel_spectrogram(w, cfg));
}

TEST_CASE("mel: invalid configurations are rejected") {
    MelConfig cfg;
    cfg.fmax = 20000;
    CHECK_THROWS_AS(MelFrontend(cfg, 32000), ConfigError);
    cfg = MelConfig{};
    cfg.hop = 2048;
    CHECK_THROWS_AS(MelFrontend(cfg, 32000), ConfigError);
    cfg = MelConfig{};
    MelFrontend fe(cfg, 32000);
    CHECK_THROWS_AS(fe(tone(100, 44100, 5000)), ConfigError);
}

TEST_CASE("mel: filterbank is non-negative with contiguous, non-empty rows") {
    for (auto [cfg, rate] : {std::pair{MelConfig{}, 32000.0}, std::pair{MelConfig{256, 128, 80, 0.0, 8000.0}, 16000.0},
                             std::pair{MelConfig{1024, 512, 32, 50.0, 4000.0}, 16000.0}}) {
        MelFrontend fe(cfg, rate);
        const auto& fb = fe.filterbank();
        const std::size_t bins = fe.fft_bins();
        REQUIRE(fb.size() == cfg.n_mels * bins);
        for (std::size_t r = 0; r < cfg.n_mels; ++r) {
            double total = 0.0;
            int segments = 0;
            bool inside = false;
            for (std::size_t k = 0; k < bins; ++k) {
                const double v = fb[r * bins + k];
                CHECK(v >= 0.0);
                total += v;
                if (v > 0.0 && !inside) ++segments;
                inside = v > 0.0;
            }
            CHECK(total > 0.0);
            CHECK(segments == 1);
        }
    }
}

TEST_CASE("mel: a 1 kHz tone peaks in the filter centred nearest 1 kHz") {
    MelConfig cfg;
    Waveform w = tone(1000, 32000, 32000);
    MelSpectrogram m = mel_spectrogram(w, cfg);
    // Filter centres are the interior points of n_mels + 2 equally spaced mels.
    const double lo = 2595.0 * std::log10(1.0 + cfg.fmin / 700.0);
    const double hi = 2595.0 * std::log10(1.0 + cfg.fmax / 700.0);
    std::size_t expected = 0;
    double nearest = 1e9;
    for (std::size_t r = 0; r < cfg.n_mels; ++r) {
        const double mel = lo + (hi - lo) * static_cast<double>(r + 1) / static_cast<double>(cfg.n_mels + 1);
        const double hz = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
        if (std::abs(hz - 1000.0) < nearest) {
            nearest = std::abs(hz - 1000.0);
            expected = r;
        }
    }
    for (std::size_t t = 0; t < m.frames; ++t) {
        std::size_t arg = 0;
        for (std::size_t r = 1; r < m.bins; ++r) {
            if (m.at(r, t) > m.at(arg, t)) arg = r;
        }
        CHECK(arg == expected);
    }
}

TEST_CASE("mel: matches a direct DFT evaluation") {
    // Reflection padding, periodic Hann, power spectrum, filterbank, log.
    MelConfig cfg{64, 24, 10, 100.0, 3500.0};
    const double rate = 8000;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Waveform w;
    w.sample_rate = rate;
    w.samples.resize(150);
    for (auto& s : w.samples) s = dist(rng);
    MelFrontend fe(cfg, rate);
    MelSpectrogram m = fe(w);
    const std::size_t n = cfg.n_fft, bins = n / 2 + 1;
    const auto len = static_cast<long>(w.samples.size());
    for (std::size_t t = 0; t < m.frames; ++t) {
        std::vector<double> power(bins);
        for (std::size_t k = 0; k < bins; ++k) {
            std::complex<double> acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                long j = static_cast<long>(t * cfg.hop + i) - static_cast<long>(n / 2);
                if (j < 0) j = -j;
                if (j >= len) j = 2 * (len - 1) - j;
                const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
                acc += hann * w.samples[static_cast<std::size_t>(j)] *
                       std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(n));
            }
            power[k] = std::norm(acc);
        }
        for (std::size_t r = 0; r < cfg.n_mels; ++r) {
            double e = 0.0;
            for (std::size_t k = 0; k < bins; ++k) e += fe.filterbank()[r * bins + k] * power[k];
            CHECK(m.at(r, t) == doctest::Approx(std::log(1e-10 + e)).epsilon(1e-10));
        }
    }
}

// ---- augmentation ----

TEST_CASE("augment: full crop without noise is the identity") {
    Waveform w = tone(220, 16000, 4000);
    AugmentConfig cfg;
    cfg.crop_fraction = {1.0, 1.0};
    cfg.noise_snr_db.reset();
    Rng rng(1);
    CHECK(augment(w, cfg, rng).samples == w.samples);
}

TEST_CASE("augment: same seed gives bit-identical output") {
    Waveform w = tone(220, 16000, 4000);
    AugmentConfig cfg;
    Rng a(42), b(42), c(43);
    Waveform x = augment(w, cfg, a), y = augment(w, cfg, b), z = augment(w, cfg, c);
    CHECK(x.samples == y.samples);
    CHECK(x.samples != z.samples);
}

TEST_CASE("augment: crop keeps a contiguous run and zero-pads the rest") {
    Waveform w;
    w.sample_rate = 1000;
    for (int i = 0; i < 1000; ++i) w.samples.push_back(1.0 + i);
    AugmentConfig cfg;
    cfg.crop_fraction = {0.6, 0.8};
    cfg.noise_snr_db.reset();
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        Waveform a = augment(w, cfg, rng);
        REQUIRE(a.samples.size() == 1000);
        std::size_t keep = 0;
        while (keep < 1000 && a.samples[keep] != 0.0) ++keep;
        CHECK(keep >= 600);
        CHECK(keep <= 800);
        for (std::size_t i = 1; i < keep; ++i) CHECK(a.samples[i] == a.samples[i - 1] + 1.0);
        for (std::size_t i = keep; i < 1000; ++i) CHECK(a.samples[i] == 0.0);
    }
}

TEST_CASE("augment: 20 dB noise on a unit-power signal has power 0.01") {
    Waveform w;
    w.sample_rate = 16000;
    w.samples.assign(200000, 1.0);
    AugmentConfig cfg;
    cfg.crop_fraction = {1.0, 1.0};
    cfg.noise_snr_db = std::array<double, 2>{20.0, 20.0};
    Rng rng(10);
    Waveform a = augment(w, cfg, rng);
    double p = 0.0;
    for (std::size_t i = 0; i < w.samples.size(); ++i) p += (a.samples[i] - 1.0) * (a.samples[i] - 1.0);
    p /= static_cast<double>(w.samples.size());
    CHECK(p == doctest::Approx(0.01).epsilon(0.1));
}

// ---- spectrogram cache ----

TEST_CASE("spectrogram cache round trip and corruption") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> dist(-5.0, 3.0);
    MelSpectrogram m;
    m.bins = 7;
    m.frames = 13;
    for (std::size_t i = 0; i < 91; ++i) m.values.push_back(dist(rng));
    auto p = scratch_dir() / "clip.sacs";
    write_spectrogram_cache(p, m);
    CHECK(fs::file_size(p) == 16 + 4 * 91);
    MelSpectrogram r = read_spectrogram_cache(p);
    CHECK(r.bins == 7);
    CHECK(r.frames == 13);
    for (std::size_t i = 0; i < 91; ++i) CHECK(r.values[i] == static_cast<double>(static_cast<float>(m.values[i])));

    std::string bytes;
    {
        std::ifstream in(p, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    CHECK(bytes.substr(0, 4) == "SACS");
    auto truncated = write_bytes("trunc.sacs", bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_spectrogram_cache(truncated), FormatError);
    std::string bad_version = bytes;
    bad_version[4] = 9;
    CHECK_THROWS_AS(read_spectrogram_cache(write_bytes("ver.sacs", bad_version)), FormatError);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(read_spectrogram_cache(write_bytes("magic.sacs", bad_magic)), FormatError);
}
