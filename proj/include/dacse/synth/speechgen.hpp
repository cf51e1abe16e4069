#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dacse/audio/wav_io.hpp"
#include "dacse/audio/waveform.hpp"
#include "dacse/common.hpp"
#include "dacse/rng.hpp"

namespace dacse {

// Synthetic speech-like clips for desk corpora and tests. Clips are built from
// piecewise-steady "phoneme" segments whose pitch is locked to the frame grid:
// f0 = m * sr / hop makes the waveform periodic in exactly one hop, so every
// analysis frame inside a steady segment is the same vector and the RVQ
// codebooks can represent the corpus well at desk size. Formant templates and
// harmonic phases are global constants for the same reason: segment identity
// (pitch, vowel, level) determines the frame content corpus-wide.
struct SpeechGenConfig {
    double duration_s = 1.0;
    int sample_rate_hz = 44100;
    int hop = 512;
    double noise_floor = 0.003;  // keeps clean power nonzero; ~-50 dB
    int min_segment_hops = 4;
    int max_segment_hops = 10;
    double p_voiced = 0.85;
};

namespace synth_detail {

struct Vowel {
    double f[3];   // formant centers, Hz
    double bw[3];  // formant bandwidths, Hz
};

inline const Vowel* vowels() {
    static const Vowel table[4] = {
        {{730.0, 1090.0, 2440.0}, {90.0, 110.0, 160.0}},   // "a"
        {{270.0, 2290.0, 3010.0}, {60.0, 140.0, 180.0}},   // "i"
        {{300.0, 870.0, 2240.0}, {70.0, 100.0, 150.0}},    // "u"
        {{530.0, 1840.0, 2480.0}, {80.0, 120.0, 160.0}},   // "e"
    };
    return table;
}

// Deterministic per-harmonic phase, fixed across the whole corpus.
inline double harmonic_phase(int vowel, int h) {
    return 2.0 * 3.141592653589793 * std::fmod(0.618033988749895 * (h + 7 * vowel + 1), 1.0);
}

}  // namespace synth_detail

inline Waveform synth_speech_clip(uint64_t seed, const SpeechGenConfig& cfg = {}) {
    if (cfg.hop < 8 || cfg.duration_s <= 0.0) throw ConfigError("speechgen: bad config");
    const int sr = cfg.sample_rate_hz;
    const size_t n = static_cast<size_t>(std::llround(cfg.duration_s * sr));
    Waveform w;
    w.sample_rate_hz = sr;
    w.samples.assign(n, 0.0);

    Rng rng(seed);
    static const double levels[5] = {0.12, 0.2, 0.3, 0.45, 0.6};
    const double pi2 = 2.0 * 3.141592653589793;

    size_t pos = 0;  // in samples, always a hop multiple
    while (pos < n) {
        const int hops = cfg.min_segment_hops +
                         static_cast<int>(rng.uniform_int(
                             static_cast<uint64_t>(cfg.max_segment_hops - cfg.min_segment_hops + 1)));
        const size_t seg_len = std::min(n - pos, static_cast<size_t>(hops) * cfg.hop);
        const bool voiced = rng.bernoulli(cfg.p_voiced);

        if (voiced) {
            const int m = 2 + static_cast<int>(rng.uniform_int(3));  // pitch class 2..4
            const int vowel = static_cast<int>(rng.uniform_int(4));
            const double amp = levels[rng.uniform_int(5)];
            const double f0 = static_cast<double>(m) * sr / cfg.hop;

            // Formant-shaped harmonic amplitudes up to 6 kHz, L1-normalized so
            // the waveform is bounded by amp.
            const auto& vw = synth_detail::vowels()[vowel];
            std::vector<double> ah;
            for (int h = 1; h * f0 < 6000.0; ++h) {
                double a = 0.05;  // spectral tilt floor
                for (int f = 0; f < 3; ++f) {
                    const double d = (h * f0 - vw.f[f]) / vw.bw[f];
                    a += std::exp(-0.5 * d * d);
                }
                ah.push_back(a / h);  // 1/h rolloff
            }
            double l1 = 0.0;
            for (double a : ah) l1 += a;
            for (double& a : ah) a *= amp / l1;

            const size_t fade = std::min<size_t>(64, seg_len / 4);
            for (size_t i = 0; i < seg_len; ++i) {
                const double t = static_cast<double>(i) / sr;
                double s = 0.0;
                for (size_t h = 0; h < ah.size(); ++h)
                    s += ah[h] * std::sin(pi2 * f0 * (h + 1) * t +
                                          synth_detail::harmonic_phase(vowel, static_cast<int>(h)));
                double env = 1.0;
                if (i < fade) env = 0.5 - 0.5 * std::cos(3.141592653589793 * i / fade);
                else if (seg_len - 1 - i < fade)
                    env = 0.5 - 0.5 * std::cos(3.141592653589793 * (seg_len - 1 - i) / fade);
                w.samples[pos + i] = s * env;
            }
        }
        pos += seg_len;
    }

    if (cfg.noise_floor > 0.0) {
        Rng nrng = rng.derive(0x6e6fULL);
        for (auto& s : w.samples) s += cfg.noise_floor * nrng.gaussian();
    }
    w.peak_normalize();
    return w;
}

// Noise assets for the degradation catalog.
enum class NoiseKind { broadband, hum, babble };

inline Waveform synth_noise_clip(uint64_t seed, double duration_s, NoiseKind kind,
                                 int sample_rate_hz = 44100) {
    const size_t n = static_cast<size_t>(std::llround(duration_s * sample_rate_hz));
    Waveform w;
    w.sample_rate_hz = sample_rate_hz;
    w.samples.assign(n, 0.0);
    Rng rng(seed);
    switch (kind) {
        case NoiseKind::broadband: {
            // one-pole lowpass over white noise: colored but full-band
            double state = 0.0;
            const double a = 0.7;
            for (auto& s : w.samples) {
                state = a * state + (1.0 - a) * rng.gaussian();
                s = 2.5 * state;
            }
            break;
        }
        case NoiseKind::hum: {
            const double pi2 = 2.0 * 3.141592653589793;
            const double f = 50.0;
            for (size_t i = 0; i < n; ++i) {
                const double t = static_cast<double>(i) / sample_rate_hz;
                w.samples[i] = 0.5 * std::sin(pi2 * f * t) + 0.25 * std::sin(pi2 * 3 * f * t) +
                               0.12 * std::sin(pi2 * 5 * f * t) + 0.05 * rng.gaussian();
            }
            break;
        }
        case NoiseKind::babble: {
            SpeechGenConfig cfg;
            cfg.duration_s = duration_s;
            cfg.sample_rate_hz = sample_rate_hz;
            cfg.noise_floor = 0.0;
            for (int v = 0; v < 4; ++v) {
                const Waveform talker = synth_speech_clip(derive_seed(seed, 100 + v), cfg);
                const size_t shift = rng.uniform_int(static_cast<uint64_t>(sample_rate_hz / 4) + 1);
                for (size_t i = 0; i < n; ++i)
                    w.samples[i] += 0.4 * talker.samples[(i + shift) % talker.samples.size()];
            }
            break;
        }
    }
    w.peak_normalize();
    return w;
}

// Sparse exponentially-decaying room impulse response, direct path first.
inline RirKernel synth_rir(uint64_t seed, double tail_s = 0.12, int sample_rate_hz = 44100) {
    Rng rng(seed);
    const size_t n = static_cast<size_t>(std::llround(tail_s * sample_rate_hz));
    RirKernel k;
    k.sample_rate_hz = sample_rate_hz;
    k.taps.assign(n, 0.0);
    k.taps[0] = 1.0;
    const double tau = rng.uniform(0.02, 0.06);  // decay constant, seconds
    const int n_refl = 24 + static_cast<int>(rng.uniform_int(25));
    for (int r = 0; r < n_refl; ++r) {
        const size_t at = 1 + static_cast<size_t>(rng.uniform_int(n - 1));
        const double t = static_cast<double>(at) / sample_rate_hz;
        const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
        k.taps[at] += sign * rng.uniform(0.2, 0.8) * std::exp(-t / tau);
    }
    // keep the filter gain bounded so reverb cannot blow up the mix
    double l1 = 0.0;
    for (double t : k.taps) l1 += std::fabs(t);
    for (double& t : k.taps) t /= l1 * 0.5;  // direct path ends up at 2/l1 scale
    return k;
}

// Writes a small noise/RIR catalog plus its JSONL manifest; returns the
// manifest path.
inline std::filesystem::path write_demo_assets(const std::filesystem::path& dir, uint64_t seed,
                                               int n_noise = 6, int n_rir = 4) {
    std::filesystem::create_directories(dir);
    std::string manifest;
    for (int i = 0; i < n_noise; ++i) {
        const NoiseKind kind = i % 3 == 0   ? NoiseKind::broadband
                               : i % 3 == 1 ? NoiseKind::hum
                                            : NoiseKind::babble;
        const Waveform w = synth_noise_clip(derive_seed(seed, 200 + i), 3.0, kind);
        char name[32];
        std::snprintf(name, sizeof name, "noise_%02d.wav", i);
        write_wav(w, dir / name, WavEncoding::float32);
        nlohmann::json j{{"path", name}, {"kind", "noise"}, {"duration_s", w.duration_s()}};
        manifest += j.dump() + "\n";
    }
    for (int i = 0; i < n_rir; ++i) {
        const RirKernel k = synth_rir(derive_seed(seed, 300 + i));
        Waveform w;
        w.sample_rate_hz = k.sample_rate_hz;
        w.samples = k.taps;
        char name[32];
        std::snprintf(name, sizeof name, "rir_%02d.wav", i);
        write_wav(w, dir / name, WavEncoding::float32);
        nlohmann::json j{{"path", name}, {"kind", "rir"}, {"duration_s", w.duration_s()}};
        manifest += j.dump() + "\n";
    }
    const std::filesystem::path mpath = dir / "assets.jsonl";
    io::AtomicFile f(mpath);
    io::write_bytes(f.stream(), manifest.data(), manifest.size());
    f.commit();
    return mpath;
}

// A batch of clean clips on disk for corpus construction; returns the paths.
inline std::vector<std::filesystem::path> write_clean_corpus(const std::filesystem::path& dir,
                                                             uint64_t seed, int n_clips,
                                                             double duration_s = 1.0) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> out;
    SpeechGenConfig cfg;
    cfg.duration_s = duration_s;
    for (int i = 0; i < n_clips; ++i) {
        const Waveform w = synth_speech_clip(derive_seed(seed, i), cfg);
        char name[32];
        std::snprintf(name, sizeof name, "clean_%04d.wav", i);
        const auto p = dir / name;
        write_wav(w, p, WavEncoding::float32);
        out.push_back(p);
    }
    return out;
}

}  // namespace dacse
