#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dacse/common.hpp"

namespace dacse {

inline constexpr int kCanonicalSampleRate = 44100;
inline constexpr double kMaxClipSeconds = 5.0;  // training clips are capped at 5 s

// Mono sample buffer plus its rate. Samples are held in double for DSP
// headroom and quantized to 32-bit (or PCM16) only at file boundaries.
struct Waveform {
    std::vector<double> samples;
    int sample_rate_hz = kCanonicalSampleRate;

    Waveform() = default;
    Waveform(std::vector<double> s, int rate) : samples(std::move(s)), sample_rate_hz(rate) {}

    size_t size() const { return samples.size(); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }

    void validate() const {
        if (samples.empty()) throw FormatError("waveform is empty");
        if (sample_rate_hz <= 0) throw FormatError("waveform sample rate must be positive");
        for (double s : samples)
            if (!std::isfinite(s)) throw NumericsError("waveform contains a non-finite sample");
    }

    // Cap duration; used when ingesting clean corpora.
    void truncate_to_seconds(double seconds) {
        const size_t cap = static_cast<size_t>(seconds * sample_rate_hz);
        if (samples.size() > cap) samples.resize(cap);
    }

    double peak() const {
        double p = 0.0;
        for (double s : samples) p = std::max(p, std::abs(s));
        return p;
    }

    // Mean-square power over the full signal.
    double power() const {
        double acc = 0.0;
        for (double s : samples) acc += s * s;
        return samples.empty() ? 0.0 : acc / static_cast<double>(samples.size());
    }

    double rms() const { return std::sqrt(power()); }

    // Scale so that the peak does not exceed 1.0. Signals already inside the
    // range are left untouched. Returns the gain applied.
    double peak_normalize() {
        const double p = peak();
        if (p <= 1.0 || p == 0.0) return 1.0;
        const double g = 1.0 / p;
        for (double& s : samples) s *= g;
        return g;
    }
};

// Room impulse response kernel for fast convolution.
struct RirKernel {
    std::vector<double> taps;
    int sample_rate_hz = kCanonicalSampleRate;

    void validate() const {
        if (taps.empty()) throw FormatError("RIR kernel is empty");
        double energy = 0.0;
        for (double t : taps) energy += t * t;
        if (energy == 0.0) throw DegenerateError("RIR kernel has zero energy");
    }
};

}  // namespace dacse
