#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "dacse/audio/waveform.hpp"
#include "dacse/common.hpp"

namespace dacse {

namespace detail {

// Zeroth-order modified Bessel function of the first kind, power series.
inline double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    const double half_x = x / 2.0;
    for (int k = 1; k < 64; ++k) {
        term *= (half_x / k) * (half_x / k);
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return sum;
}

inline double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    const double px = 3.141592653589793238462643383279502884 * x;
    return std::sin(px) / px;
}

}  // namespace detail

inline constexpr int kResampleTapsPerPhase = 32;
inline constexpr double kResampleKaiserBeta = 8.0;
inline constexpr double kResampleCutoffFraction = 0.45;

// Rational-ratio polyphase resampler: windowed-sinc prototype lowpass with a
// Kaiser window (beta 8, 32 taps per phase plus the center tap), anti-alias
// cutoff at 0.45 * min(src, target). The prototype is centered, so output
// sample j lands exactly at input time j*M/L: no group delay. Same-rate calls
// pass the input through bit-exact.
inline Waveform resample(const Waveform& w, int target_hz) {
    if (target_hz < 1000) throw ConfigError("resample target below 1000 Hz");
    w.validate();
    if (target_hz == w.sample_rate_hz) return w;

    const int src_hz = w.sample_rate_hz;
    const int64_t g = std::gcd(src_hz, target_hz);
    const int64_t up = target_hz / g;    // interpolation factor L
    const int64_t down = src_hz / g;     // decimation factor M

    // Prototype lowpass at rate src*L, cutoff 0.45*min(src,target) Hz.
    const double cutoff_hz = kResampleCutoffFraction * std::min(src_hz, target_hz);
    const double fc = cutoff_hz / (static_cast<double>(src_hz) * up);  // cycles/sample
    const int64_t half = (kResampleTapsPerPhase / 2) * up;             // integer center
    const int64_t taps = 2 * half + 1;
    const double i0_beta = detail::bessel_i0(kResampleKaiserBeta);

    std::vector<double> h(taps);
    for (int64_t i = 0; i < taps; ++i) {
        const double t = static_cast<double>(i - half) / half;  // [-1, 1]
        const double window = detail::bessel_i0(kResampleKaiserBeta * std::sqrt(std::max(0.0, 1.0 - t * t))) / i0_beta;
        h[i] = 2.0 * fc * detail::sinc(2.0 * fc * static_cast<double>(i - half)) * window * up;
    }

    const int64_t n_in = static_cast<int64_t>(w.samples.size());
    const int64_t n_out = (n_in * up + down - 1) / down;  // duration within one sample

    Waveform out;
    out.sample_rate_hz = target_hz;
    out.samples.resize(static_cast<size_t>(n_out));

    // Output j sits at upsampled-grid position j*down; after zero-stuffing,
    // only taps congruent to that position mod `up` touch real input samples.
    // half is a multiple of up, so the phase depends on j*down alone.
    const int64_t half_in = half / up;  // filter reach in input samples
    for (int64_t j = 0; j < n_out; ++j) {
        const int64_t grid = j * down;
        const int64_t phase = grid % up;
        const int64_t base = grid / up;
        double acc = 0.0;
        for (int64_t s = 0, t = phase; t < taps; ++s, t += up) {
            const int64_t k = base + half_in - s;        // input index
            if (k < 0) break;                            // taps run from latest to earliest
            if (k >= n_in) continue;
            acc += h[t] * w.samples[k];
        }
        out.samples[j] = acc;
    }
    return out;
}

}  // namespace dacse
