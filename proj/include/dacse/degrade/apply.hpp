#pragma once

#include <cmath>
#include <utility>

#include "dacse/audio/convolve.hpp"
#include "dacse/audio/resample.hpp"
#include "dacse/audio/waveform.hpp"
#include "dacse/degrade/assets.hpp"
#include "dacse/degrade/distortion.hpp"
#include "dacse/rng.hpp"

namespace dacse {

// Mixes noise into clean speech at an exact SNR. Powers are full-signal mean
// squares; gain g = sqrt(P_clean / (P_noise * 10^(snr/10))). Noise shorter
// than the clip loops; longer noise is cropped starting at offset_samples.
// The mix is peak-normalized to stay within [-1, 1].
inline Waveform apply_noise(const Waveform& clean, const Waveform& noise, double snr_db,
                            size_t offset_samples = 0) {
    clean.validate();
    noise.validate();
    const size_t n = clean.samples.size();

    std::vector<double> segment(n);
    const size_t m = noise.samples.size();
    for (size_t i = 0; i < n; ++i) segment[i] = noise.samples[(offset_samples + i) % m];

    double p_clean = clean.power();
    if (p_clean == 0.0) throw DegenerateError("clean signal has zero power");
    double p_noise = 0.0;
    for (double s : segment) p_noise += s * s;
    p_noise /= static_cast<double>(n);
    if (p_noise == 0.0) throw DegenerateNoiseError("noise segment has zero power");

    const double g = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));

    Waveform out;
    out.sample_rate_hz = clean.sample_rate_hz;
    out.samples.resize(n);
    for (size_t i = 0; i < n; ++i) out.samples[i] = clean.samples[i] + g * segment[i];
    out.peak_normalize();
    return out;
}

// Additive Gaussian noise at an exact SNR; the noise power is measured from
// the generated samples, not taken as its nominal variance.
inline Waveform apply_white_noise(const Waveform& clean, double snr_db, uint64_t seed) {
    clean.validate();
    Rng rng(seed);
    Waveform noise;
    noise.sample_rate_hz = clean.sample_rate_hz;
    noise.samples.resize(clean.samples.size());
    for (double& s : noise.samples) s = rng.gaussian();
    return apply_noise(clean, noise, snr_db);
}

// Tiles the signal into consecutive packets with durations drawn uniformly
// from packet_ms_range and zeroes each packet independently with probability
// p_drop. Samples in surviving packets are untouched.
inline Waveform apply_packet_loss(const Waveform& w, double packet_ms_lo, double packet_ms_hi,
                                  double p_drop, uint64_t seed) {
    w.validate();
    if (packet_ms_lo <= 0.0 || packet_ms_hi < packet_ms_lo) throw ConfigError("invalid packet size range");
    if (p_drop < 0.0 || p_drop > 1.0) throw ConfigError("p_drop outside [0, 1]");

    Rng rng(seed);
    Waveform out = w;
    const double sr = static_cast<double>(w.sample_rate_hz);
    size_t start = 0;
    while (start < out.samples.size()) {
        const double ms = rng.uniform(packet_ms_lo, packet_ms_hi);
        size_t len = static_cast<size_t>(std::lround(ms * sr / 1000.0));
        if (len == 0) len = 1;
        const size_t end = std::min(out.samples.size(), start + len);
        if (rng.bernoulli(p_drop))
            for (size_t i = start; i < end; ++i) out.samples[i] = 0.0;
        start = end;
    }
    return out;
}

// Bandlimits by resampling down and back up to 44.1 kHz. Output length is
// pinned to the input length (the rational round trip can differ by one
// sample; zero-pad or trim accordingly).
inline Waveform apply_downsample(const Waveform& w, int target_sr_hz) {
    Waveform down = resample(w, target_sr_hz);
    Waveform up = resample(down, w.sample_rate_hz);
    if (up.samples.size() > w.samples.size()) up.samples.resize(w.samples.size());
    while (up.samples.size() < w.samples.size()) up.samples.push_back(0.0);
    return up;
}

// Applies a sampled chain in canonical order. Returns the duration-aligned
// (noisy, clean) pair; the clean side is the dry input. Every random decision
// derives from chain.seed, so the output is a pure function of
// (clean, chain, assets).
inline std::pair<Waveform, Waveform> apply_chain(const Waveform& clean, const DistortionChain& chain,
                                                 const AssetCatalog& assets) {
    clean.validate();
    chain.validate();

    Waveform noisy = clean;
    for (size_t stage = 0; stage < chain.specs.size(); ++stage) {
        const DistortionSpec& spec = chain.specs[stage];
        const uint64_t stage_seed = derive_seed(chain.seed, stage);
        switch (spec.kind) {
            case DistortionKind::reverb: {
                const RirKernel& rir = assets.rir_by_ref(spec.source_ref);
                noisy = fft_convolve(noisy, rir);
                noisy.peak_normalize();
                break;
            }
            case DistortionKind::noise: {
                const Waveform& noise = assets.noise_by_ref(spec.source_ref);
                size_t offset = 0;
                if (noise.samples.size() > noisy.samples.size()) {
                    Rng rng(stage_seed);
                    offset = rng.uniform_int(noise.samples.size() - noisy.samples.size() + 1);
                }
                noisy = apply_noise(noisy, noise, spec.snr_db, offset);
                break;
            }
            case DistortionKind::white_noise:
                noisy = apply_white_noise(noisy, spec.snr_db, stage_seed);
                break;
            case DistortionKind::downsample:
                noisy = apply_downsample(noisy, spec.target_sr_hz);
                noisy.peak_normalize();
                break;
            case DistortionKind::packet_loss:
                noisy = apply_packet_loss(noisy, spec.packet_ms_lo, spec.packet_ms_hi, spec.p_drop, stage_seed);
                break;
        }
    }
    if (noisy.samples.size() != clean.samples.size())
        throw LengthError("distortion chain changed the clip length");
    return {std::move(noisy), clean};
}

}  // namespace dacse
