#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dacse/audio/fft.hpp"
#include "dacse/audio/waveform.hpp"
#include "dacse/common.hpp"
#include "dacse/eval/spectrogram.hpp"

namespace dacse {

inline constexpr double kSiSnrCapDb = 60.0;

// Scale-invariant SNR: project est onto ref, alpha = <est,ref>/||ref||^2,
// target = alpha*ref, noise = est - target. Capped to +-60 dB so perfect or
// hopeless estimates stay reportable.
inline double si_snr(const Waveform& est, const Waveform& ref) {
    if (est.samples.size() != ref.samples.size())
        throw LengthError("si_snr: estimate has " + std::to_string(est.samples.size()) +
                          " samples, reference has " + std::to_string(ref.samples.size()));
    double dot = 0.0, ref_sq = 0.0;
    for (size_t i = 0; i < ref.samples.size(); ++i) {
        dot += est.samples[i] * ref.samples[i];
        ref_sq += ref.samples[i] * ref.samples[i];
    }
    if (ref_sq == 0.0) throw DegenerateError("si_snr: reference signal is all zeros");
    const double alpha = dot / ref_sq;
    double sig = 0.0, err = 0.0;
    for (size_t i = 0; i < ref.samples.size(); ++i) {
        const double t = alpha * ref.samples[i];
        const double e = est.samples[i] - t;
        sig += t * t;
        err += e * e;
    }
    // sig == 0 covers the all-zero estimate (alpha = 0 makes err vanish too,
    // so this test must come first) and estimates orthogonal to the reference.
    if (sig == 0.0) return -kSiSnrCapDb;
    if (err == 0.0) return kSiSnrCapDb;
    return std::clamp(10.0 * std::log10(sig / err), -kSiSnrCapDb, kSiSnrCapDb);
}

// RMS over frames of RMS over bins of the log-magnitude spectrum difference.
inline double log_spectral_distance(const Waveform& est, const Waveform& ref,
                                    size_t frame_len = 1024, size_t hop = 256) {
    if (est.samples.size() != ref.samples.size())
        throw LengthError("log_spectral_distance: signals differ in length");
    constexpr double eps = 1e-10;
    const size_t n = ref.samples.size();
    const size_t n_frames = (n + hop - 1) / hop;
    const size_t n_bins = frame_len / 2 + 1;
    double frame_acc = 0.0;
    for (size_t f = 0; f < n_frames; ++f) {
        const size_t start = f * hop;
        const size_t len = std::min(frame_len, n - start);
        const auto a = fft::real_magnitude(est.samples.data() + start, len, frame_len);
        const auto b = fft::real_magnitude(ref.samples.data() + start, len, frame_len);
        double bin_acc = 0.0;
        for (size_t k = 0; k < n_bins; ++k) {
            const double d = 20.0 * std::log10(a[k] + eps) - 20.0 * std::log10(b[k] + eps);
            bin_acc += d * d;
        }
        frame_acc += std::sqrt(bin_acc / n_bins);
    }
    return frame_acc / n_frames;
}

// RMS difference between the 64-band log-mel spectrograms; the mel analog of
// log_spectral_distance for Fig.-style before/after comparison.
inline double mel_distance(const Waveform& est, const Waveform& ref,
                           const SpectrogramConfig& cfg = {}) {
    if (est.samples.size() != ref.samples.size())
        throw LengthError("mel_distance: signals differ in length");
    const MelSpectrogram a = log_mel_spectrogram(est, cfg);
    const MelSpectrogram b = log_mel_spectrogram(ref, cfg);
    double acc = 0.0;
    for (size_t i = 0; i < a.db.size(); ++i) {
        const double d = a.db[i] - b.db[i];
        acc += d * d;
    }
    return std::sqrt(acc / a.db.size());
}

inline double token_accuracy(const std::vector<uint32_t>& generated,
                             const std::vector<uint32_t>& reference) {
    if (generated.size() != reference.size())
        throw LengthError("token_accuracy: " + std::to_string(generated.size()) + " vs " +
                          std::to_string(reference.size()) + " tokens");
    if (reference.empty()) throw DegenerateError("token_accuracy: empty sequences");
    size_t hits = 0;
    for (size_t i = 0; i < reference.size(); ++i)
        if (generated[i] == reference[i]) ++hits;
    return static_cast<double>(hits) / reference.size();
}

// Per-file metric values; token_accuracy only when reference tokens exist.
struct MetricValues {
    std::string name;
    double si_snr_db = 0.0;
    double lsd_db = 0.0;
    double mel_dist = 0.0;
    std::optional<double> token_acc;
};

// Aggregate = plain mean of the per-file values (token accuracy averaged over
// the files that have one).
inline MetricValues aggregate_metrics(const std::vector<MetricValues>& files) {
    if (files.empty()) throw DegenerateError("aggregate_metrics: no files");
    MetricValues agg;
    agg.name = "aggregate";
    size_t n_tok = 0;
    double tok_sum = 0.0;
    for (const MetricValues& m : files) {
        agg.si_snr_db += m.si_snr_db;
        agg.lsd_db += m.lsd_db;
        agg.mel_dist += m.mel_dist;
        if (m.token_acc) {
            tok_sum += *m.token_acc;
            ++n_tok;
        }
    }
    agg.si_snr_db /= files.size();
    agg.lsd_db /= files.size();
    agg.mel_dist /= files.size();
    if (n_tok > 0) agg.token_acc = tok_sum / n_tok;
    return agg;
}

}  // namespace dacse
