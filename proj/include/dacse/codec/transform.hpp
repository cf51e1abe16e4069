#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "dacse/audio/fft.hpp"
#include "dacse/audio/waveform.hpp"
#include "dacse/codec/config.hpp"
#include "dacse/common.hpp"
#include "dacse/rng.hpp"
#include "dacse/threading.hpp"

namespace dacse {

// Dense per-frame latents, row-major [n_frames x dim]. source_samples remembers
// the pre-padding clip length so a round trip can be cropped exactly.
struct FrameMatrix {
    size_t n_frames = 0;
    int dim = 0;
    std::vector<double> data;
    size_t source_samples = 0;

    double* row(size_t f) { return data.data() + f * static_cast<size_t>(dim); }
    const double* row(size_t f) const { return data.data() + f * static_cast<size_t>(dim); }
};

namespace detail {

// Orthonormal DCT-II of even power-of-two length, computed through one complex
// FFT of the same length (even/odd reshuffle + quarter-sample twiddle).
inline void dct2_inplace(std::vector<double>& x, std::vector<std::complex<double>>& scratch) {
    const size_t n = x.size();
    if (n == 1) return;
    scratch.assign(n, {0.0, 0.0});
    for (size_t i = 0; i * 2 < n; ++i) {
        scratch[i] = {x[2 * i], 0.0};
        scratch[n - 1 - i] = {x[2 * i + 1], 0.0};
    }
    fft::forward(scratch);
    const double pi = 3.141592653589793238462643383279502884;
    const double s0 = std::sqrt(1.0 / static_cast<double>(n));
    const double sk = std::sqrt(2.0 / static_cast<double>(n));
    x[0] = scratch[0].real() * s0;
    for (size_t k = 1; k < n; ++k) {
        const double ang = -pi * static_cast<double>(k) / (2.0 * static_cast<double>(n));
        const std::complex<double> tw(std::cos(ang), std::sin(ang));
        x[k] = (tw * scratch[k]).real() * sk;
    }
}

// Orthonormal DCT-III (exact inverse of dct2_inplace): rebuild the FFT spectrum
// from the cosine coefficients, invert, undo the even/odd reshuffle.
inline void dct3_inplace(std::vector<double>& x, std::vector<std::complex<double>>& scratch) {
    const size_t n = x.size();
    if (n == 1) return;
    const double pi = 3.141592653589793238462643383279502884;
    const double s0 = std::sqrt(1.0 / static_cast<double>(n));
    const double sk = std::sqrt(2.0 / static_cast<double>(n));
    scratch.assign(n, {0.0, 0.0});
    scratch[0] = {x[0] / s0, 0.0};
    for (size_t k = 1; k < n; ++k) {
        const double ang = pi * static_cast<double>(k) / (2.0 * static_cast<double>(n));
        const std::complex<double> tw(std::cos(ang), std::sin(ang));
        scratch[k] = tw * std::complex<double>(x[k] / sk, -x[n - k] / sk);
    }
    fft::inverse(scratch);
    for (size_t i = 0; i * 2 < n; ++i) {
        x[2 * i] = scratch[i].real();
        x[2 * i + 1] = scratch[n - 1 - i].real();
    }
}

// Normalized Walsh-Hadamard, self-inverse.
inline void wht_inplace(double* x, size_t n) {
    for (size_t len = 1; len < n; len <<= 1) {
        for (size_t i = 0; i < n; i += len << 1) {
            for (size_t j = i; j < i + len; ++j) {
                const double a = x[j];
                const double b = x[j + len];
                x[j] = a + b;
                x[j + len] = a - b;
            }
        }
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (size_t i = 0; i < n; ++i) x[i] *= scale;
}

}  // namespace detail

// Invertible analysis/synthesis for one codec geometry. Pipeline per frame:
// sine window -> orthonormal DCT-II -> seeded signed permutation -> normalized
// Walsh-Hadamard. Every stage is orthonormal, so frame energy is preserved and
// the inverse is exact up to rounding. Overlap-add synthesis re-applies the
// window and divides by the accumulated window energy (1 everywhere except the
// first and last hop, where a single frame contributes).
class FrameTransform {
public:
    explicit FrameTransform(const CodecConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        const int n = cfg_.frame_len;
        const double pi = 3.141592653589793238462643383279502884;
        window_.resize(n);
        for (int i = 0; i < n; ++i)
            window_[i] = std::sin(pi * (i + 0.5) / static_cast<double>(n));

        perm_.resize(n);
        for (int i = 0; i < n; ++i) perm_[i] = i;
        Rng perm_rng(derive_seed(cfg_.projection_seed, 0x7065726dULL));  // "perm"
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(perm_rng.uniform_int(static_cast<uint64_t>(i) + 1));
            std::swap(perm_[i], perm_[j]);
        }
        Rng sign_rng(derive_seed(cfg_.projection_seed, 0x7369676eULL));  // "sign"
        signs_.resize(n);
        for (int i = 0; i < n; ++i) signs_[i] = sign_rng.bernoulli(0.5) ? 1.0 : -1.0;
    }

    const CodecConfig& config() const { return cfg_; }

    size_t frame_count(size_t n_samples) const {
        return (n_samples + cfg_.hop - 1) / cfg_.hop;
    }

    FrameMatrix analyze(const Waveform& w) const {
        w.validate();
        if (w.sample_rate_hz != cfg_.sample_rate_hz)
            throw RateMismatchError("analyze: clip is " + std::to_string(w.sample_rate_hz) +
                                    " Hz, codec expects " + std::to_string(cfg_.sample_rate_hz));
        const size_t n = w.samples.size();
        const size_t flen = static_cast<size_t>(cfg_.frame_len);
        if (n < flen)
            throw TooShortError("analyze: clip has " + std::to_string(n) +
                                " samples, need at least one frame (" + std::to_string(flen) + ")");
        const size_t hop = static_cast<size_t>(cfg_.hop);
        const size_t n_frames = frame_count(n);

        std::vector<double> padded((n_frames + 1) * hop, 0.0);
        std::copy(w.samples.begin(), w.samples.end(), padded.begin());

        FrameMatrix out;
        out.n_frames = n_frames;
        out.dim = cfg_.latent_dim;
        out.source_samples = n;
        out.data.resize(n_frames * flen);

        parallel_for(n_frames, [&](size_t f0, size_t f1) {
            std::vector<double> buf(flen);
            std::vector<double> mixed(flen);
            std::vector<std::complex<double>> scratch;
            for (size_t f = f0; f < f1; ++f) {
                const double* src = padded.data() + f * hop;
                for (size_t i = 0; i < flen; ++i) buf[i] = src[i] * window_[i];
                detail::dct2_inplace(buf, scratch);
                for (size_t i = 0; i < flen; ++i) mixed[i] = signs_[i] * buf[perm_[i]];
                detail::wht_inplace(mixed.data(), flen);
                std::copy(mixed.begin(), mixed.end(), out.row(f));
            }
        });
        return out;
    }

    // n_samples == 0 means "frame grid length" (n_frames * hop). Anything longer
    // than the covered span is unreconstructable.
    Waveform synthesize(const FrameMatrix& frames, size_t n_samples = 0) const {
        if (frames.dim != cfg_.latent_dim)
            throw ConfigError("synthesize: latent dim mismatch");
        if (frames.n_frames == 0) throw DegenerateError("synthesize: no frames");
        const size_t flen = static_cast<size_t>(cfg_.frame_len);
        const size_t hop = static_cast<size_t>(cfg_.hop);
        const size_t covered = (frames.n_frames + 1) * hop;
        size_t want = n_samples != 0 ? n_samples : frames.n_frames * hop;
        if (want > covered)
            throw LengthError("synthesize: requested " + std::to_string(want) +
                              " samples but frames cover only " + std::to_string(covered));

        std::vector<double> acc(covered, 0.0);
        std::vector<double> wsum(covered, 0.0);
        std::vector<double> buf(flen);
        std::vector<double> mixed(flen);
        std::vector<std::complex<double>> scratch;
        for (size_t f = 0; f < frames.n_frames; ++f) {
            std::copy(frames.row(f), frames.row(f) + flen, mixed.begin());
            detail::wht_inplace(mixed.data(), flen);
            for (size_t i = 0; i < flen; ++i) buf[perm_[i]] = signs_[i] * mixed[i];
            detail::dct3_inplace(buf, scratch);
            double* dst = acc.data() + f * hop;
            double* wd = wsum.data() + f * hop;
            for (size_t i = 0; i < flen; ++i) {
                dst[i] += buf[i] * window_[i];
                wd[i] += window_[i] * window_[i];
            }
        }

        Waveform out;
        out.sample_rate_hz = cfg_.sample_rate_hz;
        out.samples.resize(want);
        for (size_t i = 0; i < want; ++i) out.samples[i] = acc[i] / wsum[i];
        return out;
    }

private:
    CodecConfig cfg_;
    std::vector<double> window_;
    std::vector<int> perm_;
    std::vector<double> signs_;
};

}  // namespace dacse
