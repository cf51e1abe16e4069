#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <zlib.h>

#include "dacse/audio/fft.hpp"
#include "dacse/audio/waveform.hpp"
#include "dacse/common.hpp"

namespace dacse {

struct SpectrogramConfig {
    int n_mels = 64;
    size_t frame_len = 1024;
    size_t hop = 256;
};

namespace mel_detail {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filterbank over the one-sided spectrum. Rows sum the power of the
// bins under each triangle; a filter too narrow to cover any bin center falls
// back to its nearest bin so no band is permanently dark.
inline std::vector<std::vector<double>> filterbank(int n_mels, size_t n_bins, int sample_rate_hz,
                                                   size_t n_fft) {
    const double mel_hi = hz_to_mel(sample_rate_hz / 2.0);
    std::vector<double> edges(n_mels + 2);
    for (int j = 0; j < n_mels + 2; ++j) edges[j] = mel_to_hz(mel_hi * j / (n_mels + 1));

    std::vector<std::vector<double>> fb(n_mels, std::vector<double>(n_bins, 0.0));
    const double bin_hz = static_cast<double>(sample_rate_hz) / n_fft;
    for (int j = 0; j < n_mels; ++j) {
        const double lo = edges[j], mid = edges[j + 1], hi = edges[j + 2];
        double total = 0.0;
        for (size_t k = 0; k < n_bins; ++k) {
            const double f = k * bin_hz;
            double w = 0.0;
            if (f > lo && f < mid) w = (f - lo) / (mid - lo);
            else if (f >= mid && f < hi) w = (hi - f) / (hi - mid);
            fb[j][k] = w;
            total += w;
        }
        if (total == 0.0) {
            const size_t k = std::min(n_bins - 1, static_cast<size_t>(std::llround(mid / bin_hz)));
            fb[j][k] = 1.0;
        }
    }
    return fb;
}

}  // namespace mel_detail

// Row-major [n_frames x n_mels] of 10*log10(mel power + eps). Frames start at
// multiples of hop and are zero-padded past the end, so n_frames = ceil(n/hop)
// and two equal-length signals always frame identically.
struct MelSpectrogram {
    size_t n_frames = 0;
    int n_mels = 0;
    std::vector<double> db;  // [frame * n_mels + mel]

    double at(size_t f, int m) const { return db[f * n_mels + m]; }
};

inline MelSpectrogram log_mel_spectrogram(const Waveform& w, const SpectrogramConfig& cfg = {}) {
    w.validate();
    const size_t n = w.samples.size();
    const size_t n_frames = (n + cfg.hop - 1) / cfg.hop;
    const size_t n_bins = cfg.frame_len / 2 + 1;
    const auto fb = mel_detail::filterbank(cfg.n_mels, n_bins, w.sample_rate_hz, cfg.frame_len);

    std::vector<double> window(cfg.frame_len);
    for (size_t i = 0; i < cfg.frame_len; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * 3.141592653589793 * i / cfg.frame_len);

    MelSpectrogram out;
    out.n_frames = n_frames;
    out.n_mels = cfg.n_mels;
    out.db.assign(n_frames * cfg.n_mels, 0.0);
    constexpr double eps = 1e-10;
    std::vector<double> frame(cfg.frame_len);
    for (size_t f = 0; f < n_frames; ++f) {
        const size_t start = f * cfg.hop;
        const size_t len = std::min(cfg.frame_len, n - start);
        for (size_t i = 0; i < cfg.frame_len; ++i)
            frame[i] = i < len ? w.samples[start + i] * window[i] : 0.0;
        const std::vector<double> mag = fft::real_magnitude(frame.data(), cfg.frame_len, cfg.frame_len);
        for (int m = 0; m < cfg.n_mels; ++m) {
            double p = 0.0;
            for (size_t k = 0; k < n_bins; ++k) p += fb[m][k] * mag[k] * mag[k];
            out.db[f * cfg.n_mels + m] = 10.0 * std::log10(p + eps);
        }
    }
    return out;
}

namespace png_detail {

inline void put_u32_be(std::vector<unsigned char>& v, uint32_t x) {
    v.push_back(static_cast<unsigned char>(x >> 24));
    v.push_back(static_cast<unsigned char>(x >> 16));
    v.push_back(static_cast<unsigned char>(x >> 8));
    v.push_back(static_cast<unsigned char>(x));
}

inline void chunk(std::vector<unsigned char>& out, const char type[4],
                  const std::vector<unsigned char>& data) {
    put_u32_be(out, static_cast<uint32_t>(data.size()));
    const size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uint32_t crc = ::crc32(0L, Z_NULL, 0);
    crc = ::crc32(crc, out.data() + type_at, static_cast<uInt>(4 + data.size()));
    put_u32_be(out, crc);
}

// Dark-blue -> teal -> yellow ramp; t in [0,1].
inline void colormap(double t, unsigned char rgb[3]) {
    t = std::clamp(t, 0.0, 1.0);
    const double r = std::clamp(1.8 * t - 0.6, 0.0, 1.0);
    const double g = std::clamp(1.4 * t - 0.05, 0.0, 1.0);
    const double b = std::clamp(0.35 + 1.4 * t * (1.0 - t) * 2.0 - 0.9 * t, 0.0, 1.0);
    rgb[0] = static_cast<unsigned char>(std::lround(255.0 * r));
    rgb[1] = static_cast<unsigned char>(std::lround(255.0 * g));
    rgb[2] = static_cast<unsigned char>(std::lround(255.0 * b));
}

inline std::vector<unsigned char> encode_rgb(const std::vector<unsigned char>& pixels,
                                             size_t width, size_t height) {
    std::vector<unsigned char> raw;
    raw.reserve(height * (1 + width * 3));
    for (size_t y = 0; y < height; ++y) {
        raw.push_back(0);  // filter: none
        raw.insert(raw.end(), pixels.begin() + y * width * 3, pixels.begin() + (y + 1) * width * 3);
    }
    uLongf bound = ::compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> packed(bound);
    // fixed level => deterministic bytes for identical input
    if (::compress2(packed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw IoError("PNG deflate failed");
    packed.resize(bound);

    std::vector<unsigned char> out;
    static const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.insert(out.end(), sig, sig + 8);
    std::vector<unsigned char> ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(width));
    put_u32_be(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    chunk(out, "IHDR", ihdr);
    chunk(out, "IDAT", packed);
    chunk(out, "IEND", {});
    return out;
}

}  // namespace png_detail

// Renders the log-mel spectrogram to an RGB PNG: time left-to-right, high
// frequencies at the top, 80 dB display range below the clip's own maximum.
// Silence (or any constant input) maps every pixel to the colormap floor.
inline void emit_spectrogram_png(const Waveform& w, const std::filesystem::path& path,
                                 const SpectrogramConfig& cfg = {}) {
    const MelSpectrogram sp = log_mel_spectrogram(w, cfg);
    const size_t width = sp.n_frames;
    const size_t height = static_cast<size_t>(sp.n_mels);
    double hi = -1e30;
    for (double v : sp.db) hi = std::max(hi, v);
    // -100 dB is the log of eps alone, i.e. digital silence; never window
    // below it, and give degenerate (constant) input a nonzero range so it
    // lands on the colormap floor.
    const double lo = std::max(hi - 80.0, -100.0);
    if (hi <= lo) hi = lo + 1.0;

    std::vector<unsigned char> pixels(width * height * 3);
    for (size_t y = 0; y < height; ++y) {
        const int m = sp.n_mels - 1 - static_cast<int>(y);
        for (size_t x = 0; x < width; ++x) {
            const double t = (sp.at(x, m) - lo) / (hi - lo);
            png_detail::colormap(t, &pixels[(y * width + x) * 3]);
        }
    }
    const std::vector<unsigned char> bytes = png_detail::encode_rgb(pixels, width, height);
    io::AtomicFile f(path);
    io::write_bytes(f.stream(), bytes.data(), bytes.size());
    f.commit();
}

}  // namespace dacse
