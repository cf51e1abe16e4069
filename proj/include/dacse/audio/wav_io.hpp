#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dacse/audio/waveform.hpp"
#include "dacse/common.hpp"

namespace dacse {

enum class WavEncoding { pcm16, float32 };

namespace detail {

inline uint32_t rd_u32(const unsigned char* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
inline uint16_t rd_u16(const unsigned char* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

}  // namespace detail

// Reads a RIFF/WAVE file. PCM16 and IEEE float32 are accepted; stereo is
// downmixed to mono by averaging. Samples come back scaled to [-1, 1]
// (full-scale PCM16 maps to 32767/32768).
inline Waveform read_wav(const std::filesystem::path& path) {
    std::vector<unsigned char> buf = io::read_file(path);
    if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
        throw FormatError("not a RIFF/WAVE file: " + path.string());

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    const unsigned char* data = nullptr;
    size_t data_len = 0;
    bool have_fmt = false;

    size_t pos = 12;
    while (pos + 8 <= buf.size()) {
        const char* id = reinterpret_cast<const char*>(buf.data() + pos);
        const uint32_t chunk_len = detail::rd_u32(buf.data() + pos + 4);
        if (pos + 8 + chunk_len > buf.size()) throw FormatError("chunk overruns file: " + path.string());
        const unsigned char* body = buf.data() + pos + 8;
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw FormatError("fmt chunk too short");
            format = detail::rd_u16(body);
            channels = detail::rd_u16(body + 2);
            rate = detail::rd_u32(body + 4);
            bits = detail::rd_u16(body + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = body;
            data_len = chunk_len;
        }
        pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
    }
    if (!have_fmt || data == nullptr) throw FormatError("missing fmt or data chunk: " + path.string());
    if (channels == 0 || channels > 2) throw UnsupportedError("only mono or stereo supported");
    if (rate == 0) throw FormatError("zero sample rate");

    const bool pcm16 = (format == 1 && bits == 16);
    const bool f32 = (format == 3 && bits == 32);
    if (!pcm16 && !f32) throw UnsupportedError("unsupported encoding (want PCM16 or float32)");

    const size_t bytes_per = (pcm16 ? 2u : 4u) * channels;
    const size_t n = data_len / bytes_per;
    if (n == 0) throw FormatError("empty data chunk: " + path.string());

    Waveform w;
    w.sample_rate_hz = static_cast<int>(rate);
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int c = 0; c < channels; ++c) {
            const unsigned char* p = data + i * bytes_per + c * (pcm16 ? 2 : 4);
            if (pcm16) {
                int16_t v = static_cast<int16_t>(detail::rd_u16(p));
                acc += static_cast<double>(v) / 32768.0;
            } else {
                uint32_t raw = detail::rd_u32(p);
                float f;
                std::memcpy(&f, &raw, 4);
                acc += static_cast<double>(f);
            }
        }
        w.samples[i] = acc / channels;
    }
    return w;
}

// Writes mono WAV, PCM16 or IEEE float32, little-endian. float32 then read_wav
// is the identity on float-representable sample values; PCM16 rounds to the
// nearest step (error <= 2^-15).
inline void write_wav(const Waveform& w, const std::filesystem::path& path,
                      WavEncoding encoding = WavEncoding::float32) {
    w.validate();
    const uint16_t fmt = encoding == WavEncoding::pcm16 ? 1 : 3;
    const uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
    const uint32_t n = static_cast<uint32_t>(w.samples.size());
    const uint32_t data_len = n * (bits / 8);

    io::AtomicFile file(path);
    auto& out = file.stream();
    auto u32 = [&](uint32_t v) { io::write_le<uint32_t>(out, v); };
    auto u16 = [&](uint16_t v) { io::write_le<uint16_t>(out, v); };

    io::write_bytes(out, "RIFF", 4);
    u32(36 + data_len);
    io::write_bytes(out, "WAVE", 4);
    io::write_bytes(out, "fmt ", 4);
    u32(16);
    u16(fmt);
    u16(1);  // mono
    u32(static_cast<uint32_t>(w.sample_rate_hz));
    u32(static_cast<uint32_t>(w.sample_rate_hz) * (bits / 8));
    u16(bits / 8);
    u16(bits);
    io::write_bytes(out, "data", 4);
    u32(data_len);

    if (encoding == WavEncoding::pcm16) {
        for (double s : w.samples) {
            double v = s * 32768.0;
            long q = std::lround(v);
            if (q > 32767) q = 32767;
            if (q < -32768) q = -32768;
            u16(static_cast<uint16_t>(static_cast<int16_t>(q)));
        }
    } else {
        for (double s : w.samples) {
            float f = static_cast<float>(s);
            uint32_t raw;
            std::memcpy(&raw, &f, 4);
            u32(raw);
        }
    }
    file.commit();
}

}  // namespace dacse
