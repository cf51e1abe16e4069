#pragma once

#include <cstdint>

#include "dacse/common.hpp"

namespace dacse {

// Codec geometry and RVQ sizing. Two bundled profiles: "paper" (9 books of
// 1024 codes) and "desk" (4 books of 64 codes), both at hop 512 so the frame
// rate is 44100/512 = 86.13 Hz.
struct CodecConfig {
    int frame_len = 1024;       // samples per frame, power of two
    int hop = 512;              // frame_len / 2
    int n_codebooks = 4;        // L
    int codebook_size = 64;     // K
    int latent_dim = 1024;      // must equal frame_len: the analysis transform is square
    int sample_rate_hz = 44100;
    uint64_t projection_seed = 0x0dac5e1ULL;  // seeds the fixed orthonormal mixing

    double frame_rate_hz() const { return static_cast<double>(sample_rate_hz) / hop; }

    void validate() const {
        if (frame_len <= 0 || (frame_len & (frame_len - 1)) != 0)
            throw ConfigError("frame_len must be a power of two");
        if (hop * 2 != frame_len) throw ConfigError("hop must be frame_len / 2");
        if (latent_dim != frame_len)
            throw ConfigError("latent_dim must equal frame_len (invertible analysis)");
        if (n_codebooks < 1) throw ConfigError("need at least one codebook");
        if (codebook_size < 2) throw ConfigError("codebook_size must be >= 2");
        if (sample_rate_hz <= 0) throw ConfigError("bad sample rate");
    }

    static CodecConfig desk() { return CodecConfig{}; }

    static CodecConfig paper() {
        CodecConfig c;
        c.n_codebooks = 9;
        c.codebook_size = 1024;
        return c;
    }
};

}  // namespace dacse
