#pragma once

#include <cstdint>
#include <string>

#include "dacse/codec/config.hpp"
#include "dacse/common.hpp"

namespace dacse {

// Unified token vocabulary: base ids pack (codebook, code) as l*K + c, and the
// four specials sit directly above. An id below base_size() decodes uniquely;
// specials never collide with base ids.
struct VocabLayout {
    int L = 0;
    int K = 0;

    uint32_t base_size() const { return static_cast<uint32_t>(L) * static_cast<uint32_t>(K); }
    uint32_t start_clean() const { return base_size(); }
    uint32_t bos() const { return base_size() + 1; }
    uint32_t eos() const { return base_size() + 2; }
    uint32_t pad() const { return base_size() + 3; }
    uint32_t vocab_size() const { return base_size() + 4; }

    uint32_t id_of(int l, uint32_t code) const {
        return static_cast<uint32_t>(l) * static_cast<uint32_t>(K) + code;
    }
    int book_of(uint32_t id) const { return static_cast<int>(id / static_cast<uint32_t>(K)); }
    uint32_t code_of(uint32_t id) const { return id % static_cast<uint32_t>(K); }
    bool is_special(uint32_t id) const { return id >= base_size(); }

    void validate() const {
        if (L < 1 || K < 2) throw ConfigError("vocab: need L >= 1 and K >= 2");
    }

    static VocabLayout from_codec(const CodecConfig& cfg) {
        VocabLayout v;
        v.L = cfg.n_codebooks;
        v.K = cfg.codebook_size;
        v.validate();
        return v;
    }
};

// Task labels routed through dataset records: 0..4 are the distortion kinds (a
// record whose chain applied exactly one kind), 5 marks a multi-kind chain.
constexpr uint8_t kTaskMixed = 5;
constexpr int kTaskCount = 6;

// Labels 0..4 are DistortionKind values; keep the two tables in sync.
inline const char* task_name(uint8_t label) {
    switch (label) {
        case 0: return "white_noise";
        case 1: return "noise";
        case 2: return "reverb";
        case 3: return "downsample";
        case 4: return "packet_loss";
        case kTaskMixed: return "mixed";
        default: throw IndexError("unknown task label " + std::to_string(label));
    }
}

}  // namespace dacse
