#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dacse/codec/rvq.hpp"
#include "dacse/common.hpp"
#include "dacse/token/vocab.hpp"

namespace dacse {

// A flattened time-major audio stream: ids[f*L + l] carries the codebook-l
// token of frame f, so position p always holds a codebook-(p mod L) id.
struct TokenSequence {
    std::vector<uint32_t> ids;
    size_t n_frames = 0;
};

inline TokenSequence flatten(const TokenGrid& grid, const VocabLayout& layout) {
    layout.validate();
    if (grid.n_codebooks != layout.L)
        throw ConfigError("flatten: grid has " + std::to_string(grid.n_codebooks) +
                          " codebooks, vocab expects " + std::to_string(layout.L));
    TokenSequence seq;
    seq.n_frames = grid.n_frames;
    seq.ids.resize(grid.n_frames * static_cast<size_t>(layout.L));
    for (size_t f = 0; f < grid.n_frames; ++f) {
        for (int l = 0; l < layout.L; ++l) {
            const uint32_t code = grid.at(f, l);
            if (code >= static_cast<uint32_t>(layout.K))
                throw IndexError("flatten: code " + std::to_string(code) + " out of range for K=" +
                                 std::to_string(layout.K));
            seq.ids[f * layout.L + l] = layout.id_of(l, code);
        }
    }
    return seq;
}

// Inverse of flatten, with full validation: any special, out-of-vocab id, or
// id sitting in the wrong codebook slot means the stream did not come from a
// valid grid (e.g. an unconstrained LM emitted it) -> StreamCorruptionError.
inline TokenGrid unflatten(const std::vector<uint32_t>& ids, const VocabLayout& layout) {
    layout.validate();
    if (ids.size() % static_cast<size_t>(layout.L) != 0)
        throw StreamCorruptionError("unflatten: length " + std::to_string(ids.size()) +
                                    " not a multiple of L=" + std::to_string(layout.L));
    TokenGrid grid;
    grid.n_frames = ids.size() / layout.L;
    grid.n_codebooks = layout.L;
    grid.codes.resize(ids.size());
    for (size_t p = 0; p < ids.size(); ++p) {
        const uint32_t id = ids[p];
        if (id >= layout.base_size())
            throw StreamCorruptionError("unflatten: special or out-of-vocab id " +
                                        std::to_string(id) + " at position " + std::to_string(p));
        const int want_book = static_cast<int>(p % layout.L);
        if (layout.book_of(id) != want_book)
            throw StreamCorruptionError("unflatten: id " + std::to_string(id) + " at position " +
                                        std::to_string(p) + " belongs to codebook " +
                                        std::to_string(layout.book_of(id)) + ", slot expects " +
                                        std::to_string(want_book));
        grid.codes[p] = layout.code_of(id);
    }
    return grid;
}

inline TokenGrid unflatten(const TokenSequence& seq, const VocabLayout& layout) {
    return unflatten(seq.ids, layout);
}

// One serialized training record: [bos] noisy [start_clean] clean [eos].
// task_label routes Stage-2 fine-tuning; seed is the distortion-chain seed kept
// for provenance.
struct TrainingExample {
    std::vector<uint32_t> ids;
    uint8_t task_label = kTaskMixed;
    uint64_t seed = 0;

    // Frame count per side, from the exact length formula 2*n_frames*L + 3.
    size_t n_frames(const VocabLayout& layout) const {
        return (ids.size() - 3) / (2 * static_cast<size_t>(layout.L));
    }
    // Index of the first clean token; targets from here through eos carry loss.
    size_t clean_begin(const VocabLayout& layout) const {
        return 2 + n_frames(layout) * static_cast<size_t>(layout.L);
    }
};

inline TrainingExample build_example(const TokenGrid& noisy, const TokenGrid& clean,
                                     const VocabLayout& layout, size_t context_limit) {
    if (noisy.n_frames == 0 || clean.n_frames == 0)
        throw DegenerateError("build_example: zero-frame grid");
    if (noisy.n_frames != clean.n_frames)
        throw LengthError("build_example: noisy has " + std::to_string(noisy.n_frames) +
                          " frames, clean has " + std::to_string(clean.n_frames));
    const TokenSequence ns = flatten(noisy, layout);
    const TokenSequence cs = flatten(clean, layout);
    const size_t total = ns.ids.size() + cs.ids.size() + 3;
    if (total > context_limit)
        throw ContextOverflowError("build_example: sequence of " + std::to_string(total) +
                                   " tokens exceeds context " + std::to_string(context_limit));
    TrainingExample ex;
    ex.ids.reserve(total);
    ex.ids.push_back(layout.bos());
    ex.ids.insert(ex.ids.end(), ns.ids.begin(), ns.ids.end());
    ex.ids.push_back(layout.start_clean());
    ex.ids.insert(ex.ids.end(), cs.ids.begin(), cs.ids.end());
    ex.ids.push_back(layout.eos());
    return ex;
}

}  // namespace dacse
