#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dacse/audio/resample.hpp"
#include "dacse/audio/waveform.hpp"
#include "dacse/codec/rvq.hpp"
#include "dacse/codec/transform.hpp"
#include "dacse/common.hpp"
#include "dacse/lm/checkpoint.hpp"
#include "dacse/lm/generate.hpp"
#include "dacse/lm/model.hpp"
#include "dacse/sha256.hpp"
#include "dacse/token/flatten.hpp"
#include "dacse/token/vocab.hpp"

namespace dacse {

// End-to-end inference: waveform -> noisy tokens -> constrained generation ->
// clean tokens -> waveform. Long inputs are split at frame-aligned boundaries
// and each chunk runs through the model independently (no overlap, no
// cross-fade); outputs are concatenated sample-exact, so chunked processing of
// a signal equals independent processing of its pieces.

struct EnhanceOptions {
    DecodePolicy policy;            // greedy unless temperature > 0
    std::optional<double> chunk_s;  // segmentation length; absent = single chunk
};

struct ChunkReport {
    size_t sample_begin = 0;
    size_t n_samples = 0;
    size_t n_frames = 0;
    size_t tokens_emitted = 0;  // model-emitted tokens, eos included
    bool hit_eos = false;
    size_t eos_position = 0;   // clean-stream index where eos fired (valid iff hit_eos)
    size_t frames_filled = 0;  // zero-code frames appended after an early eos
};

struct GenerationReport {
    size_t input_samples = 0;
    size_t output_samples = 0;
    int sample_rate_hz = 0;
    std::vector<ChunkReport> chunks;

    size_t total_tokens() const {
        size_t n = 0;
        for (const auto& c : chunks) n += c.tokens_emitted;
        return n;
    }

    bool early_stop() const {
        for (const auto& c : chunks)
            if (c.frames_filled > 0) return true;
        return false;
    }

    nlohmann::json to_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& c : chunks) {
            nlohmann::json row{{"sample_begin", c.sample_begin}, {"samples", c.n_samples},
                               {"frames", c.n_frames},           {"tokens", c.tokens_emitted},
                               {"eos", c.hit_eos},               {"filled_frames", c.frames_filled}};
            if (c.hit_eos)
                row["eos_position"] = c.eos_position;
            else
                row["eos_position"] = nullptr;
            rows.push_back(std::move(row));
        }
        return nlohmann::json{{"input_samples", input_samples},
                              {"output_samples", output_samples},
                              {"sample_rate_hz", sample_rate_hz},
                              {"tokens", total_tokens()},
                              {"early_stop", early_stop()},
                              {"chunks", std::move(rows)}};
    }
};

namespace enhance_detail {

// Frame-aligned chunk spans. A tail shorter than one frame is merged into the
// preceding chunk so every span is analyzable on its own.
inline std::vector<std::pair<size_t, size_t>> chunk_spans(size_t n_samples, size_t chunk_samples,
                                                          size_t frame_len) {
    std::vector<std::pair<size_t, size_t>> spans;
    size_t pos = 0;
    while (pos < n_samples) {
        size_t len = std::min(chunk_samples, n_samples - pos);
        const size_t rest = n_samples - pos - len;
        if (rest > 0 && rest < frame_len) len += rest;
        spans.emplace_back(pos, len);
        pos += len;
    }
    return spans;
}

}  // namespace enhance_detail

// Core enhancement over already-loaded components. Resamples to the codec
// rate if needed; the output length always equals the (resampled) input
// length exactly, which is stronger than the one-hop duration bound.
template <typename T>
std::pair<Waveform, GenerationReport> enhance_waveform(const Model<T>& model,
                                                       const VocabLayout& layout,
                                                       const FrameTransform& transform,
                                                       const RvqCodebooks& books,
                                                       const CodecConfig& ccfg,
                                                       const Waveform& input,
                                                       const EnhanceOptions& opt = {}) {
    layout.validate();
    Waveform in = input;
    in.validate();
    if (in.sample_rate_hz != ccfg.sample_rate_hz) in = resample(in, ccfg.sample_rate_hz);

    const size_t hop = static_cast<size_t>(ccfg.hop);
    const size_t frame_len = static_cast<size_t>(ccfg.frame_len);
    const size_t L = static_cast<size_t>(layout.L);

    size_t chunk_samples = in.samples.size();
    if (opt.chunk_s) {
        if (!(*opt.chunk_s > 0.0)) throw ConfigError("enhance: chunk_s must be positive");
        const auto want = static_cast<size_t>(std::llround(*opt.chunk_s * ccfg.sample_rate_hz));
        chunk_samples = want / hop * hop;  // frame-aligned boundaries only
        if (chunk_samples < frame_len)
            throw ConfigError("enhance: chunk_s shorter than one analysis frame");
    }

    const auto spans = enhance_detail::chunk_spans(in.samples.size(), chunk_samples, frame_len);

    GenerationReport report;
    report.input_samples = in.samples.size();
    report.sample_rate_hz = in.sample_rate_hz;

    Waveform out;
    out.sample_rate_hz = in.sample_rate_hz;
    out.samples.reserve(in.samples.size());

    for (const auto& [begin, len] : spans) {
        Waveform piece;
        piece.sample_rate_hz = in.sample_rate_hz;
        piece.samples.assign(in.samples.begin() + static_cast<ptrdiff_t>(begin),
                             in.samples.begin() + static_cast<ptrdiff_t>(begin + len));

        const FrameMatrix fm = transform.analyze(piece);
        const TokenGrid grid = rvq_encode(fm, books);
        const TokenSequence noisy = flatten(grid, layout);

        // [bos] noisy [start_clean] + cap_tokens + eos must fit the context;
        // report overflow as a configuration problem (chunk too long), not as
        // a data problem.
        const size_t need = 2 * grid.n_frames * L + 3;
        if (need > static_cast<size_t>(model.config().context_len))
            throw ConfigError("enhance: chunk of " + std::to_string(grid.n_frames) +
                              " frames needs " + std::to_string(need) + " tokens but context is " +
                              std::to_string(model.config().context_len) +
                              "; pass a smaller chunk_s");

        std::vector<uint32_t> prefix;
        prefix.reserve(noisy.ids.size() + 2);
        prefix.push_back(layout.bos());
        prefix.insert(prefix.end(), noisy.ids.begin(), noisy.ids.end());
        prefix.push_back(layout.start_clean());

        const GenerateResult gen = generate(model, prefix, layout, opt.policy);

        // eos is only admissible at frame boundaries, so a truncated stream is
        // always whole frames short; pad with code zero (the decoder's fixed
        // silence direction) up to the noisy frame count.
        std::vector<uint32_t> clean_ids = gen.clean_ids;
        const size_t want_ids = grid.n_frames * L;
        const size_t missing = want_ids - clean_ids.size();
        for (size_t i = clean_ids.size(); i < want_ids; ++i)
            clean_ids.push_back(layout.id_of(static_cast<int>(i % L), 0));

        TokenGrid clean_grid = unflatten(clean_ids, layout);
        const FrameMatrix dec = rvq_decode(clean_grid, books);
        const Waveform piece_out = transform.synthesize(dec, piece.samples.size());
        out.samples.insert(out.samples.end(), piece_out.samples.begin(), piece_out.samples.end());

        ChunkReport cr;
        cr.sample_begin = begin;
        cr.n_samples = len;
        cr.n_frames = grid.n_frames;
        cr.tokens_emitted = gen.n_steps;
        cr.hit_eos = gen.hit_eos;
        if (gen.hit_eos) cr.eos_position = gen.clean_ids.size();
        cr.frames_filled = missing / L;
        report.chunks.push_back(cr);
    }

    report.output_samples = out.samples.size();
    return {std::move(out), std::move(report)};
}

// Loads a checkpoint plus the codec it was trained against and exposes a
// reusable enhancement entry point. The checkpoint records the codec
// fingerprint at tokenization time; a different codec file is refused rather
// than silently decoding garbage.
class Enhancer {
public:
    static Enhancer load(const std::filesystem::path& ckpt_path,
                         const std::filesystem::path& codec_path) {
        auto ck = load_checkpoint<float>(ckpt_path.string());
        RvqCodebooks books = load_codebooks(codec_path.string());
        if (ck.meta.codec_fingerprint_hex != hex(books.fingerprint))
            throw ConfigError("enhance: checkpoint was trained against codec " +
                              ck.meta.codec_fingerprint_hex + " but " + codec_path.string() +
                              " has fingerprint " + hex(books.fingerprint));
        if (ck.meta.L != books.n_codebooks || ck.meta.K != books.codebook_size)
            throw ConfigError("enhance: checkpoint vocab geometry does not match codec");

        const CodecConfig ccfg = config_from_books(books);
        return Enhancer(std::move(ck.weights), ck.meta, std::move(books), ccfg);
    }

    std::pair<Waveform, GenerationReport> run(const Waveform& input,
                                              const EnhanceOptions& opt = {}) const {
        return enhance_waveform(model_, layout_, transform_, books_, ccfg_, input, opt);
    }

    const CheckpointMeta& meta() const { return meta_; }
    const CodecConfig& codec_config() const { return ccfg_; }
    const Model<float>& model() const { return model_; }
    const VocabLayout& layout() const { return layout_; }

private:
    Enhancer(Weights<float> w, CheckpointMeta meta, RvqCodebooks books, const CodecConfig& ccfg)
        : meta_(std::move(meta)),
          books_(std::move(books)),
          ccfg_(ccfg),
          transform_(ccfg),
          layout_{meta_.L, meta_.K},
          model_(std::move(w)) {
        if (static_cast<uint32_t>(model_.config().vocab_size) != layout_.vocab_size())
            throw ConfigError("enhance: checkpoint vocab does not match its own L/K header");
    }

    CheckpointMeta meta_;
    RvqCodebooks books_;
    CodecConfig ccfg_;
    FrameTransform transform_;
    VocabLayout layout_;
    Model<float> model_;
};

}  // namespace dacse
