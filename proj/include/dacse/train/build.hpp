#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dacse/audio/resample.hpp"
#include "dacse/audio/wav_io.hpp"
#include "dacse/codec/rvq.hpp"
#include "dacse/codec/transform.hpp"
#include "dacse/degrade/apply.hpp"
#include "dacse/degrade/sample.hpp"
#include "dacse/sha256.hpp"
#include "dacse/threading.hpp"
#include "dacse/token/dataset.hpp"
#include "dacse/token/flatten.hpp"

namespace dacse {

struct BuildConfig {
    double clip_seconds_cap = kMaxClipSeconds;
    size_t context_limit = 2048;  // clips whose pair sequence overflows are skipped
    int val_byte_threshold = 5;   // fingerprint[0] < this => held-out (~2%)
    DistortionTable table;
};

// Paths plus provenance for one dataset build. Datasets are stored relative to
// the catalog file so the whole directory can be moved.
struct DatasetCatalog {
    std::filesystem::path root;
    std::string codec_fingerprint_hex;
    int L = 0;
    int K = 0;
    double frame_rate_hz = 0.0;

    std::string stage1_train, stage1_val;                 // relative paths
    std::array<std::string, 5> stage2_train, stage2_val;  // indexed by DistortionKind
    std::vector<std::string> fingerprints;                // deduped clean clips, hex

    uint64_t clips_scanned = 0, duplicates = 0, skipped_short = 0, skipped_overflow = 0;
    uint64_t train_records = 0, val_records = 0;

    std::filesystem::path resolve(const std::string& rel) const { return root / rel; }

    void save(const std::filesystem::path& path) const {
        nlohmann::json j;
        j["version"] = 1;
        j["codec_fingerprint"] = codec_fingerprint_hex;
        j["vocab"] = {{"L", L}, {"K", K}};
        j["frame_rate_hz"] = frame_rate_hz;
        j["stage1"] = {{"train", stage1_train}, {"val", stage1_val}};
        nlohmann::json s2;
        for (int k = 0; k < 5; ++k)
            s2[kind_name(static_cast<DistortionKind>(k))] = {{"train", stage2_train[k]},
                                                             {"val", stage2_val[k]}};
        j["stage2"] = s2;
        j["fingerprints"] = fingerprints;
        j["counts"] = {{"clips_scanned", clips_scanned},   {"duplicates", duplicates},
                       {"skipped_short", skipped_short},   {"skipped_overflow", skipped_overflow},
                       {"train_records", train_records},   {"val_records", val_records}};
        io::AtomicFile f(path);
        const std::string text = j.dump(2) + "\n";
        io::write_bytes(f.stream(), text.data(), text.size());
        f.commit();
    }

    static DatasetCatalog load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open catalog: " + path.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("catalog " + path.string() + ": " + e.what());
        }
        DatasetCatalog cat;
        try {
            cat.root = path.parent_path();
            cat.codec_fingerprint_hex = j.at("codec_fingerprint").get<std::string>();
            cat.L = j.at("vocab").at("L").get<int>();
            cat.K = j.at("vocab").at("K").get<int>();
            cat.frame_rate_hz = j.at("frame_rate_hz").get<double>();
            cat.stage1_train = j.at("stage1").at("train").get<std::string>();
            cat.stage1_val = j.at("stage1").at("val").get<std::string>();
            for (int k = 0; k < 5; ++k) {
                const auto& e = j.at("stage2").at(kind_name(static_cast<DistortionKind>(k)));
                cat.stage2_train[k] = e.at("train").get<std::string>();
                cat.stage2_val[k] = e.at("val").get<std::string>();
            }
            cat.fingerprints = j.at("fingerprints").get<std::vector<std::string>>();
            const auto& c = j.at("counts");
            cat.clips_scanned = c.at("clips_scanned").get<uint64_t>();
            cat.duplicates = c.at("duplicates").get<uint64_t>();
            cat.skipped_short = c.at("skipped_short").get<uint64_t>();
            cat.skipped_overflow = c.at("skipped_overflow").get<uint64_t>();
            cat.train_records = c.at("train_records").get<uint64_t>();
            cat.val_records = c.at("val_records").get<uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("catalog " + path.string() + ": " + e.what());
        }
        return cat;
    }
};

// Loads one or more asset manifests into a single catalog; duplicate refs
// across manifests are an error rather than a silent shadow.
inline AssetCatalog load_asset_manifests(const std::vector<std::filesystem::path>& manifests) {
    if (manifests.empty()) throw AssetError("no asset manifests given");
    AssetCatalog merged = AssetCatalog::load(manifests[0]);
    for (size_t m = 1; m < manifests.size(); ++m) {
        const AssetCatalog more = AssetCatalog::load(manifests[m]);
        for (size_t i = 0; i < more.noise_count(); ++i) {
            const std::string& ref = more.noise_entry(i).path;
            for (size_t j = 0; j < merged.noise_count(); ++j)
                if (merged.noise_entry(j).path == ref)
                    throw AssetError("duplicate noise ref across manifests: " + ref);
            merged.add_noise(ref, more.noise_by_ref(ref));
        }
        for (size_t i = 0; i < more.rir_count(); ++i) {
            const std::string& ref = more.rir_entry(i).path;
            for (size_t j = 0; j < merged.rir_count(); ++j)
                if (merged.rir_entry(j).path == ref)
                    throw AssetError("duplicate RIR ref across manifests: " + ref);
            merged.add_rir(ref, more.rir_by_ref(ref));
        }
    }
    return merged;
}

namespace build_detail {

inline Digest256 pcm16_fingerprint(const Waveform& w) {
    Sha256 h;
    for (double s : w.samples) {
        const double c = std::clamp(s, -1.0, 1.0);
        const int16_t q = static_cast<int16_t>(std::lround(c * 32767.0));
        const uint16_t u = static_cast<uint16_t>(q);
        const uint8_t bytes[2] = {static_cast<uint8_t>(u & 0xff), static_cast<uint8_t>(u >> 8)};
        h.update(bytes, 2);
    }
    return h.finish();
}

inline uint64_t fingerprint_u64(const Digest256& fp) {
    uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<uint64_t>(fp[i]) << (8 * i);
    return x;
}

struct ClipResult {
    bool too_short = false;
    bool overflow = false;
    Digest256 fingerprint{};
    TrainingExample stage1;
    std::array<TrainingExample, 5> per_task;
};

}  // namespace build_detail

// Builds the Stage-1 mixed dataset plus one single-distortion dataset per
// kind, writing train/val splits of each under out_dir along with
// catalog.json. One record per unique clean clip per dataset; records derive
// their seeds from the clip fingerprint, so the output bytes depend only on
// (directory contents, codec, seed), not on listing order or worker count.
inline DatasetCatalog build_datasets(const std::filesystem::path& clean_dir,
                                     const AssetCatalog& assets, const RvqCodebooks& books,
                                     const CodecConfig& ccfg, const VocabLayout& layout,
                                     const std::filesystem::path& out_dir, uint64_t seed,
                                     const BuildConfig& bcfg = {}) {
    using build_detail::ClipResult;

    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(clean_dir))
        for (const auto& e : std::filesystem::directory_iterator(clean_dir))
            if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw DataError("no .wav clips found in " + clean_dir.string());

    const FrameTransform transform(ccfg);
    std::vector<ClipResult> results(files.size());

    parallel_for(files.size(), [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            ClipResult& r = results[i];
            Waveform clean = read_wav(files[i]);
            if (clean.sample_rate_hz != ccfg.sample_rate_hz)
                clean = resample(clean, ccfg.sample_rate_hz);
            clean.truncate_to_seconds(bcfg.clip_seconds_cap);
            if (clean.samples.size() < static_cast<size_t>(ccfg.frame_len)) {
                r.too_short = true;
                continue;
            }
            r.fingerprint = build_detail::pcm16_fingerprint(clean);
            const uint64_t clip_key = build_detail::fingerprint_u64(r.fingerprint);

            const TokenGrid clean_grid = rvq_encode(transform.analyze(clean), books);

            try {
                // Stage 1: one full-table chain.
                const uint64_t s1_seed = derive_seed(derive_seed(seed, 0x5731), clip_key);
                const DistortionChain chain = sample_chain(s1_seed, assets, bcfg.table);
                const auto [noisy, dry] = apply_chain(clean, chain, assets);
                const TokenGrid noisy_grid = rvq_encode(transform.analyze(noisy), books);
                r.stage1 = build_example(noisy_grid, clean_grid, layout, bcfg.context_limit);
                r.stage1.task_label = chain.specs.size() == 1
                                          ? static_cast<uint8_t>(chain.specs[0].kind)
                                          : kTaskMixed;
                r.stage1.seed = s1_seed;

                // Stage 2: one single-kind chain per distortion.
                for (int k = 0; k < 5; ++k) {
                    const auto kind = static_cast<DistortionKind>(k);
                    const uint64_t s2_seed =
                        derive_seed(derive_seed(seed, 0x5732 + static_cast<uint64_t>(k)), clip_key);
                    const DistortionChain ch = sample_single_kind_chain(s2_seed, kind, assets,
                                                                        bcfg.table);
                    const auto [noisy_k, dry_k] = apply_chain(clean, ch, assets);
                    const TokenGrid grid_k = rvq_encode(transform.analyze(noisy_k), books);
                    r.per_task[k] = build_example(grid_k, clean_grid, layout, bcfg.context_limit);
                    r.per_task[k].task_label = static_cast<uint8_t>(k);
                    r.per_task[k].seed = s2_seed;
                }
            } catch (const ContextOverflowError&) {
                r.overflow = true;
            }
        }
    });

    // Sequential pass: dedup, split, write. Order is the sorted file order, so
    // output bytes are independent of --jobs.
    std::filesystem::create_directories(out_dir);
    DatasetCatalog cat;
    cat.root = out_dir;
    cat.codec_fingerprint_hex = hex(books.fingerprint);
    cat.L = layout.L;
    cat.K = layout.K;
    cat.frame_rate_hz = ccfg.frame_rate_hz();
    cat.clips_scanned = files.size();
    cat.stage1_train = "stage1.train.dse1";
    cat.stage1_val = "stage1.val.dse1";
    for (int k = 0; k < 5; ++k) {
        const std::string base = std::string("stage2.") + kind_name(static_cast<DistortionKind>(k));
        cat.stage2_train[k] = base + ".train.dse1";
        cat.stage2_val[k] = base + ".val.dse1";
    }

    std::vector<size_t> survivors;
    std::vector<std::string> seen;
    for (size_t i = 0; i < results.size(); ++i) {
        const ClipResult& r = results[i];
        if (r.too_short) {
            ++cat.skipped_short;
            continue;
        }
        if (r.overflow) {
            ++cat.skipped_overflow;
            continue;
        }
        const std::string fp_hex = hex(r.fingerprint);
        if (std::find(seen.begin(), seen.end(), fp_hex) != seen.end()) {
            ++cat.duplicates;
            continue;
        }
        seen.push_back(fp_hex);
        survivors.push_back(i);
    }
    if (survivors.empty()) throw DataError("no usable clips after dedup and skips");

    std::vector<bool> is_val(survivors.size(), false);
    size_t n_val = 0;
    for (size_t s = 0; s < survivors.size(); ++s) {
        is_val[s] = results[survivors[s]].fingerprint[0] < bcfg.val_byte_threshold;
        n_val += is_val[s];
    }
    // A tiny corpus can miss the ~2% bucket entirely; promote the smallest
    // fingerprint so held-out evaluation is always defined.
    if (n_val == 0 && survivors.size() >= 2) {
        size_t best = 0;
        for (size_t s = 1; s < survivors.size(); ++s)
            if (hex(results[survivors[s]].fingerprint) <
                hex(results[survivors[best]].fingerprint))
                best = s;
        is_val[best] = true;
    }

    const double rate = ccfg.frame_rate_hz();
    DatasetWriter s1_train((out_dir / cat.stage1_train).string(), layout, rate);
    DatasetWriter s1_val((out_dir / cat.stage1_val).string(), layout, rate);
    std::vector<std::unique_ptr<DatasetWriter>> s2_train, s2_val;
    for (int k = 0; k < 5; ++k) {
        s2_train.push_back(
            std::make_unique<DatasetWriter>((out_dir / cat.stage2_train[k]).string(), layout, rate));
        s2_val.push_back(
            std::make_unique<DatasetWriter>((out_dir / cat.stage2_val[k]).string(), layout, rate));
    }

    for (size_t s = 0; s < survivors.size(); ++s) {
        const ClipResult& r = results[survivors[s]];
        cat.fingerprints.push_back(hex(r.fingerprint));
        (is_val[s] ? s1_val : s1_train).append(r.stage1);
        for (int k = 0; k < 5; ++k) (is_val[s] ? *s2_val[k] : *s2_train[k]).append(r.per_task[k]);
        if (is_val[s]) ++cat.val_records;
        else ++cat.train_records;
    }
    s1_train.commit();
    s1_val.commit();
    for (int k = 0; k < 5; ++k) {
        s2_train[k]->commit();
        s2_val[k]->commit();
    }
    cat.save(out_dir / "catalog.json");
    return cat;
}

}  // namespace dacse
