#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dacse/audio/wav_io.hpp"
#include "dacse/audio/waveform.hpp"
#include "dacse/common.hpp"

namespace dacse {

struct AssetEntry {
    std::string path;
    std::string kind;  // "noise" | "rir"
    double duration_s = 0.0;
};

// Noise and RIR catalogs, loaded from a JSON-lines manifest with records
// {"path": str, "kind": "noise"|"rir", "duration_s": float}. Relative paths
// resolve against the manifest's directory. Audio is preloaded so chain
// application stays pure and thread-safe.
class AssetCatalog {
public:
    AssetCatalog() = default;

    static AssetCatalog load(const std::filesystem::path& manifest_path) {
        std::ifstream in(manifest_path);
        if (!in) throw IoError("cannot open asset manifest: " + manifest_path.string());
        AssetCatalog cat;
        const auto base = manifest_path.parent_path();
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw FormatError("asset manifest line " + std::to_string(line_no) + ": " + e.what());
            }
            AssetEntry entry;
            entry.path = j.at("path").get<std::string>();
            entry.kind = j.at("kind").get<std::string>();
            entry.duration_s = j.value("duration_s", 0.0);
            std::filesystem::path p = entry.path;
            if (p.is_relative()) p = base / p;
            if (entry.kind == "noise") {
                cat.noise_entries_.push_back(entry);
                cat.noise_waves_.push_back(read_wav(p));
            } else if (entry.kind == "rir") {
                cat.rir_entries_.push_back(entry);
                Waveform w = read_wav(p);
                cat.rir_kernels_.push_back(RirKernel{std::move(w.samples), w.sample_rate_hz});
            } else {
                throw FormatError("asset manifest line " + std::to_string(line_no) + ": unknown kind '" + entry.kind + "'");
            }
        }
        return cat;
    }

    size_t noise_count() const { return noise_entries_.size(); }
    size_t rir_count() const { return rir_entries_.size(); }

    const AssetEntry& noise_entry(size_t i) const { return noise_entries_.at(i); }
    const AssetEntry& rir_entry(size_t i) const { return rir_entries_.at(i); }

    const Waveform& noise_by_ref(const std::string& ref) const {
        for (size_t i = 0; i < noise_entries_.size(); ++i)
            if (noise_entries_[i].path == ref) return noise_waves_[i];
        throw AssetError("noise asset not in catalog: " + ref);
    }

    const RirKernel& rir_by_ref(const std::string& ref) const {
        for (size_t i = 0; i < rir_entries_.size(); ++i)
            if (rir_entries_[i].path == ref) return rir_kernels_[i];
        throw AssetError("RIR asset not in catalog: " + ref);
    }

    // In-memory construction for tests and synthetic corpora.
    void add_noise(std::string ref, Waveform w) {
        noise_entries_.push_back(AssetEntry{std::move(ref), "noise", w.duration_s()});
        noise_waves_.push_back(std::move(w));
    }
    void add_rir(std::string ref, RirKernel k) {
        double dur = static_cast<double>(k.taps.size()) / k.sample_rate_hz;
        rir_entries_.push_back(AssetEntry{std::move(ref), "rir", dur});
        rir_kernels_.push_back(std::move(k));
    }

private:
    std::vector<AssetEntry> noise_entries_;
    std::vector<Waveform> noise_waves_;
    std::vector<AssetEntry> rir_entries_;
    std::vector<RirKernel> rir_kernels_;
};

}  // namespace dacse
