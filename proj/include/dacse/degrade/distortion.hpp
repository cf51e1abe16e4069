#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dacse/common.hpp"
#include "dacse/rng.hpp"

namespace dacse {

enum class DistortionKind : uint8_t {
    white_noise = 0,
    noise = 1,
    reverb = 2,
    downsample = 3,
    packet_loss = 4,
};

inline const char* kind_name(DistortionKind k) {
    switch (k) {
        case DistortionKind::white_noise: return "white_noise";
        case DistortionKind::noise: return "noise";
        case DistortionKind::reverb: return "reverb";
        case DistortionKind::downsample: return "downsample";
        case DistortionKind::packet_loss: return "packet_loss";
    }
    return "?";
}

inline DistortionKind kind_from_name(const std::string& s) {
    if (s == "white_noise") return DistortionKind::white_noise;
    if (s == "noise") return DistortionKind::noise;
    if (s == "reverb") return DistortionKind::reverb;
    if (s == "downsample") return DistortionKind::downsample;
    if (s == "packet_loss") return DistortionKind::packet_loss;
    throw FormatError("unknown distortion kind: " + s);
}

// Distortion sampling table: inclusion probability and hyperparameter ranges
// per kind. Each kind is an independent Bernoulli draw.
struct DistortionTable {
    double p_white_noise = 0.3;
    double p_noise = 0.7;
    double p_reverb = 0.5;
    double p_downsample = 0.5;
    double p_packet_loss = 0.3;
    double white_snr_lo = 0.0, white_snr_hi = 25.0;
    double noise_snr_lo = -5.0, noise_snr_hi = 20.0;
    std::vector<int> downsample_rates{2000, 4000, 6000, 8000, 16000};
    double packet_ms_lo = 50.0, packet_ms_hi = 200.0;
    double p_drop_lo = 0.02, p_drop_hi = 0.2;
};

struct DistortionSpec {
    DistortionKind kind = DistortionKind::noise;
    double snr_db = 0.0;                       // noise kinds
    int target_sr_hz = 0;                      // downsample
    double packet_ms_lo = 50.0, packet_ms_hi = 200.0;  // packet loss
    double p_drop = 0.0;                       // packet loss
    std::string source_ref;                    // noise / RIR asset path

    void validate() const {
        switch (kind) {
            case DistortionKind::white_noise:
                if (snr_db < 0.0 || snr_db > 25.0) throw ConfigError("white_noise snr_db outside [0, 25]");
                break;
            case DistortionKind::noise:
                if (snr_db < -5.0 || snr_db > 20.0) throw ConfigError("noise snr_db outside [-5, 20]");
                break;
            case DistortionKind::downsample: {
                bool ok = target_sr_hz == 2000 || target_sr_hz == 4000 || target_sr_hz == 6000 ||
                          target_sr_hz == 8000 || target_sr_hz == 16000;
                if (!ok) throw ConfigError("downsample target_sr_hz not in {2,4,6,8,16} kHz");
                break;
            }
            case DistortionKind::packet_loss:
                if (p_drop < 0.02 || p_drop > 0.2) throw ConfigError("p_drop outside [0.02, 0.2]");
                if (packet_ms_lo < 50.0 || packet_ms_hi > 200.0 || packet_ms_lo > packet_ms_hi)
                    throw ConfigError("packet size range outside [50, 200] ms");
                break;
            case DistortionKind::reverb:
                break;
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["kind"] = kind_name(kind);
        switch (kind) {
            case DistortionKind::white_noise:
                j["snr_db"] = snr_db;
                break;
            case DistortionKind::noise:
                j["snr_db"] = snr_db;
                j["source_ref"] = source_ref;
                break;
            case DistortionKind::reverb:
                j["source_ref"] = source_ref;
                break;
            case DistortionKind::downsample:
                j["target_sr_hz"] = target_sr_hz;
                break;
            case DistortionKind::packet_loss:
                j["packet_ms"] = {packet_ms_lo, packet_ms_hi};
                j["p_drop"] = p_drop;
                break;
        }
        return j;
    }

    static DistortionSpec from_json(const nlohmann::json& j) {
        DistortionSpec s;
        s.kind = kind_from_name(j.at("kind").get<std::string>());
        switch (s.kind) {
            case DistortionKind::white_noise:
                s.snr_db = j.at("snr_db").get<double>();
                break;
            case DistortionKind::noise:
                s.snr_db = j.at("snr_db").get<double>();
                s.source_ref = j.at("source_ref").get<std::string>();
                break;
            case DistortionKind::reverb:
                s.source_ref = j.at("source_ref").get<std::string>();
                break;
            case DistortionKind::downsample:
                s.target_sr_hz = j.at("target_sr_hz").get<int>();
                break;
            case DistortionKind::packet_loss:
                s.packet_ms_lo = j.at("packet_ms").at(0).get<double>();
                s.packet_ms_hi = j.at("packet_ms").at(1).get<double>();
                s.p_drop = j.at("p_drop").get<double>();
                break;
        }
        s.validate();
        return s;
    }
};

// Ordered list of sampled distortions plus the seed that determines every
// random choice made while applying them. Specs are kept in the canonical
// application order: reverb, noise, white_noise, downsample, packet_loss.
struct DistortionChain {
    std::vector<DistortionSpec> specs;
    uint64_t seed = 0;

    void validate() const {
        if (specs.empty()) throw ConfigError("distortion chain is empty");
        for (const auto& s : specs) s.validate();
        for (size_t i = 1; i < specs.size(); ++i)
            if (static_cast<int>(canonical_rank(specs[i - 1].kind)) > static_cast<int>(canonical_rank(specs[i].kind)))
                throw ConfigError("distortion chain out of canonical order");
    }

    static int canonical_rank(DistortionKind k) {
        switch (k) {
            case DistortionKind::reverb: return 0;
            case DistortionKind::noise: return 1;
            case DistortionKind::white_noise: return 2;
            case DistortionKind::downsample: return 3;
            case DistortionKind::packet_loss: return 4;
        }
        return 5;
    }

    // Single kind present, or none (mixed).
    std::optional<DistortionKind> single_kind() const {
        if (specs.size() == 1) return specs[0].kind;
        return std::nullopt;
    }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& s : specs) arr.push_back(s.to_json());
        return arr;
    }

    static DistortionChain from_json(const nlohmann::json& arr, uint64_t seed) {
        DistortionChain c;
        c.seed = seed;
        for (const auto& j : arr) c.specs.push_back(DistortionSpec::from_json(j));
        c.validate();
        return c;
    }
};

}  // namespace dacse
