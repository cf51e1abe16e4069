#pragma once

#include <optional>

#include "dacse/degrade/assets.hpp"
#include "dacse/degrade/distortion.hpp"
#include "dacse/rng.hpp"

namespace dacse {

// One unconditioned pass over the distortion table: an independent Bernoulli
// draw per row (table order), hyperparameters uniform from the row ranges.
// Returns an empty spec list when no distortion was drawn; sample_chain
// rejects and redraws in that case. Statistics tests measure inclusion rates
// on this function so the rates are not skewed by the rejection.
inline std::vector<DistortionSpec> draw_chain_once(Rng& rng, const AssetCatalog& assets,
                                                   const DistortionTable& table = {}) {
    const bool want_white = rng.bernoulli(table.p_white_noise);
    const bool want_noise = rng.bernoulli(table.p_noise);
    const bool want_reverb = rng.bernoulli(table.p_reverb);
    const bool want_down = rng.bernoulli(table.p_downsample);
    const bool want_packet = rng.bernoulli(table.p_packet_loss);

    std::vector<DistortionSpec> specs;  // assembled in canonical application order
    if (want_reverb) {
        if (assets.rir_count() == 0) throw AssetError("reverb drawn but RIR catalog is empty");
        DistortionSpec s;
        s.kind = DistortionKind::reverb;
        s.source_ref = assets.rir_entry(rng.uniform_int(assets.rir_count())).path;
        specs.push_back(s);
    }
    if (want_noise) {
        if (assets.noise_count() == 0) throw AssetError("noise drawn but noise catalog is empty");
        DistortionSpec s;
        s.kind = DistortionKind::noise;
        s.snr_db = rng.uniform(table.noise_snr_lo, table.noise_snr_hi);
        s.source_ref = assets.noise_entry(rng.uniform_int(assets.noise_count())).path;
        specs.push_back(s);
    }
    if (want_white) {
        DistortionSpec s;
        s.kind = DistortionKind::white_noise;
        s.snr_db = rng.uniform(table.white_snr_lo, table.white_snr_hi);
        specs.push_back(s);
    }
    if (want_down) {
        DistortionSpec s;
        s.kind = DistortionKind::downsample;
        s.target_sr_hz = table.downsample_rates[rng.uniform_int(table.downsample_rates.size())];
        specs.push_back(s);
    }
    if (want_packet) {
        DistortionSpec s;
        s.kind = DistortionKind::packet_loss;
        s.packet_ms_lo = table.packet_ms_lo;
        s.packet_ms_hi = table.packet_ms_hi;
        s.p_drop = rng.uniform(table.p_drop_lo, table.p_drop_hi);
        specs.push_back(s);
    }
    return specs;
}

// Samples a non-empty distortion chain. Rejection resampling enforces at
// least one distortion; deterministic given the seed.
inline DistortionChain sample_chain(uint64_t rng_seed, const AssetCatalog& assets,
                                    const DistortionTable& table = {}) {
    Rng rng(rng_seed);
    DistortionChain chain;
    chain.seed = rng_seed;
    do {
        chain.specs = draw_chain_once(rng, assets, table);
    } while (chain.specs.empty());
    chain.validate();
    return chain;
}

// Single-kind chain used for per-task fine-tuning datasets.
inline DistortionChain sample_single_kind_chain(uint64_t rng_seed, DistortionKind kind,
                                                const AssetCatalog& assets,
                                                const DistortionTable& table = {}) {
    Rng rng(rng_seed);
    DistortionChain chain;
    chain.seed = rng_seed;
    DistortionSpec s;
    s.kind = kind;
    switch (kind) {
        case DistortionKind::white_noise:
            s.snr_db = rng.uniform(table.white_snr_lo, table.white_snr_hi);
            break;
        case DistortionKind::noise:
            if (assets.noise_count() == 0) throw AssetError("noise catalog is empty");
            s.snr_db = rng.uniform(table.noise_snr_lo, table.noise_snr_hi);
            s.source_ref = assets.noise_entry(rng.uniform_int(assets.noise_count())).path;
            break;
        case DistortionKind::reverb:
            if (assets.rir_count() == 0) throw AssetError("RIR catalog is empty");
            s.source_ref = assets.rir_entry(rng.uniform_int(assets.rir_count())).path;
            break;
        case DistortionKind::downsample:
            s.target_sr_hz = table.downsample_rates[rng.uniform_int(table.downsample_rates.size())];
            break;
        case DistortionKind::packet_loss:
            s.packet_ms_lo = table.packet_ms_lo;
            s.packet_ms_hi = table.packet_ms_hi;
            s.p_drop = rng.uniform(table.p_drop_lo, table.p_drop_hi);
            break;
    }
    chain.specs.push_back(s);
    chain.validate();
    return chain;
}

}  // namespace dacse
