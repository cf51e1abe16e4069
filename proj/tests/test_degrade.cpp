// Distortion sampler and application: inclusion-rate statistics, exact SNR
// mixing, packet-loss drop rates, chain serialization, and determinism.

#include <catch2/catch_amalgamated.hpp>

#include "dacse/degrade/apply.hpp"
#include "dacse/degrade/assets.hpp"
#include "dacse/degrade/distortion.hpp"
#include "dacse/degrade/sample.hpp"
#include "dacse/synth/speechgen.hpp"

#include "testutil.hpp"

using namespace dacse;
using testutil::ScratchDir;

namespace {

AssetCatalog demo_assets() {
    AssetCatalog cat;
    for (int i = 0; i < 3; ++i)
        cat.add_noise("n" + std::to_string(i),
                      synth_noise_clip(derive_seed(1000, i), 2.0, NoiseKind::broadband));
    for (int i = 0; i < 2; ++i)
        cat.add_rir("r" + std::to_string(i), synth_rir(derive_seed(2000, i)));
    return cat;
}

}  // namespace

TEST_CASE("chain sampler hits configured inclusion rates") {
    const AssetCatalog assets = demo_assets();
    const DistortionTable table;  // 0.3 / 0.7 / 0.5 / 0.5 / 0.3
    const int n = 100000;

    // draw_chain_once exposes the pre-rejection draw, so inclusion of each
    // kind is an unconditioned Bernoulli at exactly the table rates.
    Rng rng(31337);
    std::array<int, 5> hits{};
    for (int i = 0; i < n; ++i)
        for (const auto& s : draw_chain_once(rng, assets, table)) ++hits[static_cast<int>(s.kind)];

    const std::array<double, 5> expect = {table.p_white_noise, table.p_noise, table.p_reverb,
                                          table.p_downsample, table.p_packet_loss};
    for (int k = 0; k < 5; ++k) {
        const double rate = static_cast<double>(hits[k]) / n;
        INFO("kind " << kind_name(static_cast<DistortionKind>(k)) << " rate " << rate
                     << " expect " << expect[k]);
        REQUIRE(std::abs(rate - expect[k]) < 0.01);
    }

    // The public sampler rejects empty draws, so chains are never empty.
    for (int i = 0; i < 2000; ++i)
        REQUIRE(!sample_chain(derive_seed(31337, i), assets, table).specs.empty());
}

TEST_CASE("sampled chains are canonically ordered and validate") {
    const AssetCatalog assets = demo_assets();
    for (int i = 0; i < 500; ++i) {
        const DistortionChain chain = sample_chain(derive_seed(555, i), assets, {});
        REQUIRE_NOTHROW(chain.validate());
        REQUIRE(chain.seed == derive_seed(555, i));
    }
}

TEST_CASE("noise mixing hits the requested snr within 0.01 dB") {
    Rng rng(2024);
    const Waveform clean = synth_speech_clip(9, {0.5});
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
        const double target = rng.uniform(-5.0, 25.0);
        const Waveform noise = synth_noise_clip(derive_seed(77, i), 1.0,
                                                i % 2 ? NoiseKind::broadband : NoiseKind::hum);
        const Waveform noisy = apply_noise(clean, noise, target);
        // Reconstruct the additive noise and measure the realized SNR.
        double sig = 0.0, err = 0.0;
        for (size_t s = 0; s < clean.samples.size(); ++s) {
            const double d = noisy.samples[s] - clean.samples[s];
            sig += clean.samples[s] * clean.samples[s];
            err += d * d;
        }
        const double realized = 10.0 * std::log10(sig / err);
        REQUIRE(std::abs(realized - target) < 0.01);
        ++checked;
    }
    REQUIRE(checked == 1000);
}

TEST_CASE("white noise mixing matches the target snr") {
    const Waveform clean = synth_speech_clip(10, {0.5});
    for (int i = 0; i < 100; ++i) {
        const double target = -5.0 + 0.3 * i;
        const Waveform noisy = apply_white_noise(clean, target, derive_seed(88, i));
        double sig = 0.0, err = 0.0;
        for (size_t s = 0; s < clean.samples.size(); ++s) {
            const double d = noisy.samples[s] - clean.samples[s];
            sig += clean.samples[s] * clean.samples[s];
            err += d * d;
        }
        REQUIRE(std::abs(10.0 * std::log10(sig / err) - target) < 0.01);
    }
}

TEST_CASE("packet loss drops the configured fraction of packets") {
    // 1e4 packets at p_drop 0.1: the realized drop fraction concentrates
    // within +-0.01 (sigma = sqrt(p(1-p)/n) = 0.003).
    const double p_drop = 0.1;
    const double packet_ms = 50.0;
    const double seconds = 10000 * packet_ms / 1000.0;
    Waveform w;
    w.sample_rate_hz = 8000;  // keep the buffer small; rate is irrelevant here
    w.samples.assign(static_cast<size_t>(seconds * w.sample_rate_hz), 1.0);

    const Waveform out = apply_packet_loss(w, packet_ms, packet_ms, p_drop, 4242);
    REQUIRE(out.samples.size() == w.samples.size());
    size_t zeroed = 0;
    for (double s : out.samples)
        if (s == 0.0) ++zeroed;
    const double frac = static_cast<double>(zeroed) / static_cast<double>(out.samples.size());
    REQUIRE(std::abs(frac - p_drop) < 0.01);

    SECTION("dropped spans align to packet boundaries") {
        const size_t packet = static_cast<size_t>(packet_ms / 1000.0 * w.sample_rate_hz);
        for (size_t i = 0; i + packet <= out.samples.size(); i += packet) {
            const bool first_zero = out.samples[i] == 0.0;
            for (size_t j = 1; j < packet; ++j)
                REQUIRE((out.samples[i + j] == 0.0) == first_zero);
        }
    }
}

TEST_CASE("downsample distortion returns to the original rate and length") {
    const Waveform clean = synth_speech_clip(11, {0.5});
    const Waveform out = apply_downsample(clean, 8000);
    REQUIRE(out.sample_rate_hz == clean.sample_rate_hz);
    REQUIRE(out.samples.size() == clean.samples.size());
    // High-frequency content must be gone: compare band energy above 4 kHz.
    const auto spec_in = fft::real_magnitude(clean.samples.data(), clean.samples.size(), 16384);
    const auto spec_out = fft::real_magnitude(out.samples.data(), out.samples.size(), 16384);
    const size_t cut = static_cast<size_t>(6000.0 / 44100.0 * 16384);
    double hi_in = 0.0, hi_out = 0.0;
    for (size_t k = cut; k < spec_in.size(); ++k) {
        hi_in += spec_in[k] * spec_in[k];
        hi_out += spec_out[k] * spec_out[k];
    }
    REQUIRE(hi_out < 0.05 * hi_in);
}

TEST_CASE("apply_chain is deterministic and keeps pairs aligned") {
    const AssetCatalog assets = demo_assets();
    const Waveform clean = synth_speech_clip(12, {0.5});
    const DistortionChain chain = sample_chain(90210, assets, {});

    const auto [noisy1, ref1] = apply_chain(clean, chain, assets);
    const auto [noisy2, ref2] = apply_chain(clean, chain, assets);
    REQUIRE(noisy1.samples == noisy2.samples);
    REQUIRE(ref1.samples == ref2.samples);
    REQUIRE(noisy1.samples.size() == ref1.samples.size());
    REQUIRE(noisy1.sample_rate_hz == ref1.sample_rate_hz);
}

TEST_CASE("chain json round-trips exactly") {
    const AssetCatalog assets = demo_assets();
    for (int i = 0; i < 50; ++i) {
        const DistortionChain chain = sample_chain(derive_seed(7777, i), assets, {});
        const DistortionChain back = DistortionChain::from_json(chain.to_json(), chain.seed);
        REQUIRE(back.specs.size() == chain.specs.size());
        for (size_t s = 0; s < chain.specs.size(); ++s) {
            REQUIRE(back.specs[s].kind == chain.specs[s].kind);
            REQUIRE(back.specs[s].snr_db == chain.specs[s].snr_db);
            REQUIRE(back.specs[s].target_sr_hz == chain.specs[s].target_sr_hz);
            REQUIRE(back.specs[s].source_ref == chain.specs[s].source_ref);
        }
        const auto [n1, r1] = apply_chain(synth_speech_clip(1, {0.3}), chain, assets);
        const auto [n2, r2] = apply_chain(synth_speech_clip(1, {0.3}), back, assets);
        REQUIRE(n1.samples == n2.samples);
    }
}

TEST_CASE("asset catalog round-trips through manifests") {
    ScratchDir dir("assets_manifest");
    const auto manifest = write_demo_assets(dir.path(), 31, 3, 2);
    const AssetCatalog cat = AssetCatalog::load(manifest);
    REQUIRE(cat.noise_count() == 3);
    REQUIRE(cat.rir_count() == 2);
}
