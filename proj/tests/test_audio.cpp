// Audio substrate: waveform container, WAV round-trips, FFT vs the O(n^2)
// oracle, fast convolution exactness, and resampler alias suppression.

#include <catch2/catch_amalgamated.hpp>

#include "dacse/audio/convolve.hpp"
#include "dacse/audio/fft.hpp"
#include "dacse/audio/resample.hpp"
#include "dacse/audio/wav_io.hpp"
#include "dacse/audio/waveform.hpp"
#include "dacse/synth/speechgen.hpp"

#include "testutil.hpp"

using namespace dacse;
using testutil::ScratchDir;

TEST_CASE("waveform validation and basic ops") {
    Waveform w = testutil::tone(440.0, 0.1);
    REQUIRE_NOTHROW(w.validate());

    w.sample_rate_hz = 0;
    REQUIRE_THROWS_AS(w.validate(), ConfigError);
    w.sample_rate_hz = 44100;

    w.samples[5] = std::nan("");
    REQUIRE_THROWS_AS(w.validate(), NumericsError);
    w.samples[5] = 0.0;

    SECTION("truncate_to_seconds caps length") {
        Waveform t = testutil::tone(100.0, 2.0);
        t.truncate_to_seconds(0.5);
        REQUIRE(t.samples.size() == 22050);
        t.truncate_to_seconds(10.0);  // no-op when already shorter
        REQUIRE(t.samples.size() == 22050);
    }

    SECTION("peak_normalize hits unit peak and reports the gain") {
        Waveform t = testutil::tone(100.0, 0.05, 44100, 0.25);
        const double gain = t.peak_normalize();
        REQUIRE(t.peak() == Catch::Approx(1.0).epsilon(1e-12));
        REQUIRE(gain == Catch::Approx(4.0).epsilon(1e-6));
    }
}

TEST_CASE("wav io round-trips float32 and int16") {
    ScratchDir dir("wav_roundtrip");
    Waveform w = testutil::white(123, 0.2);

    SECTION("float32 is exact") {
        write_wav(w, dir / "f32.wav", WavEncoding::float32);
        const Waveform r = read_wav(dir / "f32.wav");
        REQUIRE(r.sample_rate_hz == w.sample_rate_hz);
        REQUIRE(r.samples.size() == w.samples.size());
        for (size_t i = 0; i < w.samples.size(); ++i)
            REQUIRE(r.samples[i] == Catch::Approx(w.samples[i]).margin(1.2e-7));
    }

    SECTION("int16 is exact to half an lsb") {
        write_wav(w, dir / "i16.wav", WavEncoding::pcm16);
        const Waveform r = read_wav(dir / "i16.wav");
        REQUIRE(r.samples.size() == w.samples.size());
        for (size_t i = 0; i < w.samples.size(); ++i)
            REQUIRE(std::abs(r.samples[i] - w.samples[i]) <= 0.5 / 32767.0 + 1e-9);
    }

    SECTION("truncated file is rejected") {
        write_wav(w, dir / "cut.wav", WavEncoding::float32);
        auto bytes = io::read_file(dir / "cut.wav");
        bytes.resize(bytes.size() / 2);
        {
            io::AtomicFile f(dir / "cut.wav");
            io::write_bytes(f.stream(), bytes.data(), bytes.size());
            f.commit();
        }
        REQUIRE_THROWS_AS(read_wav(dir / "cut.wav"), IoError);
    }

    SECTION("writes are atomic: no partial file left on failure") {
        // A directory where the target should go makes the final rename throw.
        std::filesystem::create_directories(dir / "blocked.wav");
        REQUIRE_THROWS(write_wav(w, dir / "blocked.wav", WavEncoding::float32));
        REQUIRE(!std::filesystem::exists((dir.path() / "blocked.wav.tmp")));
    }
}

TEST_CASE("fft matches the naive dft and inverts exactly") {
    dacse::Rng rng(7);
    std::vector<double> x(256);
    for (double& v : x) v = rng.gaussian();

    const auto oracle = testutil::naive_dft(x);
    std::vector<std::complex<double>> a(x.begin(), x.end());
    fft::forward(a);
    for (size_t k = 0; k < x.size(); ++k) {
        REQUIRE(a[k].real() == Catch::Approx(oracle[k].real()).margin(1e-9));
        REQUIRE(a[k].imag() == Catch::Approx(oracle[k].imag()).margin(1e-9));
    }

    fft::inverse(a);
    for (size_t i = 0; i < x.size(); ++i)
        REQUIRE(a[i].real() == Catch::Approx(x[i]).margin(1e-10));
}

TEST_CASE("fft_convolve equals direct convolution to 1e-6") {
    dacse::Rng rng(99);
    Waveform x;
    x.sample_rate_hz = 44100;
    x.samples.resize(3001);
    for (double& v : x.samples) v = rng.gaussian();

    RirKernel k;
    k.sample_rate_hz = 44100;
    k.taps.resize(257);
    for (double& v : k.taps) v = rng.gaussian() * 0.1;

    const Waveform y = fft_convolve(x, k);
    const auto oracle = testutil::direct_convolve(x.samples, k.taps);
    REQUIRE(y.samples.size() == x.samples.size());  // same-length output, tail clipped
    for (size_t i = 0; i < y.samples.size(); ++i)
        REQUIRE(std::abs(y.samples[i] - oracle[i]) < 1e-6);
}

TEST_CASE("resampler preserves passband tones and suppresses aliases") {
    SECTION("passband tone survives 44100 -> 16000 -> measurement") {
        const Waveform w = testutil::tone(1000.0, 0.5);
        const Waveform d = resample(w, 16000);
        REQUIRE(d.sample_rate_hz == 16000);
        // Compare against an ideal 1 kHz tone at the new rate, skipping the
        // filter edges.
        const size_t guard = 256;
        double err = 0.0, ref = 0.0;
        for (size_t i = guard; i + guard < d.samples.size(); ++i) {
            const double ideal =
                0.5 * std::sin(2.0 * M_PI * 1000.0 * static_cast<double>(i) / 16000.0);
            err += (d.samples[i] - ideal) * (d.samples[i] - ideal);
            ref += ideal * ideal;
        }
        REQUIRE(10.0 * std::log10(ref / err) > 40.0);
    }

    SECTION("tone above the target nyquist is attenuated by at least 40 dB") {
        // 10 kHz tone cannot be represented at 16 kHz output (nyquist 8 kHz);
        // whatever leaks through is aliasing.
        const Waveform w = testutil::tone(10000.0, 0.5);
        const Waveform d = resample(w, 16000);
        const size_t guard = 256;
        double alias = 0.0;
        size_t n = 0;
        for (size_t i = guard; i + guard < d.samples.size(); ++i, ++n)
            alias += d.samples[i] * d.samples[i];
        const double in_power = 0.5 * 0.5 / 2.0;  // sine amplitude 0.5
        const double alias_db = 10.0 * std::log10((alias / n) / in_power);
        REQUIRE(alias_db < -40.0);
    }

    SECTION("identity rate returns the input unchanged") {
        const Waveform w = testutil::tone(500.0, 0.1);
        const Waveform same = resample(w, 44100);
        REQUIRE(same.samples == w.samples);
    }

    SECTION("round trip 44100 -> 8000 -> 44100 keeps a low tone") {
        const Waveform w = testutil::tone(440.0, 0.5);
        const Waveform back = resample(resample(w, 8000), 44100);
        const size_t guard = 1024;
        double err = 0.0, ref = 0.0;
        const size_t n = std::min(w.samples.size(), back.samples.size());
        for (size_t i = guard; i + guard < n; ++i) {
            err += (back.samples[i] - w.samples[i]) * (back.samples[i] - w.samples[i]);
            ref += w.samples[i] * w.samples[i];
        }
        REQUIRE(10.0 * std::log10(ref / err) > 30.0);
    }
}

TEST_CASE("synthetic speech generator emits usable clips") {
    const Waveform w = synth_speech_clip(42);
    REQUIRE(w.sample_rate_hz == 44100);
    REQUIRE(w.samples.size() == 44100);
    REQUIRE(w.peak() <= 1.0);
    REQUIRE(w.rms() > 1e-3);  // not silence

    // Determinism: same seed, same samples.
    const Waveform again = synth_speech_clip(42);
    REQUIRE(again.samples == w.samples);
    const Waveform other = synth_speech_clip(43);
    REQUIRE(other.samples != w.samples);
}
