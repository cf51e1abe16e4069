#pragma once

// Shared helpers for the test suites: scratch directories, deterministic
// signal generators, and oracle implementations kept deliberately naive so
// they can disagree with the library only when the library is wrong.

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dacse/audio/waveform.hpp"
#include "dacse/rng.hpp"

namespace testutil {

// Per-test scratch directory, wiped on construction and destruction so a
// crashed run cannot poison the next one.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag)
        : path_(std::filesystem::temp_directory_path() / ("dacse_test_" + tag)) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline dacse::Waveform tone(double freq_hz, double seconds, int rate_hz = 44100,
                            double amp = 0.5) {
    dacse::Waveform w;
    w.sample_rate_hz = rate_hz;
    const size_t n = static_cast<size_t>(seconds * rate_hz);
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i)
        w.samples[i] = amp * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / rate_hz);
    return w;
}

inline dacse::Waveform white(uint64_t seed, double seconds, int rate_hz = 44100,
                             double amp = 0.3) {
    dacse::Waveform w;
    w.sample_rate_hz = rate_hz;
    dacse::Rng rng(seed);
    const size_t n = static_cast<size_t>(seconds * rate_hz);
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) w.samples[i] = amp * rng.gaussian();
    return w;
}

inline double power_db(const dacse::Waveform& w) {
    double p = 0.0;
    for (double s : w.samples) p += s * s;
    return 10.0 * std::log10(p / static_cast<double>(w.samples.size()));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size() && i < b.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    if (a.size() != b.size()) return 1e300;
    return m;
}

// O(n*m) convolution oracle for validating the FFT path.
inline std::vector<double> direct_convolve(const std::vector<double>& x,
                                           const std::vector<double>& h) {
    std::vector<double> y(x.size() + h.size() - 1, 0.0);
    for (size_t i = 0; i < x.size(); ++i)
        for (size_t j = 0; j < h.size(); ++j) y[i + j] += x[i] * h[j];
    return y;
}

// O(n^2) DCT-II oracle with orthonormal scaling.
inline std::vector<double> naive_dct2(const std::vector<double>& x) {
    const size_t n = x.size();
    std::vector<double> y(n, 0.0);
    for (size_t k = 0; k < n; ++k) {
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i)
            acc += x[i] * std::cos(M_PI / static_cast<double>(n) *
                                   (static_cast<double>(i) + 0.5) * static_cast<double>(k));
        const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        y[k] = scale * acc;
    }
    return y;
}

// O(n log n) textbook DFT through std::complex, used to cross-check magnitudes.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
    const size_t n = x.size();
    std::vector<std::complex<double>> y(n);
    for (size_t k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double ang = -2.0 * M_PI * static_cast<double>(k * i) / static_cast<double>(n);
            acc += x[i] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        y[k] = acc;
    }
    return y;
}

}  // namespace testutil
