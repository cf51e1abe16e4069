#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "dacse/common.hpp"

namespace dacse::fft {

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place iterative radix-2 Cooley-Tukey. Power-of-two lengths only; double
// precision throughout so convolution error stays far below the 1e-6 contract.
inline void transform(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (n == 0) return;
    if (!is_pow2(n)) throw ConfigError("FFT length must be a power of two");

    // bit-reversal permutation
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * 3.141592653589793238462643383279502884 / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (auto& x : a) x *= inv_n;
    }
}

inline void forward(std::vector<std::complex<double>>& a) { transform(a, false); }
inline void inverse(std::vector<std::complex<double>>& a) { transform(a, true); }

// Magnitude spectrum of a real frame, zero-padded to n_fft. Returns n_fft/2+1 bins.
inline std::vector<double> real_magnitude(const double* frame, size_t len, size_t n_fft) {
    std::vector<std::complex<double>> buf(n_fft, {0.0, 0.0});
    for (size_t i = 0; i < len && i < n_fft; ++i) buf[i] = {frame[i], 0.0};
    forward(buf);
    std::vector<double> mag(n_fft / 2 + 1);
    for (size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(buf[k]);
    return mag;
}

}  // namespace dacse::fft
