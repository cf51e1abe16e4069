#pragma once

#include <algorithm>
#include <complex>
#include <vector>

#include "dacse/audio/fft.hpp"
#include "dacse/audio/waveform.hpp"
#include "dacse/common.hpp"

namespace dacse {

// Linear convolution with an impulse response via FFT overlap-add. The output
// is truncated to len(w): reverb must not change clip duration, so the tail
// past the input length is dropped and noisy/clean pairs stay frame-aligned.
inline Waveform fft_convolve(const Waveform& w, const RirKernel& k) {
    w.validate();
    k.validate();
    if (w.sample_rate_hz != k.sample_rate_hz)
        throw RateMismatchError("waveform and kernel sample rates differ");

    const size_t n = w.samples.size();
    const size_t m = k.taps.size();

    const size_t n_fft = fft::next_pow2(std::max<size_t>(2 * m, 4096));
    const size_t block = n_fft - m + 1;

    std::vector<std::complex<double>> kernel_f(n_fft, {0.0, 0.0});
    for (size_t i = 0; i < m; ++i) kernel_f[i] = {k.taps[i], 0.0};
    fft::forward(kernel_f);

    Waveform out;
    out.sample_rate_hz = w.sample_rate_hz;
    out.samples.assign(n, 0.0);

    std::vector<std::complex<double>> buf(n_fft);
    for (size_t start = 0; start < n; start += block) {
        const size_t len = std::min(block, n - start);
        std::fill(buf.begin(), buf.end(), std::complex<double>{0.0, 0.0});
        for (size_t i = 0; i < len; ++i) buf[i] = {w.samples[start + i], 0.0};
        fft::forward(buf);
        for (size_t i = 0; i < n_fft; ++i) buf[i] *= kernel_f[i];
        fft::inverse(buf);
        const size_t limit = std::min(n - start, n_fft);  // truncate the tail
        for (size_t i = 0; i < limit; ++i) out.samples[start + i] += buf[i].real();
    }
    return out;
}

}  // namespace dacse
