#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "dacse/common.hpp"

namespace dacse {

// Rotary position embedding on interleaved pairs: (x[2i], x[2i+1]) is rotated
// by position * theta^(-2i/d). Norm-preserving; the dot product of a rotated
// query/key pair depends only on the position difference.
struct RopeTable {
    int d_head = 0;
    std::vector<double> cos_;  // [n_pos x d_head/2]
    std::vector<double> sin_;

    RopeTable() = default;

    RopeTable(int d_head_in, size_t n_pos, double theta) : d_head(d_head_in) {
        if (d_head % 2 != 0) throw ConfigError("rope: head dimension must be even");
        const int half = d_head / 2;
        cos_.resize(n_pos * half);
        sin_.resize(n_pos * half);
        for (size_t p = 0; p < n_pos; ++p) {
            for (int i = 0; i < half; ++i) {
                const double freq = std::pow(theta, -2.0 * i / static_cast<double>(d_head));
                const double ang = static_cast<double>(p) * freq;
                cos_[p * half + i] = std::cos(ang);
                sin_[p * half + i] = std::sin(ang);
            }
        }
    }

    // direction +1 applies the rotation, -1 undoes it (used by the backward
    // pass: the transpose of a rotation is the opposite rotation).
    template <typename T>
    void apply(T* x, size_t position, int direction = 1) const {
        const int half = d_head / 2;
        const double* c = cos_.data() + position * half;
        const double* s = sin_.data() + position * half;
        for (int i = 0; i < half; ++i) {
            const double sv = direction >= 0 ? s[i] : -s[i];
            const double x0 = static_cast<double>(x[2 * i]);
            const double x1 = static_cast<double>(x[2 * i + 1]);
            x[2 * i] = static_cast<T>(x0 * c[i] - x1 * sv);
            x[2 * i + 1] = static_cast<T>(x0 * sv + x1 * c[i]);
        }
    }
};

// One-off rotation for tests and tiny paths.
template <typename T>
void rope_rotate(T* x, int d_head, size_t position, double theta) {
    if (d_head % 2 != 0) throw ConfigError("rope: head dimension must be even");
    const int half = d_head / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::pow(theta, -2.0 * i / static_cast<double>(d_head));
        const double ang = static_cast<double>(position) * freq;
        const double c = std::cos(ang), s = std::sin(ang);
        const double x0 = static_cast<double>(x[2 * i]);
        const double x1 = static_cast<double>(x[2 * i + 1]);
        x[2 * i] = static_cast<T>(x0 * c - x1 * s);
        x[2 * i + 1] = static_cast<T>(x0 * s + x1 * c);
    }
}

}  // namespace dacse
