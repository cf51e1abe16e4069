#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dacse/common.hpp"
#include "dacse/lm/model.hpp"

namespace dacse {

// Decoupled-weight-decay adaptive-moment optimizer with linear warmup into a
// cosine decay. Weight decay skips rank-1 tensors (norm gains).
struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    uint64_t warmup_steps = 100;
    uint64_t total_steps = 1000;
    double min_lr_frac = 0.1;

    // Learning rate for the given 0-based step index.
    double lr_at(uint64_t step) const {
        if (step < warmup_steps)
            return lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
        const uint64_t span = total_steps > warmup_steps ? total_steps - warmup_steps : 1;
        double t = static_cast<double>(step - warmup_steps) / static_cast<double>(span);
        if (t > 1.0) t = 1.0;
        const double pi = 3.141592653589793238462643383279502884;
        return lr * (min_lr_frac + (1.0 - min_lr_frac) * 0.5 * (1.0 + std::cos(pi * t)));
    }
};

template <typename T>
struct AdamState {
    Weights<T> m, v;
    uint64_t step = 0;  // completed optimizer steps

    static AdamState init(const ModelConfig& cfg) {
        AdamState st;
        st.m = Weights<T>::zeros(cfg);
        st.v = Weights<T>::zeros(cfg);
        return st;
    }
};

// Scales gradients in place so their global L2 norm is at most max_norm;
// returns the pre-clip norm.
template <typename T>
double clip_gradients(Weights<T>& grad, double max_norm) {
    double sq = 0.0;
    grad.for_each_tensor([&](const std::string&, const std::vector<size_t>&,
                             const std::vector<T>& data) {
        for (const T& g : data) sq += static_cast<double>(g) * static_cast<double>(g);
    });
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw NumericsError("clip: non-finite gradient norm");
    if (norm > max_norm && norm > 0.0) {
        const T scale = static_cast<T>(max_norm / norm);
        grad.for_each_tensor([&](const std::string&, const std::vector<size_t>&,
                                 std::vector<T>& data) {
            for (T& g : data) g *= scale;
        });
    }
    return norm;
}

template <typename T>
void adamw_step(Weights<T>& w, const Weights<T>& grad, AdamState<T>& st, const AdamConfig& cfg) {
    const double lr = cfg.lr_at(st.step);
    ++st.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));

    // The four structures enumerate tensors in the same fixed order.
    std::vector<std::vector<T>*> wt, mt, vt;
    std::vector<const std::vector<T>*> gt;
    std::vector<bool> decay;
    w.for_each_tensor([&](const std::string&, const std::vector<size_t>& dims,
                          std::vector<T>& data) {
        wt.push_back(&data);
        decay.push_back(dims.size() > 1);
    });
    grad.for_each_tensor([&](const std::string&, const std::vector<size_t>&,
                             const std::vector<T>& data) { gt.push_back(&data); });
    st.m.for_each_tensor([&](const std::string&, const std::vector<size_t>&,
                             std::vector<T>& data) { mt.push_back(&data); });
    st.v.for_each_tensor([&](const std::string&, const std::vector<size_t>&,
                             std::vector<T>& data) { vt.push_back(&data); });

    for (size_t ti = 0; ti < wt.size(); ++ti) {
        std::vector<T>& wv = *wt[ti];
        const std::vector<T>& gv = *gt[ti];
        std::vector<T>& mv = *mt[ti];
        std::vector<T>& vv = *vt[ti];
        const double wd = decay[ti] ? cfg.weight_decay : 0.0;
        for (size_t i = 0; i < wv.size(); ++i) {
            const double g = static_cast<double>(gv[i]);
            const double m = cfg.beta1 * static_cast<double>(mv[i]) + (1.0 - cfg.beta1) * g;
            const double v = cfg.beta2 * static_cast<double>(vv[i]) + (1.0 - cfg.beta2) * g * g;
            mv[i] = static_cast<T>(m);
            vv[i] = static_cast<T>(v);
            const double update = (m / bc1) / (std::sqrt(v / bc2) + cfg.eps) +
                                  wd * static_cast<double>(wv[i]);
            wv[i] = static_cast<T>(static_cast<double>(wv[i]) - lr * update);
        }
    }
}

}  // namespace dacse
