#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dacse/common.hpp"
#include "dacse/lm/config.hpp"
#include "dacse/lm/mat.hpp"
#include "dacse/lm/rope.hpp"
#include "dacse/rng.hpp"
#include "dacse/token/vocab.hpp"

namespace dacse {

constexpr double kRmsNormEps = 1e-5;

// All parameters of the transformer, templated on scalar so the finite-
// difference checker can run the identical code in double. Matrices are
// row-major [out, in]: y = W x is a dot of W's rows with x.
template <typename T>
struct Weights {
    ModelConfig cfg;

    std::vector<T> tok_emb;     // [V, d]
    std::vector<T> final_norm;  // [d]
    std::vector<T> head;        // [V, d]

    struct Layer {
        std::vector<T> attn_norm;       // [d]
        std::vector<T> wq, wk, wv, wo;  // [d, d]
        std::vector<T> ffn_norm;        // [d]
        std::vector<T> w_gate, w_up;    // [d_ff, d]
        std::vector<T> w_down;          // [d, d_ff]
    };
    std::vector<Layer> layers;

    static Weights zeros(const ModelConfig& cfg) {
        cfg.validate();
        const size_t V = cfg.vocab_size, d = cfg.d_model, ff = cfg.d_ff;
        Weights w;
        w.cfg = cfg;
        w.tok_emb.assign(V * d, T(0));
        w.final_norm.assign(d, T(0));
        w.head.assign(V * d, T(0));
        w.layers.resize(cfg.n_layers);
        for (auto& l : w.layers) {
            l.attn_norm.assign(d, T(0));
            l.wq.assign(d * d, T(0));
            l.wk.assign(d * d, T(0));
            l.wv.assign(d * d, T(0));
            l.wo.assign(d * d, T(0));
            l.ffn_norm.assign(d, T(0));
            l.w_gate.assign(ff * d, T(0));
            l.w_up.assign(ff * d, T(0));
            l.w_down.assign(d * ff, T(0));
        }
        return w;
    }

    // Scaled-normal init: std 0.02 everywhere, residual output projections
    // (wo, w_down) shrunk by 1/sqrt(2*n_layers); norm gains start at 1.
    static Weights init(const ModelConfig& cfg, uint64_t seed) {
        Weights w = zeros(cfg);
        Rng root(seed);
        uint64_t t = 0;
        auto fill = [&](std::vector<T>& v, double sd) {
            Rng r = root.derive(t++);
            for (auto& x : v) x = static_cast<T>(r.gaussian() * sd);
        };
        const double base = 0.02;
        const double res = base / std::sqrt(2.0 * cfg.n_layers);
        fill(w.tok_emb, base);
        for (auto& x : w.final_norm) x = T(1);
        fill(w.head, base);
        for (auto& l : w.layers) {
            for (auto& x : l.attn_norm) x = T(1);
            fill(l.wq, base);
            fill(l.wk, base);
            fill(l.wv, base);
            fill(l.wo, res);
            for (auto& x : l.ffn_norm) x = T(1);
            fill(l.w_gate, base);
            fill(l.w_up, base);
            fill(l.w_down, res);
        }
        return w;
    }

    template <typename Self, typename Fn>
    static void visit(Self& self, Fn&& fn) {
        const size_t V = self.cfg.vocab_size, d = self.cfg.d_model, ff = self.cfg.d_ff;
        fn("tok_emb", std::vector<size_t>{V, d}, self.tok_emb);
        fn("final_norm", std::vector<size_t>{d}, self.final_norm);
        fn("head", std::vector<size_t>{V, d}, self.head);
        for (size_t i = 0; i < self.layers.size(); ++i) {
            auto& l = self.layers[i];
            const std::string p = "layer" + std::to_string(i) + ".";
            fn(p + "attn_norm", std::vector<size_t>{d}, l.attn_norm);
            fn(p + "wq", std::vector<size_t>{d, d}, l.wq);
            fn(p + "wk", std::vector<size_t>{d, d}, l.wk);
            fn(p + "wv", std::vector<size_t>{d, d}, l.wv);
            fn(p + "wo", std::vector<size_t>{d, d}, l.wo);
            fn(p + "ffn_norm", std::vector<size_t>{d}, l.ffn_norm);
            fn(p + "w_gate", std::vector<size_t>{ff, d}, l.w_gate);
            fn(p + "w_up", std::vector<size_t>{ff, d}, l.w_up);
            fn(p + "w_down", std::vector<size_t>{d, ff}, l.w_down);
        }
    }

    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        visit(*this, fn);
    }
    template <typename Fn>
    void for_each_tensor(Fn&& fn) const {
        visit(*this, fn);
    }
};

// One training sequence plus its loss mask: targets at index >= loss_begin
// and < loss_end carry loss (the clean segment and eos); earlier positions are
// conditioning and later ones are batch padding.
struct MaskedSequence {
    std::vector<uint32_t> ids;
    size_t loss_begin = 1;
    size_t loss_end = SIZE_MAX;  // clamped to ids.size()
    uint8_t task_label = kTaskMixed;

    size_t target_count() const {
        const size_t end = std::min(loss_end, ids.size());
        return end > loss_begin ? end - loss_begin : 0;
    }
};

// Cross-entropy sums split by task label so the Stage-2 trigger is observable.
struct LossStats {
    double total_sum = 0.0;
    size_t total_count = 0;
    std::array<double, kTaskCount> task_sum{};
    std::array<size_t, kTaskCount> task_count{};

    double mean() const { return total_count ? total_sum / static_cast<double>(total_count) : 0.0; }
    double task_mean(int label) const {
        return task_count[label] ? task_sum[label] / static_cast<double>(task_count[label]) : 0.0;
    }

    void add(const LossStats& o) {
        total_sum += o.total_sum;
        total_count += o.total_count;
        for (int i = 0; i < kTaskCount; ++i) {
            task_sum[i] += o.task_sum[i];
            task_count[i] += o.task_count[i];
        }
    }
};

namespace detail {

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }
inline double silu_grad(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s + x * s * (1.0 - s);
}

// y[i] = g[i] * x[i] / rms(x); returns 1/rms for the backward pass.
template <typename T>
double rmsnorm_row(const T* x, const T* g, T* y, size_t d) {
    double ms = 0.0;
    for (size_t i = 0; i < d; ++i) ms += static_cast<double>(x[i]) * static_cast<double>(x[i]);
    const double inv = 1.0 / std::sqrt(ms / static_cast<double>(d) + kRmsNormEps);
    for (size_t i = 0; i < d; ++i)
        y[i] = static_cast<T>(static_cast<double>(x[i]) * inv * static_cast<double>(g[i]));
    return inv;
}

template <typename T>
void rmsnorm_backward_row(const T* x, const T* g, const T* dy, double inv, T* dx_add, T* dg_add,
                          size_t d) {
    double s = 0.0;
    for (size_t i = 0; i < d; ++i)
        s += static_cast<double>(dy[i]) * static_cast<double>(g[i]) * static_cast<double>(x[i]);
    const double k = inv * inv * inv * s / static_cast<double>(d);
    for (size_t i = 0; i < d; ++i) {
        const double u = static_cast<double>(dy[i]) * static_cast<double>(g[i]);
        dx_add[i] += static_cast<T>(inv * u - k * static_cast<double>(x[i]));
        dg_add[i] += static_cast<T>(static_cast<double>(dy[i]) * static_cast<double>(x[i]) * inv);
    }
}

}  // namespace detail

// Pre-norm causal transformer: RMSNorm -> attention(RoPE) -> residual ->
// RMSNorm -> SiLU-gated FFN -> residual; final RMSNorm -> untied output head.
template <typename T>
class Model {
public:
    explicit Model(Weights<T> w) : w_(std::move(w)) {
        w_.cfg.validate();
        rope_ = RopeTable(w_.cfg.d_head(), static_cast<size_t>(w_.cfg.context_len), w_.cfg.rope_theta);
    }

    const ModelConfig& config() const { return w_.cfg; }
    Weights<T>& weights() { return w_; }
    const Weights<T>& weights() const { return w_; }
    const RopeTable& rope() const { return rope_; }

    // Full-sequence logits [T x V]. Used by tests and the no-cache reference
    // path; generation uses the incremental cache in generate.hpp.
    std::vector<T> forward(const std::vector<uint32_t>& ids) const {
        SeqCache c;
        forward_cached(ids, c);
        std::vector<T> logits;
        head_logits(c, ids.size(), logits);
        return logits;
    }

    // Attention probabilities [n_heads x T x T] of one layer, for invariant
    // tests (each row over s <= t sums to 1).
    std::vector<T> attention_probs(const std::vector<uint32_t>& ids, int layer) const {
        if (layer < 0 || layer >= w_.cfg.n_layers) throw IndexError("attention_probs: bad layer");
        SeqCache c;
        forward_cached(ids, c);
        return c.layers[layer].probs;
    }

    LossStats loss(const std::vector<MaskedSequence>& batch) const {
        return run_batch(batch, nullptr);
    }

    // Accumulates exact gradients of the batch-mean masked cross-entropy into
    // `grad` (which is reset first). Throws NumericsError naming the first
    // non-finite gradient tensor.
    LossStats loss_and_grad(const std::vector<MaskedSequence>& batch, Weights<T>& grad) const {
        return run_batch(batch, &grad);
    }

private:
    struct LayerCache {
        std::vector<T> x_in, xn1, q, k, v, probs, ctx, x_mid, xn2, gate, up;
        std::vector<double> inv1, inv2;
    };
    struct SeqCache {
        std::vector<T> x;  // final residual stream [T, d]
        std::vector<LayerCache> layers;
        std::vector<T> xnf;
        std::vector<double> invf;
    };

    Weights<T> w_;
    RopeTable rope_;

    void check_ids(const std::vector<uint32_t>& ids) const {
        if (ids.empty()) throw DataError("model: empty token sequence");
        if (ids.size() > static_cast<size_t>(w_.cfg.context_len))
            throw ContextOverflowError("model: sequence of " + std::to_string(ids.size()) +
                                       " tokens exceeds context " +
                                       std::to_string(w_.cfg.context_len));
        for (uint32_t id : ids)
            if (id >= static_cast<uint32_t>(w_.cfg.vocab_size))
                throw IndexError("model: token id " + std::to_string(id) + " outside vocab");
    }

    void forward_cached(const std::vector<uint32_t>& ids, SeqCache& c) const {
        check_ids(ids);
        const size_t Tn = ids.size();
        const size_t d = w_.cfg.d_model, ff = w_.cfg.d_ff;
        const int H = w_.cfg.n_heads, dh = w_.cfg.d_head();
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

        std::vector<T> x(Tn * d);
        for (size_t t = 0; t < Tn; ++t)
            std::copy_n(w_.tok_emb.data() + static_cast<size_t>(ids[t]) * d, d, x.data() + t * d);

        c.layers.resize(w_.cfg.n_layers);
        for (int li = 0; li < w_.cfg.n_layers; ++li) {
            const auto& L = w_.layers[li];
            LayerCache& lc = c.layers[li];
            lc.x_in = x;

            lc.xn1.resize(Tn * d);
            lc.inv1.resize(Tn);
            for (size_t t = 0; t < Tn; ++t)
                lc.inv1[t] = detail::rmsnorm_row(lc.x_in.data() + t * d, L.attn_norm.data(),
                                         lc.xn1.data() + t * d, d);

            lc.q.assign(Tn * d, T(0));
            lc.k.assign(Tn * d, T(0));
            lc.v.assign(Tn * d, T(0));
            mat::gemm_nt(lc.q.data(), lc.xn1.data(), L.wq.data(), Tn, d, d);
            mat::gemm_nt(lc.k.data(), lc.xn1.data(), L.wk.data(), Tn, d, d);
            mat::gemm_nt(lc.v.data(), lc.xn1.data(), L.wv.data(), Tn, d, d);
            for (size_t t = 0; t < Tn; ++t) {
                for (int h = 0; h < H; ++h) {
                    rope_.apply(lc.q.data() + t * d + h * dh, t);
                    rope_.apply(lc.k.data() + t * d + h * dh, t);
                }
            }

            lc.probs.assign(static_cast<size_t>(H) * Tn * Tn, T(0));
            lc.ctx.assign(Tn * d, T(0));
            parallel_for(static_cast<size_t>(H) * Tn, [&](size_t w0, size_t w1) {
                std::vector<double> row;
                for (size_t wi = w0; wi < w1; ++wi) {
                    const int h = static_cast<int>(wi / Tn);
                    const size_t t = wi % Tn;
                    const T* qt = lc.q.data() + t * d + h * dh;
                    row.assign(t + 1, 0.0);
                    double mx = -1e300;
                    for (size_t s = 0; s <= t; ++s) {
                        const T* ks = lc.k.data() + s * d + h * dh;
                        double sc = 0.0;
                        for (int i = 0; i < dh; ++i)
                            sc += static_cast<double>(qt[i]) * static_cast<double>(ks[i]);
                        row[s] = sc * scale;
                        if (row[s] > mx) mx = row[s];
                    }
                    double denom = 0.0;
                    for (size_t s = 0; s <= t; ++s) denom += std::exp(row[s] - mx);
                    T* prow = lc.probs.data() + (static_cast<size_t>(h) * Tn + t) * Tn;
                    T* ot = lc.ctx.data() + t * d + h * dh;
                    for (size_t s = 0; s <= t; ++s) {
                        const double p = std::exp(row[s] - mx) / denom;
                        prow[s] = static_cast<T>(p);
                        const T* vs = lc.v.data() + s * d + h * dh;
                        for (int i = 0; i < dh; ++i)
                            ot[i] += static_cast<T>(p) * vs[i];
                    }
                }
            });

            std::vector<T> attn_out(Tn * d, T(0));
            mat::gemm_nt(attn_out.data(), lc.ctx.data(), L.wo.data(), Tn, d, d);
            for (size_t i = 0; i < Tn * d; ++i) x[i] += attn_out[i];
            lc.x_mid = x;

            lc.xn2.resize(Tn * d);
            lc.inv2.resize(Tn);
            for (size_t t = 0; t < Tn; ++t)
                lc.inv2[t] = detail::rmsnorm_row(lc.x_mid.data() + t * d, L.ffn_norm.data(),
                                         lc.xn2.data() + t * d, d);

            lc.gate.assign(Tn * ff, T(0));
            lc.up.assign(Tn * ff, T(0));
            mat::gemm_nt(lc.gate.data(), lc.xn2.data(), L.w_gate.data(), Tn, d, ff);
            mat::gemm_nt(lc.up.data(), lc.xn2.data(), L.w_up.data(), Tn, d, ff);
            std::vector<T> act(Tn * ff);
            for (size_t i = 0; i < Tn * ff; ++i)
                act[i] = static_cast<T>(detail::silu(static_cast<double>(lc.gate[i])) *
                                        static_cast<double>(lc.up[i]));
            std::vector<T> ffn_out(Tn * d, T(0));
            mat::gemm_nt(ffn_out.data(), act.data(), L.w_down.data(), Tn, ff, d);
            for (size_t i = 0; i < Tn * d; ++i) x[i] += ffn_out[i];
        }

        c.x = std::move(x);
        c.xnf.resize(Tn * d);
        c.invf.resize(Tn);
        for (size_t t = 0; t < Tn; ++t)
            c.invf[t] = detail::rmsnorm_row(c.x.data() + t * d, w_.final_norm.data(), c.xnf.data() + t * d, d);
    }

    void head_logits(const SeqCache& c, size_t Tn, std::vector<T>& logits) const {
        const size_t d = w_.cfg.d_model, V = w_.cfg.vocab_size;
        logits.assign(Tn * V, T(0));
        mat::gemm_nt(logits.data(), c.xnf.data(), w_.head.data(), Tn, d, V);
    }

    // Backward through one sequence given dlogits; accumulates into grad.
    void backward_seq(const std::vector<uint32_t>& ids, const SeqCache& c,
                      const std::vector<T>& dlogits, Weights<T>& grad) const {
        const size_t Tn = ids.size();
        const size_t d = w_.cfg.d_model, ff = w_.cfg.d_ff, V = w_.cfg.vocab_size;
        const int H = w_.cfg.n_heads, dh = w_.cfg.d_head();
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

        // head and final norm
        std::vector<T> dxnf(Tn * d, T(0));
        mat::gemm_nn(dxnf.data(), dlogits.data(), w_.head.data(), Tn, V, d);
        mat::gemm_tn(grad.head.data(), dlogits.data(), c.xnf.data(), V, Tn, d);

        std::vector<T> dx(Tn * d, T(0));
        for (size_t t = 0; t < Tn; ++t)
            detail::rmsnorm_backward_row(c.x.data() + t * d, w_.final_norm.data(), dxnf.data() + t * d,
                                 c.invf[t], dx.data() + t * d, grad.final_norm.data(), d);

        for (int li = w_.cfg.n_layers - 1; li >= 0; --li) {
            const auto& L = w_.layers[li];
            const LayerCache& lc = c.layers[li];
            auto& G = grad.layers[li];

            // FFN sublayer: x_out = x_mid + W_down (silu(gate) ⊙ up)
            std::vector<T> act(Tn * ff);
            for (size_t i = 0; i < Tn * ff; ++i)
                act[i] = static_cast<T>(detail::silu(static_cast<double>(lc.gate[i])) *
                                        static_cast<double>(lc.up[i]));
            std::vector<T> dact(Tn * ff, T(0));
            mat::gemm_nn(dact.data(), dx.data(), L.w_down.data(), Tn, d, ff);
            mat::gemm_tn(G.w_down.data(), dx.data(), act.data(), d, Tn, ff);

            std::vector<T> dgate(Tn * ff), dup(Tn * ff);
            for (size_t i = 0; i < Tn * ff; ++i) {
                const double g = static_cast<double>(lc.gate[i]);
                const double da = static_cast<double>(dact[i]);
                dgate[i] = static_cast<T>(da * static_cast<double>(lc.up[i]) * detail::silu_grad(g));
                dup[i] = static_cast<T>(da * detail::silu(g));
            }
            std::vector<T> dxn2(Tn * d, T(0));
            mat::gemm_nn(dxn2.data(), dgate.data(), L.w_gate.data(), Tn, ff, d);
            mat::gemm_nn(dxn2.data(), dup.data(), L.w_up.data(), Tn, ff, d);
            mat::gemm_tn(G.w_gate.data(), dgate.data(), lc.xn2.data(), ff, Tn, d);
            mat::gemm_tn(G.w_up.data(), dup.data(), lc.xn2.data(), ff, Tn, d);

            // dx currently holds the gradient on x_out; the residual branch
            // passes it straight to x_mid, the norm branch adds its share.
            for (size_t t = 0; t < Tn; ++t)
                detail::rmsnorm_backward_row(lc.x_mid.data() + t * d, L.ffn_norm.data(),
                                     dxn2.data() + t * d, lc.inv2[t], dx.data() + t * d,
                                     G.ffn_norm.data(), d);

            // attention sublayer: x_mid = x_in + W_o ctx
            std::vector<T> dctx(Tn * d, T(0));
            mat::gemm_nn(dctx.data(), dx.data(), L.wo.data(), Tn, d, d);
            mat::gemm_tn(G.wo.data(), dx.data(), lc.ctx.data(), d, Tn, d);

            // Heads write disjoint column slices of dq/dk/dv, so splitting the
            // head loop across workers stays deterministic.
            std::vector<T> dq(Tn * d, T(0)), dk(Tn * d, T(0)), dv(Tn * d, T(0));
            parallel_for(static_cast<size_t>(H), [&](size_t h0, size_t h1) {
                std::vector<double> dp;
                for (size_t h = h0; h < h1; ++h) {
                    const T* probs = lc.probs.data() + h * Tn * Tn;
                    for (size_t t = 0; t < Tn; ++t) {
                        const T* prow = probs + t * Tn;
                        const T* dct = dctx.data() + t * d + h * dh;
                        const T* qt = lc.q.data() + t * d + h * dh;
                        // dp and the softmax pullback
                        double dot_pd = 0.0;
                        dp.assign(t + 1, 0.0);
                        for (size_t s = 0; s <= t; ++s) {
                            const T* vs = lc.v.data() + s * d + h * dh;
                            double a = 0.0;
                            for (int i = 0; i < dh; ++i)
                                a += static_cast<double>(dct[i]) * static_cast<double>(vs[i]);
                            dp[s] = a;
                            dot_pd += static_cast<double>(prow[s]) * a;
                        }
                        T* dqt = dq.data() + t * d + h * dh;
                        for (size_t s = 0; s <= t; ++s) {
                            const double p = static_cast<double>(prow[s]);
                            const double dscore = p * (dp[s] - dot_pd) * scale;
                            const T* ks = lc.k.data() + s * d + h * dh;
                            T* dks = dk.data() + s * d + h * dh;
                            T* dvs = dv.data() + s * d + h * dh;
                            for (int i = 0; i < dh; ++i) {
                                dqt[i] += static_cast<T>(dscore * static_cast<double>(ks[i]));
                                dks[i] += static_cast<T>(dscore * static_cast<double>(qt[i]));
                                dvs[i] += static_cast<T>(p * static_cast<double>(dct[i]));
                            }
                        }
                    }
                }
            });
            for (size_t t = 0; t < Tn; ++t) {
                for (int h = 0; h < H; ++h) {
                    rope_.apply(dq.data() + t * d + h * dh, t, -1);
                    rope_.apply(dk.data() + t * d + h * dh, t, -1);
                }
            }

            std::vector<T> dxn1(Tn * d, T(0));
            mat::gemm_nn(dxn1.data(), dq.data(), L.wq.data(), Tn, d, d);
            mat::gemm_nn(dxn1.data(), dk.data(), L.wk.data(), Tn, d, d);
            mat::gemm_nn(dxn1.data(), dv.data(), L.wv.data(), Tn, d, d);
            mat::gemm_tn(G.wq.data(), dq.data(), lc.xn1.data(), d, Tn, d);
            mat::gemm_tn(G.wk.data(), dk.data(), lc.xn1.data(), d, Tn, d);
            mat::gemm_tn(G.wv.data(), dv.data(), lc.xn1.data(), d, Tn, d);

            for (size_t t = 0; t < Tn; ++t)
                detail::rmsnorm_backward_row(lc.x_in.data() + t * d, L.attn_norm.data(),
                                     dxn1.data() + t * d, lc.inv1[t], dx.data() + t * d,
                                     G.attn_norm.data(), d);
        }

        for (size_t t = 0; t < Tn; ++t) {
            T* row = grad.tok_emb.data() + static_cast<size_t>(ids[t]) * d;
            const T* dxt = dx.data() + t * d;
            for (size_t i = 0; i < d; ++i) row[i] += dxt[i];
        }
    }

    LossStats run_batch(const std::vector<MaskedSequence>& batch, Weights<T>* grad) const {
        if (batch.empty()) throw DegenerateBatchError("loss: empty batch");
        size_t total_targets = 0;
        for (const auto& seq : batch) {
            if (seq.ids.size() < 2) throw DataError("loss: sequence too short to have targets");
            if (seq.loss_begin < 1 || seq.loss_begin >= seq.ids.size())
                throw DataError("loss: loss_begin outside target range");
            if (seq.loss_end <= seq.loss_begin)
                throw DataError("loss: loss_end does not leave any targets");
            if (seq.task_label >= kTaskCount)
                throw IndexError("loss: bad task label " + std::to_string(seq.task_label));
            total_targets += seq.target_count();
        }
        if (total_targets == 0) throw DegenerateBatchError("loss: mask selects no targets");

        if (grad) *grad = Weights<T>::zeros(w_.cfg);

        const size_t V = w_.cfg.vocab_size;
        LossStats stats;
        for (const auto& seq : batch) {
            SeqCache c;
            forward_cached(seq.ids, c);
            std::vector<T> logits;
            head_logits(c, seq.ids.size(), logits);

            const size_t Tn = seq.ids.size();
            std::vector<T> dlogits;
            if (grad) dlogits.assign(Tn * V, T(0));

            const size_t tgt_end = std::min(seq.loss_end, Tn);
            double seq_sum = 0.0;
            for (size_t tgt = seq.loss_begin; tgt < tgt_end; ++tgt) {
                const size_t pos = tgt - 1;  // logits row predicting ids[tgt]
                const T* row = logits.data() + pos * V;
                double mx = -1e300;
                for (size_t v = 0; v < V; ++v) mx = std::max(mx, static_cast<double>(row[v]));
                double denom = 0.0;
                for (size_t v = 0; v < V; ++v) denom += std::exp(static_cast<double>(row[v]) - mx);
                const double lse = mx + std::log(denom);
                const double ce = lse - static_cast<double>(row[seq.ids[tgt]]);
                if (!std::isfinite(ce)) throw NumericsError("loss: non-finite cross-entropy");
                seq_sum += ce;
                if (grad) {
                    const double w = 1.0 / static_cast<double>(total_targets);
                    T* dl = dlogits.data() + pos * V;
                    for (size_t v = 0; v < V; ++v)
                        dl[v] += static_cast<T>(std::exp(static_cast<double>(row[v]) - lse) * w);
                    dl[seq.ids[tgt]] -= static_cast<T>(w);
                }
            }
            const size_t n = tgt_end - seq.loss_begin;
            stats.total_sum += seq_sum;
            stats.total_count += n;
            stats.task_sum[seq.task_label] += seq_sum;
            stats.task_count[seq.task_label] += n;

            if (grad) backward_seq(seq.ids, c, dlogits, *grad);
        }

        if (grad) {
            grad->for_each_tensor([](const std::string& name, const std::vector<size_t>&,
                                     const std::vector<T>& data) {
                for (const T& v : data)
                    if (!std::isfinite(static_cast<double>(v)))
                        throw NumericsError("backward: non-finite gradient in " + name);
            });
        }
        return stats;
    }
};

}  // namespace dacse
