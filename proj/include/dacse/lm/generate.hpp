#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dacse/common.hpp"
#include "dacse/lm/model.hpp"
#include "dacse/rng.hpp"
#include "dacse/token/vocab.hpp"

namespace dacse {

// Per-layer key/value rows appended once per decoded token. The math mirrors
// Model::forward_cached exactly (same dot kernel, same double-precision
// softmax), so cached decoding reproduces full re-forward logits.
template <typename T>
class KvCache {
public:
    KvCache(const ModelConfig& cfg, size_t capacity)
        : cfg_(cfg), capacity_(capacity), k_(cfg.n_layers), v_(cfg.n_layers) {
        cfg_.validate();
        if (capacity_ > static_cast<size_t>(cfg_.context_len))
            throw ContextOverflowError("kv cache: capacity " + std::to_string(capacity_) +
                                       " exceeds context " + std::to_string(cfg_.context_len));
        for (int l = 0; l < cfg_.n_layers; ++l) {
            k_[l].resize(capacity_ * static_cast<size_t>(cfg_.d_model));
            v_[l].resize(capacity_ * static_cast<size_t>(cfg_.d_model));
        }
    }

    size_t len() const { return len_; }
    size_t capacity() const { return capacity_; }

    T* k_row(int layer, size_t pos) { return k_[layer].data() + pos * cfg_.d_model; }
    T* v_row(int layer, size_t pos) { return v_[layer].data() + pos * cfg_.d_model; }
    const T* k_row(int layer, size_t pos) const { return k_[layer].data() + pos * cfg_.d_model; }
    const T* v_row(int layer, size_t pos) const { return v_[layer].data() + pos * cfg_.d_model; }

    void advance() { ++len_; }

private:
    ModelConfig cfg_;
    size_t capacity_;
    size_t len_ = 0;
    std::vector<std::vector<T>> k_, v_;
};

// Feed one token at the next position; returns the logits row [V].
template <typename T>
std::vector<T> decode_step(const Model<T>& model, KvCache<T>& cache, uint32_t token) {
    const ModelConfig& cfg = model.config();
    if (token >= static_cast<uint32_t>(cfg.vocab_size))
        throw IndexError("decode: token id " + std::to_string(token) + " outside vocab");
    if (cache.len() >= cache.capacity())
        throw ContextOverflowError("decode: kv cache full at " + std::to_string(cache.len()));

    const size_t d = cfg.d_model, ff = cfg.d_ff, V = cfg.vocab_size;
    const int H = cfg.n_heads, dh = cfg.d_head();
    const size_t pos = cache.len();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Weights<T>& w = model.weights();

    std::vector<T> x(d);
    std::copy_n(w.tok_emb.data() + static_cast<size_t>(token) * d, d, x.data());

    std::vector<T> xn(d), q(d), ctx(d), xn2(d), gate(ff), up(ff);
    for (int li = 0; li < cfg.n_layers; ++li) {
        const auto& L = w.layers[li];
        detail::rmsnorm_row(x.data(), L.attn_norm.data(), xn.data(), d);

        T* krow = cache.k_row(li, pos);
        T* vrow = cache.v_row(li, pos);
        for (size_t o = 0; o < d; ++o) {
            q[o] = mat::dot(xn.data(), L.wq.data() + o * d, d);
            krow[o] = mat::dot(xn.data(), L.wk.data() + o * d, d);
            vrow[o] = mat::dot(xn.data(), L.wv.data() + o * d, d);
        }
        for (int h = 0; h < H; ++h) {
            model.rope().apply(q.data() + h * dh, pos);
            model.rope().apply(krow + h * dh, pos);
        }

        std::fill(ctx.begin(), ctx.end(), T(0));
        std::vector<double> row(pos + 1);
        for (int h = 0; h < H; ++h) {
            const T* qh = q.data() + h * dh;
            double mx = -1e300;
            for (size_t s = 0; s <= pos; ++s) {
                const T* ks = cache.k_row(li, s) + h * dh;
                double sc = 0.0;
                for (int i = 0; i < dh; ++i)
                    sc += static_cast<double>(qh[i]) * static_cast<double>(ks[i]);
                row[s] = sc * scale;
                if (row[s] > mx) mx = row[s];
            }
            double denom = 0.0;
            for (size_t s = 0; s <= pos; ++s) denom += std::exp(row[s] - mx);
            T* oh = ctx.data() + h * dh;
            for (size_t s = 0; s <= pos; ++s) {
                const double p = std::exp(row[s] - mx) / denom;
                const T* vs = cache.v_row(li, s) + h * dh;
                for (int i = 0; i < dh; ++i) oh[i] += static_cast<T>(p) * vs[i];
            }
        }
        for (size_t o = 0; o < d; ++o) x[o] += mat::dot(ctx.data(), L.wo.data() + o * d, d);

        detail::rmsnorm_row(x.data(), L.ffn_norm.data(), xn2.data(), d);
        for (size_t o = 0; o < ff; ++o) {
            gate[o] = mat::dot(xn2.data(), L.w_gate.data() + o * d, d);
            up[o] = mat::dot(xn2.data(), L.w_up.data() + o * d, d);
        }
        std::vector<T> act(ff);
        for (size_t o = 0; o < ff; ++o)
            act[o] = static_cast<T>(detail::silu(static_cast<double>(gate[o])) *
                                    static_cast<double>(up[o]));
        for (size_t o = 0; o < d; ++o) x[o] += mat::dot(act.data(), L.w_down.data() + o * ff, ff);
    }

    detail::rmsnorm_row(x.data(), w.final_norm.data(), xn.data(), d);
    std::vector<T> logits(V);
    for (size_t o = 0; o < V; ++o) logits[o] = mat::dot(xn.data(), w.head.data() + o * d, d);

    cache.advance();
    return logits;
}

// temperature 0 = greedy; top_k 0 = no truncation.
struct DecodePolicy {
    double temperature = 0.0;
    int top_k = 0;
    uint64_t seed = 0;
};

struct GenerateResult {
    std::vector<uint32_t> clean_ids;  // flattened clean stream, specials stripped
    bool hit_eos = false;
    size_t n_steps = 0;  // emitted tokens including eos
};

namespace detail {

// Pick from the admissible ids. Greedy takes the max logit (lowest id on
// ties); sampling softmaxes logits/temperature over the top_k admissible ids.
template <typename T>
uint32_t pick_token(const std::vector<T>& logits, const std::vector<uint32_t>& allowed,
                    const DecodePolicy& policy, Rng& rng) {
    if (policy.temperature <= 0.0) {
        uint32_t best = allowed[0];
        double best_v = static_cast<double>(logits[allowed[0]]);
        for (uint32_t id : allowed) {
            const double v = static_cast<double>(logits[id]);
            if (v > best_v) {
                best_v = v;
                best = id;
            }
        }
        return best;
    }
    std::vector<std::pair<double, uint32_t>> cand;
    cand.reserve(allowed.size());
    for (uint32_t id : allowed) cand.emplace_back(static_cast<double>(logits[id]), id);
    if (policy.top_k > 0 && cand.size() > static_cast<size_t>(policy.top_k)) {
        std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        cand.resize(policy.top_k);
    }
    double mx = cand[0].first;
    for (const auto& c : cand) mx = std::max(mx, c.first);
    double total = 0.0;
    std::vector<double> weight(cand.size());
    for (size_t i = 0; i < cand.size(); ++i) {
        weight[i] = std::exp((cand[i].first - mx) / policy.temperature);
        total += weight[i];
    }
    const double target = rng.uniform() * total;
    double cum = 0.0;
    for (size_t i = 0; i < cand.size(); ++i) {
        cum += weight[i];
        if (cum >= target) return cand[i].second;
    }
    return cand.back().second;
}

}  // namespace detail

// Constrained autoregressive continuation of `[bos] noisy [start_clean]`.
// At emitted-position p only codebook-(p mod L) ids are admissible, plus eos
// at frame boundaries, so every output stream unflattens cleanly. Generation
// stops at eos or after n_noisy_frames * L tokens.
template <typename T>
GenerateResult generate(const Model<T>& model, const std::vector<uint32_t>& prefix,
                        const VocabLayout& vocab, const DecodePolicy& policy = {}) {
    vocab.validate();
    if (static_cast<uint32_t>(model.config().vocab_size) != vocab.vocab_size())
        throw ConfigError("generate: model vocab does not match layout");
    if (prefix.size() < 2 || prefix.back() != vocab.start_clean())
        throw DataError("generate: prefix must end with start_clean");
    const size_t L = static_cast<size_t>(vocab.L);
    if ((prefix.size() - 2) % L != 0)
        throw DataError("generate: noisy prefix length not a multiple of L");
    const size_t n_frames = (prefix.size() - 2) / L;
    if (n_frames == 0) throw DataError("generate: empty noisy stream");
    const size_t cap_tokens = n_frames * L;
    const size_t need = prefix.size() + cap_tokens + 1;
    if (need > static_cast<size_t>(model.config().context_len))
        throw ContextOverflowError("generate: sequence of " + std::to_string(need) +
                                   " tokens exceeds context " +
                                   std::to_string(model.config().context_len));

    KvCache<T> cache(model.config(), need);
    std::vector<T> logits;
    for (uint32_t id : prefix) logits = decode_step(model, cache, id);

    Rng rng(policy.seed);
    GenerateResult res;
    std::vector<uint32_t> allowed;
    allowed.reserve(vocab.K + 1);
    for (size_t p = 0; p < cap_tokens; ++p) {
        const int book = static_cast<int>(p % L);
        allowed.clear();
        for (int c = 0; c < vocab.K; ++c) allowed.push_back(vocab.id_of(book, c));
        if (book == 0) allowed.push_back(vocab.eos());

        const uint32_t next = detail::pick_token(logits, allowed, policy, rng);
        ++res.n_steps;
        if (next == vocab.eos()) {
            res.hit_eos = true;
            break;
        }
        res.clean_ids.push_back(next);
        if (res.clean_ids.size() == cap_tokens) break;  // duration cap: no extra feed
        logits = decode_step(model, cache, next);
    }
    return res;
}

}  // namespace dacse
