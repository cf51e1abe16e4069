#pragma once

#include <cstdint>
#include <string>

#include "dacse/common.hpp"

namespace dacse {

// Decoder-only transformer shape. Desk profile is the default; the paper
// profile carries the full-size numbers for reference and config plumbing
// (nothing in the test suite trains it).
struct ModelConfig {
    int vocab_size = 0;   // set from the vocab layout
    int d_model = 128;
    int n_layers = 4;
    int n_heads = 4;
    int n_kv_heads = 4;
    int d_ff = 512;
    int context_len = 2048;
    double rope_theta = 100000.0;
    std::string profile = "desk";

    int d_head() const { return d_model / n_heads; }

    void validate() const {
        if (vocab_size < 2) throw ConfigError("model: vocab_size must be set");
        if (d_model < 2 || n_heads < 1 || d_model % n_heads != 0)
            throw ConfigError("model: d_model must be divisible by n_heads");
        if (d_head() % 2 != 0) throw ConfigError("model: head dimension must be even for rope");
        if (n_kv_heads != n_heads)
            throw ConfigError("model: grouped-query attention not supported (n_kv_heads != n_heads)");
        if (n_layers < 1 || d_ff < 1 || context_len < 8) throw ConfigError("model: bad shape");
        if (rope_theta <= 0.0) throw ConfigError("model: rope_theta must be positive");
    }

    static ModelConfig desk(int vocab) {
        ModelConfig c;
        c.vocab_size = vocab;
        return c;
    }

    static ModelConfig paper(int vocab) {
        ModelConfig c;
        c.vocab_size = vocab;
        c.d_model = 1536;
        c.n_layers = 24;
        c.n_heads = 24;
        c.n_kv_heads = 24;
        c.d_ff = 6144;
        c.context_len = 8192;
        c.profile = "paper";
        return c;
    }

    // Tiny shape for gradient checks and unit tests.
    static ModelConfig tiny(int vocab, int d = 8, int layers = 1, int heads = 2) {
        ModelConfig c;
        c.vocab_size = vocab;
        c.d_model = d;
        c.n_layers = layers;
        c.n_heads = heads;
        c.n_kv_heads = heads;
        c.d_ff = 2 * d;
        c.context_len = 64;
        c.profile = "tiny";
        return c;
    }
};

}  // namespace dacse
