#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "dacse/codec/config.hpp"
#include "dacse/codec/transform.hpp"
#include "dacse/common.hpp"
#include "dacse/rng.hpp"
#include "dacse/sha256.hpp"
#include "dacse/threading.hpp"

namespace dacse {

// Code indices per frame, row-major [n_frames x n_codebooks]. codes[f*L + l] is
// the index chosen from book l for frame f.
struct TokenGrid {
    size_t n_frames = 0;
    int n_codebooks = 0;
    std::vector<uint32_t> codes;
    size_t source_samples = 0;  // 0 when the grid was generated rather than encoded

    uint32_t at(size_t f, int l) const { return codes[f * static_cast<size_t>(n_codebooks) + l]; }
};

// L codebooks of K x dim vectors. Code 0 of every book is pinned to the zero
// vector, which makes per-book residual error non-increasing by construction:
// the encoder can always fall back to "add nothing".
struct RvqCodebooks {
    int n_codebooks = 0;
    int codebook_size = 0;
    int latent_dim = 0;
    std::vector<std::vector<double>> books;  // books[l] is flat [K x dim]
    Digest256 fingerprint{};                 // SHA-256 of the training frames
    std::vector<double> train_residual_mse;  // per-book diagnostic, not serialized

    const double* code(int l, uint32_t c) const {
        return books[l].data() + static_cast<size_t>(c) * latent_dim;
    }

    void validate() const {
        if (n_codebooks < 1 || codebook_size < 2 || latent_dim < 1)
            throw ConfigError("codebooks: bad shape");
        if (static_cast<int>(books.size()) != n_codebooks)
            throw ConfigError("codebooks: book count mismatch");
        for (int l = 0; l < n_codebooks; ++l) {
            if (books[l].size() != static_cast<size_t>(codebook_size) * latent_dim)
                throw ConfigError("codebooks: book " + std::to_string(l) + " has wrong size");
            for (int d = 0; d < latent_dim; ++d)
                if (books[l][d] != 0.0)
                    throw FormatError("codebooks: code 0 of book " + std::to_string(l) +
                                      " is not the zero vector");
        }
    }
};

namespace detail {

// argmin_c ||r - C_c||^2 over all K codes, lowest index on ties. Uses the
// expansion ||C_c||^2 - 2<r, C_c> (the ||r||^2 term is constant in c).
inline uint32_t nearest_code(const double* r, const std::vector<double>& book,
                             const std::vector<double>& code_sq, int K, int dim) {
    uint32_t best = 0;
    double best_score = 0.0;  // code 0 is the zero vector: score = 0
    for (int c = 1; c < K; ++c) {
        const double* cv = book.data() + static_cast<size_t>(c) * dim;
        double dot = 0.0;
        for (int d = 0; d < dim; ++d) dot += r[d] * cv[d];
        const double score = code_sq[c] - 2.0 * dot;
        if (score < best_score) {
            best_score = score;
            best = static_cast<uint32_t>(c);
        }
    }
    return best;
}

inline std::vector<double> code_norms_sq(const std::vector<double>& book, int K, int dim) {
    std::vector<double> sq(K, 0.0);
    for (int c = 0; c < K; ++c) {
        const double* cv = book.data() + static_cast<size_t>(c) * dim;
        double s = 0.0;
        for (int d = 0; d < dim; ++d) s += cv[d] * cv[d];
        sq[c] = s;
    }
    return sq;
}

// k-means over `points` with centroid 0 frozen at zero. Centroids 1..K-1 are
// seeded k-means++ style and refined by Lloyd iterations; a cluster that goes
// empty is reseeded to the point currently farthest from its centroid.
inline std::vector<double> kmeans_frozen_zero(const std::vector<double>& points, size_t n,
                                              int dim, int K, int iters, Rng rng) {
    std::vector<double> book(static_cast<size_t>(K) * dim, 0.0);
    std::vector<double> d2(n);  // squared distance to the nearest chosen centroid
    for (size_t i = 0; i < n; ++i) {
        const double* x = points.data() + i * dim;
        double s = 0.0;
        for (int d = 0; d < dim; ++d) s += x[d] * x[d];
        d2[i] = s;
    }
    for (int c = 1; c < K; ++c) {
        double total = 0.0;
        for (size_t i = 0; i < n; ++i) total += d2[i];
        if (total <= 0.0) break;  // every point already sits on a centroid
        const double target = rng.uniform() * total;
        size_t pick = n - 1;
        double cum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            cum += d2[i];
            if (cum >= target) {
                pick = i;
                break;
            }
        }
        double* cv = book.data() + static_cast<size_t>(c) * dim;
        const double* x = points.data() + pick * dim;
        std::copy(x, x + dim, cv);
        for (size_t i = 0; i < n; ++i) {
            const double* p = points.data() + i * dim;
            double s = 0.0;
            for (int d = 0; d < dim; ++d) {
                const double diff = p[d] - cv[d];
                s += diff * diff;
            }
            d2[i] = std::min(d2[i], s);
        }
    }

    std::vector<uint32_t> assign(n, 0);
    std::vector<uint32_t> prev_assign;
    for (int it = 0; it < iters; ++it) {
        const std::vector<double> code_sq = code_norms_sq(book, K, dim);
        std::vector<double> far(n, 0.0);  // ||x - centroid(x)||^2, for reseeding
        parallel_for(n, [&](size_t i0, size_t i1) {
            for (size_t i = i0; i < i1; ++i) {
                const double* x = points.data() + i * dim;
                const uint32_t c = nearest_code(x, book, code_sq, K, dim);
                assign[i] = c;
                const double* cv = book.data() + static_cast<size_t>(c) * dim;
                double s = 0.0;
                for (int d = 0; d < dim; ++d) {
                    const double diff = x[d] - cv[d];
                    s += diff * diff;
                }
                far[i] = s;
            }
        });

        std::vector<double> sums(static_cast<size_t>(K) * dim, 0.0);
        std::vector<size_t> counts(K, 0);
        for (size_t i = 0; i < n; ++i) {
            const uint32_t c = assign[i];
            ++counts[c];
            if (c == 0) continue;
            const double* x = points.data() + i * dim;
            double* s = sums.data() + static_cast<size_t>(c) * dim;
            for (int d = 0; d < dim; ++d) s[d] += x[d];
        }
        for (int c = 1; c < K; ++c) {
            double* cv = book.data() + static_cast<size_t>(c) * dim;
            if (counts[c] > 0) {
                const double inv = 1.0 / static_cast<double>(counts[c]);
                const double* s = sums.data() + static_cast<size_t>(c) * dim;
                for (int d = 0; d < dim; ++d) cv[d] = s[d] * inv;
            } else {
                size_t worst = 0;
                for (size_t i = 1; i < n; ++i)
                    if (far[i] > far[worst]) worst = i;
                if (far[worst] <= 0.0) continue;  // nothing left to split off
                const double* x = points.data() + worst * dim;
                std::copy(x, x + dim, cv);
                far[worst] = -1.0;  // next empty cluster takes the next-farthest point
            }
        }
        if (assign == prev_assign) break;
        prev_assign = assign;
    }
    return book;
}

}  // namespace detail

constexpr int kRvqDefaultIters = 25;
constexpr uint64_t kRvqDefaultSeed = 0x5eed0001ULL;

// Greedy residual k-means. Each book is fit to the residual left by the
// previous books, then committed; codebooks are rounded to float32 so the
// in-memory result matches a save/load round trip bit for bit.
inline RvqCodebooks train_rvq(const FrameMatrix& frames, const CodecConfig& cfg,
                              int iters = kRvqDefaultIters, uint64_t seed = kRvqDefaultSeed) {
    cfg.validate();
    if (frames.dim != cfg.latent_dim) throw ConfigError("train_rvq: latent dim mismatch");
    const size_t n = frames.n_frames;
    const int K = cfg.codebook_size;
    const int dim = cfg.latent_dim;
    if (n < static_cast<size_t>(K) * 4)
        throw DataError("train_rvq: " + std::to_string(n) + " frames is too few for K=" +
                        std::to_string(K) + " (need at least 4 per code)");
    if (iters < 1) throw ConfigError("train_rvq: iters must be positive");

    RvqCodebooks cb;
    cb.n_codebooks = cfg.n_codebooks;
    cb.codebook_size = K;
    cb.latent_dim = dim;

    Sha256 hasher;
    uint64_t shape[2] = {static_cast<uint64_t>(n), static_cast<uint64_t>(dim)};
    hasher.update(shape, sizeof shape);
    std::vector<float> row32(dim);
    for (size_t f = 0; f < n; ++f) {
        const double* r = frames.row(f);
        for (int d = 0; d < dim; ++d) row32[d] = static_cast<float>(r[d]);
        hasher.update(row32.data(), row32.size() * sizeof(float));
    }
    cb.fingerprint = hasher.finish();

    Rng rng(seed);
    std::vector<double> residual(frames.data);
    for (int l = 0; l < cfg.n_codebooks; ++l) {
        std::vector<double> book =
            detail::kmeans_frozen_zero(residual, n, dim, K, iters, rng.derive(l));
        // canonicalize to float32 so encode results match a reloaded file
        for (double& v : book) v = static_cast<double>(static_cast<float>(v));
        const std::vector<double> code_sq = detail::code_norms_sq(book, K, dim);

        parallel_for(n, [&](size_t i0, size_t i1) {
            for (size_t i = i0; i < i1; ++i) {
                double* r = residual.data() + i * dim;
                const uint32_t c = detail::nearest_code(r, book, code_sq, K, dim);
                const double* cv = book.data() + static_cast<size_t>(c) * dim;
                for (int d = 0; d < dim; ++d) r[d] -= cv[d];
            }
        });
        double mse = 0.0;
        for (size_t i = 0; i < n * static_cast<size_t>(dim); ++i) mse += residual[i] * residual[i];
        cb.train_residual_mse.push_back(mse / (static_cast<double>(n) * dim));
        cb.books.push_back(std::move(book));
    }
    cb.validate();
    return cb;
}

inline TokenGrid rvq_encode(const FrameMatrix& frames, const RvqCodebooks& cb) {
    cb.validate();
    if (frames.dim != cb.latent_dim) throw ConfigError("rvq_encode: latent dim mismatch");
    const int L = cb.n_codebooks;
    const int K = cb.codebook_size;
    const int dim = cb.latent_dim;

    TokenGrid grid;
    grid.n_frames = frames.n_frames;
    grid.n_codebooks = L;
    grid.source_samples = frames.source_samples;
    grid.codes.resize(frames.n_frames * static_cast<size_t>(L));

    std::vector<std::vector<double>> code_sq(L);
    for (int l = 0; l < L; ++l) code_sq[l] = detail::code_norms_sq(cb.books[l], K, dim);

    parallel_for(frames.n_frames, [&](size_t f0, size_t f1) {
        std::vector<double> r(dim);
        for (size_t f = f0; f < f1; ++f) {
            std::copy(frames.row(f), frames.row(f) + dim, r.begin());
            for (int l = 0; l < L; ++l) {
                const uint32_t c = detail::nearest_code(r.data(), cb.books[l], code_sq[l], K, dim);
                grid.codes[f * L + l] = c;
                const double* cv = cb.code(l, c);
                for (int d = 0; d < dim; ++d) r[d] -= cv[d];
            }
        }
    });
    return grid;
}

inline FrameMatrix rvq_decode(const TokenGrid& grid, const RvqCodebooks& cb) {
    cb.validate();
    if (grid.n_codebooks != cb.n_codebooks) throw ConfigError("rvq_decode: book count mismatch");
    const int L = cb.n_codebooks;
    const int dim = cb.latent_dim;

    FrameMatrix frames;
    frames.n_frames = grid.n_frames;
    frames.dim = dim;
    frames.source_samples = grid.source_samples;
    frames.data.assign(grid.n_frames * static_cast<size_t>(dim), 0.0);

    for (size_t f = 0; f < grid.n_frames; ++f) {
        double* out = frames.row(f);
        for (int l = 0; l < L; ++l) {
            const uint32_t c = grid.at(f, l);
            if (c >= static_cast<uint32_t>(cb.codebook_size))
                throw IndexError("rvq_decode: code " + std::to_string(c) + " out of range for K=" +
                                 std::to_string(cb.codebook_size));
            const double* cv = cb.code(l, c);
            for (int d = 0; d < dim; ++d) out[d] += cv[d];
        }
    }
    return frames;
}

// --- RVQ1 container ---------------------------------------------------------
//
//   magic "RVQ1" | u32 version=1 | u32 L | u32 K | u32 latent_dim
//   float32 LE data, book-major [L][K][dim]
//   32-byte training-set fingerprint
// All integers little-endian.

constexpr uint32_t kRvqFileVersion = 1;

inline void save_codebooks(const std::string& path, const RvqCodebooks& cb) {
    cb.validate();
    io::AtomicFile file(path);
    auto& out = file.stream();
    io::write_bytes(out, "RVQ1", 4);
    io::write_le<uint32_t>(out, kRvqFileVersion);
    io::write_le<uint32_t>(out, static_cast<uint32_t>(cb.n_codebooks));
    io::write_le<uint32_t>(out, static_cast<uint32_t>(cb.codebook_size));
    io::write_le<uint32_t>(out, static_cast<uint32_t>(cb.latent_dim));
    for (const auto& book : cb.books)
        for (double v : book) io::write_le<float>(out, static_cast<float>(v));
    io::write_bytes(out, cb.fingerprint.data(), cb.fingerprint.size());
    file.commit();
}

inline RvqCodebooks load_codebooks(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[4];
    io::read_bytes(in, magic, 4, "RVQ1 magic");
    if (std::memcmp(magic, "RVQ1", 4) != 0)
        throw FormatError(path + ": not an RVQ1 codebook file");
    const uint32_t version = io::read_le<uint32_t>(in, "RVQ1 version");
    if (version != kRvqFileVersion)
        throw FormatError(path + ": unsupported RVQ1 version " + std::to_string(version));
    RvqCodebooks cb;
    cb.n_codebooks = static_cast<int>(io::read_le<uint32_t>(in, "RVQ1 n_codebooks"));
    cb.codebook_size = static_cast<int>(io::read_le<uint32_t>(in, "RVQ1 codebook_size"));
    cb.latent_dim = static_cast<int>(io::read_le<uint32_t>(in, "RVQ1 latent_dim"));
    if (cb.n_codebooks < 1 || cb.n_codebooks > 64 || cb.codebook_size < 2 ||
        cb.codebook_size > (1 << 20) || cb.latent_dim < 1 || cb.latent_dim > (1 << 20))
        throw FormatError(path + ": implausible RVQ1 header");
    cb.books.resize(cb.n_codebooks);
    for (auto& book : cb.books) {
        book.resize(static_cast<size_t>(cb.codebook_size) * cb.latent_dim);
        for (double& v : book) v = static_cast<double>(io::read_le<float>(in, "RVQ1 codes"));
    }
    io::read_bytes(in, cb.fingerprint.data(), cb.fingerprint.size(), "RVQ1 fingerprint");
    if (in.peek() != std::char_traits<char>::eof())
        throw FormatError(path + ": trailing bytes after RVQ1 payload");
    cb.validate();
    return cb;
}

// The codec configuration implied by a codebook file. The analysis transform
// is fully determined by latent_dim (frame_len = latent_dim, hop = half) plus
// the default projection seed; RVQ1 stores no seed because the recipe treats
// the mixing as a fixed constant.
inline CodecConfig config_from_books(const RvqCodebooks& cb) {
    CodecConfig cfg;
    cfg.frame_len = cb.latent_dim;
    cfg.latent_dim = cb.latent_dim;
    cfg.hop = cb.latent_dim / 2;
    cfg.n_codebooks = cb.n_codebooks;
    cfg.codebook_size = cb.codebook_size;
    cfg.validate();
    return cfg;
}

}  // namespace dacse
