// Vocabulary layout, stream flattening, training-example assembly, and the
// DSE1 dataset container.

#include <catch2/catch_amalgamated.hpp>

#include "dacse/token/dataset.hpp"
#include "dacse/token/flatten.hpp"
#include "dacse/token/vocab.hpp"

#include "testutil.hpp"

using namespace dacse;
using testutil::ScratchDir;

namespace {

TokenGrid random_grid(size_t n_frames, int L, int K, uint64_t seed) {
    TokenGrid g;
    g.n_frames = n_frames;
    g.n_codebooks = L;
    Rng rng(seed);
    for (size_t i = 0; i < n_frames * static_cast<size_t>(L); ++i)
        g.codes.push_back(static_cast<uint32_t>(rng.uniform_int(K)));
    return g;
}

}  // namespace

TEST_CASE("vocab layout id arithmetic") {
    const VocabLayout v{4, 64};
    REQUIRE(v.base_size() == 256);
    REQUIRE(v.vocab_size() == 260);
    REQUIRE(v.start_clean() == 256);
    REQUIRE(v.bos() == 257);
    REQUIRE(v.eos() == 258);
    REQUIRE(v.pad() == 259);

    for (int l = 0; l < 4; ++l)
        for (uint32_t c = 0; c < 64; c += 13) {
            const uint32_t id = v.id_of(l, c);
            REQUIRE(v.book_of(id) == l);
            REQUIRE(v.code_of(id) == c);
            REQUIRE(!v.is_special(id));
        }
    REQUIRE(v.is_special(v.eos()));
}

TEST_CASE("flatten and unflatten are inverse bijections") {
    const VocabLayout v{4, 64};
    const TokenGrid grid = random_grid(37, 4, 64, 3);
    const TokenSequence seq = flatten(grid, v);
    REQUIRE(seq.ids.size() == 37 * 4);
    REQUIRE(seq.n_frames == 37);

    // Time-major: position p carries book p % L.
    for (size_t p = 0; p < seq.ids.size(); ++p)
        REQUIRE(v.book_of(seq.ids[p]) == static_cast<int>(p % 4));

    const TokenGrid back = unflatten(seq.ids, v);
    REQUIRE(back.n_frames == grid.n_frames);
    REQUIRE(back.codes == grid.codes);
}

TEST_CASE("unflatten validates stream shape and content") {
    const VocabLayout v{4, 64};
    const TokenSequence seq = flatten(random_grid(5, 4, 64, 4), v);

    SECTION("ragged length") {
        auto ids = seq.ids;
        ids.pop_back();
        REQUIRE_THROWS_AS(unflatten(ids, v), StreamCorruptionError);
    }
    SECTION("special token inside the stream") {
        auto ids = seq.ids;
        ids[7] = v.eos();
        REQUIRE_THROWS_AS(unflatten(ids, v), StreamCorruptionError);
    }
    SECTION("book out of phase") {
        auto ids = seq.ids;
        std::swap(ids[0], ids[1]);
        REQUIRE_THROWS_AS(unflatten(ids, v), StreamCorruptionError);
    }
    SECTION("id beyond vocab") {
        auto ids = seq.ids;
        ids[3] = v.vocab_size() + 5;
        REQUIRE_THROWS_AS(unflatten(ids, v), StreamCorruptionError);
    }
}

TEST_CASE("build_example lays out bos noisy start_clean clean eos") {
    const VocabLayout v{4, 64};
    const TokenGrid noisy = random_grid(11, 4, 64, 5);
    const TokenGrid clean = random_grid(11, 4, 64, 6);
    const TrainingExample ex = build_example(noisy, clean, v, 2048);

    const size_t fl = 11 * 4;
    REQUIRE(ex.ids.size() == 2 * fl + 3);
    REQUIRE(ex.ids.front() == v.bos());
    REQUIRE(ex.ids[fl + 1] == v.start_clean());
    REQUIRE(ex.ids.back() == v.eos());
    REQUIRE(ex.n_frames(v) == 11);

    const std::vector<uint32_t> noisy_ids(ex.ids.begin() + 1, ex.ids.begin() + 1 + fl);
    REQUIRE(unflatten(noisy_ids, v).codes == noisy.codes);
    const std::vector<uint32_t> clean_ids(ex.ids.begin() + fl + 2, ex.ids.end() - 1);
    REQUIRE(unflatten(clean_ids, v).codes == clean.codes);

    SECTION("frame-count mismatch is rejected") {
        REQUIRE_THROWS_AS(build_example(random_grid(10, 4, 64, 7), clean, v, 2048), LengthError);
    }
    SECTION("context overflow is rejected") {
        REQUIRE_THROWS_AS(build_example(noisy, clean, v, 2 * fl + 2), ContextOverflowError);
    }
}

TEST_CASE("dataset file round-trips records exactly") {
    ScratchDir dir("dataset_roundtrip");
    const VocabLayout v{4, 64};
    const auto path = (dir / "toy.dse1").string();

    std::vector<TrainingExample> in;
    for (int i = 0; i < 17; ++i) {
        const TrainingExample ex =
            build_example(random_grid(3 + i, 4, 64, 100 + i), random_grid(3 + i, 4, 64, 200 + i),
                          v, 4096);
        in.push_back(ex);
    }
    in[4].task_label = 2;
    in[9].seed = 0xdeadbeef;

    {
        DatasetWriter w(path, v, 86.1328125);
        for (const auto& ex : in) w.append(ex);
        w.commit();
    }

    DatasetHeader header;
    const std::vector<TrainingExample> out = read_dataset(path, &header);
    REQUIRE(header.n_records == in.size());
    REQUIRE(header.vocab_size == v.vocab_size());
    REQUIRE(out.size() == in.size());
    for (size_t i = 0; i < in.size(); ++i) {
        REQUIRE(out[i].ids == in[i].ids);
        REQUIRE(out[i].task_label == in[i].task_label);
        REQUIRE(out[i].seed == in[i].seed);
    }
}

TEST_CASE("dataset reader rejects malformed files") {
    ScratchDir dir("dataset_bad");
    const VocabLayout v{2, 16};
    const auto path = (dir / "bad.dse1").string();
    {
        DatasetWriter w(path, v, 86.0);
        TrainingExample ex;
        ex.ids = {0, 16, 1, 17};
        w.append(ex);
        w.commit();
    }

    SECTION("id outside the vocab") {
        auto bytes = io::read_file(path);
        // Record payload starts after the 32-byte header + label + length;
        // overwrite the first id with an out-of-range value.
        const size_t id_off = 32 + 1 + 4;
        bytes[id_off] = 0xff;
        bytes[id_off + 1] = 0xff;
        {
            io::AtomicFile f(path);
            io::write_bytes(f.stream(), bytes.data(), bytes.size());
            f.commit();
        }
        DatasetReader r(path);
        TrainingExample ex;
        REQUIRE_THROWS_AS(r.next(ex), FormatError);
    }

    SECTION("truncated record") {
        auto bytes = io::read_file(path);
        bytes.resize(bytes.size() - 3);
        {
            io::AtomicFile f(path);
            io::write_bytes(f.stream(), bytes.data(), bytes.size());
            f.commit();
        }
        DatasetReader r(path);
        TrainingExample ex;
        REQUIRE_THROWS_AS(r.next(ex), IoError);
    }

    SECTION("writer refuses empty records") {
        DatasetWriter w((dir / "w2.dse1").string(), v, 86.0);
        TrainingExample ex;
        REQUIRE_THROWS_AS(w.append(ex), DegenerateError);
    }
}

TEST_CASE("uncommitted dataset writer leaves no file") {
    ScratchDir dir("dataset_atomic");
    const auto path = (dir / "gone.dse1").string();
    {
        DatasetWriter w(path, VocabLayout{2, 16}, 86.0);
        TrainingExample ex;
        ex.ids = {0, 16};
        w.append(ex);
        // no commit: destructor must discard the temporary
    }
    REQUIRE(!std::filesystem::exists(path));
    REQUIRE(!std::filesystem::exists(path + ".tmp"));
}
