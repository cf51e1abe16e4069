#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dacse/common.hpp"
#include "dacse/token/flatten.hpp"
#include "dacse/token/vocab.hpp"

namespace dacse {

// --- DSE1 token dataset container -------------------------------------------
//
//   magic "DSE1" | u32 version=1 | u32 L | u32 K | u32 frame_rate_mhz
//   u32 vocab_size | u64 n_records
//   per record: u8 task_label | u32 n_tokens | u32 ids[n_tokens] | u64 seed
// All integers little-endian. Records are fixed-order, so identical example
// sequences produce identical bytes.

constexpr uint32_t kDatasetVersion = 1;

struct DatasetHeader {
    uint32_t L = 0;
    uint32_t K = 0;
    uint32_t frame_rate_mhz = 0;  // frame rate in millihertz
    uint32_t vocab_size = 0;
    uint64_t n_records = 0;

    VocabLayout vocab() const {
        VocabLayout v;
        v.L = static_cast<int>(L);
        v.K = static_cast<int>(K);
        v.validate();
        return v;
    }
};

inline uint32_t frame_rate_to_mhz(double frame_rate_hz) {
    return static_cast<uint32_t>(std::llround(frame_rate_hz * 1000.0));
}

// Streaming writer. The record count is back-patched just before commit, so an
// interrupted run leaves only a .tmp file behind, never a readable partial
// dataset.
class DatasetWriter {
public:
    DatasetWriter(const std::string& path, const VocabLayout& layout, double frame_rate_hz)
        : file_(path), layout_(layout) {
        layout_.validate();
        auto& out = file_.stream();
        io::write_bytes(out, "DSE1", 4);
        io::write_le<uint32_t>(out, kDatasetVersion);
        io::write_le<uint32_t>(out, static_cast<uint32_t>(layout_.L));
        io::write_le<uint32_t>(out, static_cast<uint32_t>(layout_.K));
        io::write_le<uint32_t>(out, frame_rate_to_mhz(frame_rate_hz));
        io::write_le<uint32_t>(out, layout_.vocab_size());
        count_pos_ = out.tellp();
        io::write_le<uint64_t>(out, 0);  // n_records, patched in commit()
    }

    void append(const TrainingExample& ex) {
        if (ex.ids.empty()) throw DegenerateError("dataset: empty record");
        auto& out = file_.stream();
        io::write_le<uint8_t>(out, ex.task_label);
        io::write_le<uint32_t>(out, static_cast<uint32_t>(ex.ids.size()));
        for (uint32_t id : ex.ids) {
            if (id >= layout_.vocab_size())
                throw IndexError("dataset: id " + std::to_string(id) + " outside vocab");
            io::write_le<uint32_t>(out, id);
        }
        io::write_le<uint64_t>(out, ex.seed);
        ++n_records_;
    }

    void commit() {
        auto& out = file_.stream();
        out.seekp(count_pos_);
        io::write_le<uint64_t>(out, n_records_);
        file_.commit();
    }

    uint64_t size() const { return n_records_; }

private:
    io::AtomicFile file_;
    VocabLayout layout_;
    std::streampos count_pos_;
    uint64_t n_records_ = 0;
};

// Streaming reader: header up front, then one record per next() call. Records
// never require loading the whole file.
class DatasetReader {
public:
    explicit DatasetReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open: " + path);
        char magic[4];
        io::read_bytes(in_, magic, 4, "DSE1 magic");
        if (std::memcmp(magic, "DSE1", 4) != 0)
            throw FormatError(path + ": not a DSE1 token dataset");
        const uint32_t version = io::read_le<uint32_t>(in_, "DSE1 version");
        if (version != kDatasetVersion)
            throw FormatError(path + ": unsupported DSE1 version " + std::to_string(version));
        header_.L = io::read_le<uint32_t>(in_, "DSE1 L");
        header_.K = io::read_le<uint32_t>(in_, "DSE1 K");
        header_.frame_rate_mhz = io::read_le<uint32_t>(in_, "DSE1 frame_rate");
        header_.vocab_size = io::read_le<uint32_t>(in_, "DSE1 vocab_size");
        header_.n_records = io::read_le<uint64_t>(in_, "DSE1 n_records");
        if (header_.L < 1 || header_.K < 2 ||
            header_.vocab_size != header_.L * header_.K + 4)
            throw FormatError(path + ": inconsistent DSE1 header");
    }

    const DatasetHeader& header() const { return header_; }

    // Reads the next record. Returns false at a clean end of file; a file that
    // ends mid-record (or holds fewer records than the header claims) throws.
    bool next(TrainingExample& ex) {
        if (read_ == header_.n_records) return false;
        ex.task_label = io::read_le<uint8_t>(in_, "record task_label");
        const uint32_t n_tokens = io::read_le<uint32_t>(in_, "record n_tokens");
        if (n_tokens == 0 || n_tokens > (1u << 24))
            throw FormatError(path_ + ": implausible record length " + std::to_string(n_tokens));
        ex.ids.resize(n_tokens);
        for (uint32_t& id : ex.ids) {
            id = io::read_le<uint32_t>(in_, "record ids");
            if (id >= header_.vocab_size)
                throw FormatError(path_ + ": record id " + std::to_string(id) + " outside vocab");
        }
        ex.seed = io::read_le<uint64_t>(in_, "record seed");
        ++read_;
        return true;
    }

private:
    std::string path_;
    std::ifstream in_;
    DatasetHeader header_;
    uint64_t read_ = 0;
};

inline void write_dataset(const std::string& path, const std::vector<TrainingExample>& examples,
                          const VocabLayout& layout, double frame_rate_hz) {
    DatasetWriter w(path, layout, frame_rate_hz);
    for (const auto& ex : examples) w.append(ex);
    w.commit();
}

inline std::vector<TrainingExample> read_dataset(const std::string& path,
                                                 DatasetHeader* header_out = nullptr) {
    DatasetReader r(path);
    if (header_out) *header_out = r.header();
    std::vector<TrainingExample> out;
    out.reserve(r.header().n_records);
    TrainingExample ex;
    while (r.next(ex)) out.push_back(ex);
    return out;
}

}  // namespace dacse
