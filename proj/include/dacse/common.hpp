#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dacse {

// Domain error hierarchy. Every throwing operation in the library uses one of
// these; the CLI maps them to exit code 1.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define DACSE_DEFINE_ERROR(NAME)                                   \
    class NAME : public Error {                                    \
    public:                                                        \
        explicit NAME(const std::string& what) : Error(what) {}    \
    }

DACSE_DEFINE_ERROR(FormatError);
DACSE_DEFINE_ERROR(UnsupportedError);
DACSE_DEFINE_ERROR(IoError);
DACSE_DEFINE_ERROR(RateMismatchError);
DACSE_DEFINE_ERROR(AssetError);
DACSE_DEFINE_ERROR(DegenerateNoiseError);
DACSE_DEFINE_ERROR(TooShortError);
DACSE_DEFINE_ERROR(DataError);
DACSE_DEFINE_ERROR(IndexError);
DACSE_DEFINE_ERROR(StreamCorruptionError);
DACSE_DEFINE_ERROR(ContextOverflowError);
DACSE_DEFINE_ERROR(ConfigError);
DACSE_DEFINE_ERROR(DegenerateBatchError);
DACSE_DEFINE_ERROR(NumericsError);
DACSE_DEFINE_ERROR(DivergenceError);
DACSE_DEFINE_ERROR(LengthError);
DACSE_DEFINE_ERROR(DegenerateError);

#undef DACSE_DEFINE_ERROR

namespace io {

// Little-endian binary stream helpers. All on-disk formats in this project are
// little-endian regardless of host order.

inline void write_bytes(std::ostream& out, const void* data, size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw IoError("short write");
}

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (sizeof(T) > 1) {
        unsigned one = 1;
        if (*reinterpret_cast<unsigned char*>(&one) == 0) {  // big-endian host
            for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        }
    }
    write_bytes(out, bytes, sizeof(T));
}

inline void read_bytes(std::istream& in, void* data, size_t n, const char* what) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n)
        throw FormatError(std::string("truncated input while reading ") + what);
}

template <typename T>
T read_le(std::istream& in, const char* what) {
    unsigned char bytes[sizeof(T)];
    read_bytes(in, bytes, sizeof(T), what);
    if constexpr (sizeof(T) > 1) {
        unsigned one = 1;
        if (*reinterpret_cast<unsigned char*>(&one) == 0) {
            for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        }
    }
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

// Writes a file atomically: stream into "<path>.tmp", rename into place on
// success. No subcommand ever leaves a partial artifact behind.
class AtomicFile {
public:
    explicit AtomicFile(const std::filesystem::path& path)
        : final_path_(path), tmp_path_(path.string() + ".tmp") {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        stream_.open(tmp_path_, std::ios::binary | std::ios::trunc);
        if (!stream_) throw IoError("cannot open for writing: " + tmp_path_.string());
    }

    AtomicFile(const AtomicFile&) = delete;
    AtomicFile& operator=(const AtomicFile&) = delete;

    ~AtomicFile() {
        if (!committed_) {
            stream_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_path_, ec);
        }
    }

    std::ofstream& stream() { return stream_; }

    void commit() {
        stream_.flush();
        if (!stream_) throw IoError("write failed: " + tmp_path_.string());
        stream_.close();
        std::filesystem::rename(tmp_path_, final_path_);
        committed_ = true;
    }

private:
    std::filesystem::path final_path_;
    std::filesystem::path tmp_path_;
    std::ofstream stream_;
    bool committed_ = false;
};

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    in.seekg(0, std::ios::end);
    auto size = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<unsigned char> buf(static_cast<size_t>(size));
    if (size > 0) in.read(reinterpret_cast<char*>(buf.data()), size);
    if (!in) throw IoError("read failed: " + path.string());
    return buf;
}

}  // namespace io
}  // namespace dacse
