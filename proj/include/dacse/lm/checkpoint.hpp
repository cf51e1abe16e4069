#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dacse/common.hpp"
#include "dacse/lm/adamw.hpp"
#include "dacse/lm/model.hpp"
#include "dacse/sha256.hpp"

namespace dacse {

// --- DSE1CKPT container ------------------------------------------------------
//
//   magic "DSE1CKPT" | u32 version=1 | u32 json_len | json bytes
//   u32 n_model_tensors | tensors | u32 n_opt_tensors | tensors | u64 opt_step
//   tensor: u16 name_len | name | u8 dtype (0 = f32) | u8 rank | u64 dims[rank]
//           | f32 LE data
// Optimizer tensors are named opt.m.<tensor> / opt.v.<tensor>. The global
// step lives in the JSON meta; the trailing u64 is the optimizer's own step
// counter (bias correction), which stage-2 runs keep per-task.

constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    ModelConfig model;
    int L = 0;  // vocab geometry, cross-checked against the codec at enhance time
    int K = 0;
    std::string codec_fingerprint_hex;  // fingerprint of the codec used to tokenize
    std::string stage = "stage1";
    std::string parent_hex;  // sha256 of the stage-1 checkpoint file (stage2 only)
    uint64_t step = 0;
};

namespace detail {

inline nlohmann::json meta_to_json(const CheckpointMeta& meta) {
    const ModelConfig& m = meta.model;
    return nlohmann::json{
        {"model",
         {{"vocab_size", m.vocab_size},
          {"d_model", m.d_model},
          {"n_layers", m.n_layers},
          {"n_heads", m.n_heads},
          {"n_kv_heads", m.n_kv_heads},
          {"d_ff", m.d_ff},
          {"context_len", m.context_len},
          {"rope_theta", m.rope_theta},
          {"profile", m.profile}}},
        {"vocab", {{"L", meta.L}, {"K", meta.K}}},
        {"codec_fingerprint", meta.codec_fingerprint_hex},
        {"stage", meta.stage},
        {"parent", meta.parent_hex},
        {"step", meta.step}};
}

inline CheckpointMeta meta_from_json(const nlohmann::json& j) {
    CheckpointMeta meta;
    const auto& m = j.at("model");
    meta.model.vocab_size = m.at("vocab_size").get<int>();
    meta.model.d_model = m.at("d_model").get<int>();
    meta.model.n_layers = m.at("n_layers").get<int>();
    meta.model.n_heads = m.at("n_heads").get<int>();
    meta.model.n_kv_heads = m.at("n_kv_heads").get<int>();
    meta.model.d_ff = m.at("d_ff").get<int>();
    meta.model.context_len = m.at("context_len").get<int>();
    meta.model.rope_theta = m.at("rope_theta").get<double>();
    meta.model.profile = m.at("profile").get<std::string>();
    meta.L = j.at("vocab").at("L").get<int>();
    meta.K = j.at("vocab").at("K").get<int>();
    meta.codec_fingerprint_hex = j.at("codec_fingerprint").get<std::string>();
    meta.stage = j.value("stage", "stage1");
    meta.parent_hex = j.value("parent", "");
    meta.step = j.at("step").get<uint64_t>();
    return meta;
}

template <typename T>
void write_tensor(std::ostream& out, const std::string& name, const std::vector<size_t>& dims,
                  const std::vector<T>& data) {
    io::write_le<uint16_t>(out, static_cast<uint16_t>(name.size()));
    io::write_bytes(out, name.data(), name.size());
    io::write_le<uint8_t>(out, 0);  // dtype f32
    io::write_le<uint8_t>(out, static_cast<uint8_t>(dims.size()));
    for (size_t d : dims) io::write_le<uint64_t>(out, static_cast<uint64_t>(d));
    for (const T& v : data) io::write_le<float>(out, static_cast<float>(v));
}

struct TensorHeader {
    std::string name;
    std::vector<uint64_t> dims;
    size_t count;
};

inline TensorHeader read_tensor_header(std::istream& in, const std::string& path) {
    TensorHeader h;
    const uint16_t name_len = io::read_le<uint16_t>(in, "tensor name length");
    h.name.resize(name_len);
    io::read_bytes(in, h.name.data(), name_len, "tensor name");
    const uint8_t dtype = io::read_le<uint8_t>(in, "tensor dtype");
    if (dtype != 0) throw FormatError(path + ": unsupported tensor dtype for " + h.name);
    const uint8_t rank = io::read_le<uint8_t>(in, "tensor rank");
    if (rank == 0 || rank > 4) throw FormatError(path + ": implausible rank for " + h.name);
    h.count = 1;
    for (int i = 0; i < rank; ++i) {
        h.dims.push_back(io::read_le<uint64_t>(in, "tensor dims"));
        h.count *= h.dims.back();
    }
    if (h.count == 0 || h.count > (1ull << 32))
        throw FormatError(path + ": implausible tensor size for " + h.name);
    return h;
}

template <typename T>
void read_into(std::istream& in, const std::string& path, const TensorHeader& h,
               std::vector<T>& dst) {
    if (h.count != dst.size())
        throw FormatError(path + ": tensor " + h.name + " has " + std::to_string(h.count) +
                          " elements, expected " + std::to_string(dst.size()));
    for (T& v : dst) {
        const float f = io::read_le<float>(in, "tensor data");
        if (!std::isfinite(f)) throw FormatError(path + ": non-finite value in tensor " + h.name);
        v = static_cast<T>(f);
    }
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const Weights<T>& w, const CheckpointMeta& meta,
                     const AdamState<T>* opt = nullptr) {
    io::AtomicFile file(path);
    auto& out = file.stream();
    io::write_bytes(out, "DSE1CKPT", 8);
    io::write_le<uint32_t>(out, kCheckpointVersion);
    const std::string json = detail::meta_to_json(meta).dump();
    io::write_le<uint32_t>(out, static_cast<uint32_t>(json.size()));
    io::write_bytes(out, json.data(), json.size());

    uint32_t n_tensors = 0;
    w.for_each_tensor([&](const std::string&, const std::vector<size_t>&,
                          const std::vector<T>&) { ++n_tensors; });
    io::write_le<uint32_t>(out, n_tensors);
    w.for_each_tensor([&](const std::string& name, const std::vector<size_t>& dims,
                          const std::vector<T>& data) {
        detail::write_tensor(out, name, dims, data);
    });

    io::write_le<uint32_t>(out, opt ? 2 * n_tensors : 0);
    if (opt) {
        opt->m.for_each_tensor([&](const std::string& name, const std::vector<size_t>& dims,
                                   const std::vector<T>& data) {
            detail::write_tensor(out, "opt.m." + name, dims, data);
        });
        opt->v.for_each_tensor([&](const std::string& name, const std::vector<size_t>& dims,
                                   const std::vector<T>& data) {
            detail::write_tensor(out, "opt.v." + name, dims, data);
        });
    }
    io::write_le<uint64_t>(out, opt ? opt->step : meta.step);
    file.commit();
}

template <typename T>
struct LoadedCheckpoint {
    Weights<T> weights;
    CheckpointMeta meta;
    bool has_optimizer = false;
    AdamState<T> opt;
};

template <typename T = float>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[8];
    io::read_bytes(in, magic, 8, "DSE1CKPT magic");
    if (std::memcmp(magic, "DSE1CKPT", 8) != 0)
        throw FormatError(path + ": not a DSE1CKPT checkpoint");
    const uint32_t version = io::read_le<uint32_t>(in, "checkpoint version");
    if (version != kCheckpointVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    const uint32_t json_len = io::read_le<uint32_t>(in, "config length");
    if (json_len == 0 || json_len > (1u << 20))
        throw FormatError(path + ": implausible config block");
    std::string json(json_len, '\0');
    io::read_bytes(in, json.data(), json_len, "config json");

    LoadedCheckpoint<T> ck;
    try {
        ck.meta = detail::meta_from_json(nlohmann::json::parse(json));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": bad config json: " + e.what());
    }
    ck.meta.model.validate();
    ck.weights = Weights<T>::zeros(ck.meta.model);

    std::map<std::string, std::vector<T>*> slots;
    ck.weights.for_each_tensor([&](const std::string& name, const std::vector<size_t>&,
                                   std::vector<T>& data) { slots[name] = &data; });

    const uint32_t n_model = io::read_le<uint32_t>(in, "model tensor count");
    if (n_model != slots.size())
        throw FormatError(path + ": expected " + std::to_string(slots.size()) +
                          " model tensors, file has " + std::to_string(n_model));
    for (uint32_t i = 0; i < n_model; ++i) {
        const auto h = detail::read_tensor_header(in, path);
        auto it = slots.find(h.name);
        if (it == slots.end()) throw FormatError(path + ": unknown tensor " + h.name);
        detail::read_into(in, path, h, *it->second);
    }

    const uint32_t n_opt = io::read_le<uint32_t>(in, "optimizer tensor count");
    if (n_opt != 0) {
        if (n_opt != 2 * n_model)
            throw FormatError(path + ": expected 0 or " + std::to_string(2 * n_model) +
                              " optimizer tensors, file has " + std::to_string(n_opt));
        ck.has_optimizer = true;
        ck.opt = AdamState<T>::init(ck.meta.model);
        std::map<std::string, std::vector<T>*> opt_slots;
        ck.opt.m.for_each_tensor([&](const std::string& name, const std::vector<size_t>&,
                                     std::vector<T>& data) { opt_slots["opt.m." + name] = &data; });
        ck.opt.v.for_each_tensor([&](const std::string& name, const std::vector<size_t>&,
                                     std::vector<T>& data) { opt_slots["opt.v." + name] = &data; });
        for (uint32_t i = 0; i < n_opt; ++i) {
            const auto h = detail::read_tensor_header(in, path);
            auto it = opt_slots.find(h.name);
            if (it == opt_slots.end()) throw FormatError(path + ": unknown tensor " + h.name);
            detail::read_into(in, path, h, *it->second);
        }
    }

    const uint64_t opt_step = io::read_le<uint64_t>(in, "optimizer step counter");
    if (ck.has_optimizer) ck.opt.step = opt_step;
    if (in.peek() != std::char_traits<char>::eof())
        throw FormatError(path + ": trailing bytes after checkpoint payload");
    return ck;
}

}  // namespace dacse
