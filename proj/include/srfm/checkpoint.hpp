#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include "srfm/config.hpp"
#include "srfm/params.hpp"

namespace srfm {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Everything a run needs to resume or score: the model configuration, the
// full parameter store with levels and freeze flags, and training metadata.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;
    ModelConfig cfg;
    ParameterStore store;
    long long step = 0;
    std::uint64_t seed = 0;
};

namespace ckpt_detail {

constexpr char kMagic[4] = {'S', 'R', 'F', 'M'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
    return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_pod(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, const char* what) {
    auto len = read_pod<std::uint32_t>(in, what);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
    return s;
}

}  // namespace ckpt_detail

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    using namespace ckpt_detail;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 4);
    write_pod(out, Checkpoint::kVersion);
    write_pod(out, ck.seed);
    write_pod(out, static_cast<std::int64_t>(ck.step));
    write_string(out, to_json(ck.cfg).dump());
    write_pod(out, static_cast<std::uint64_t>(ck.store.size()));
    for (const auto& [name, p] : ck.store) {
        write_string(out, name);
        write_pod(out, static_cast<std::uint8_t>(p.level));
        write_pod(out, static_cast<std::uint8_t>(p.frozen ? 1 : 0));
        write_pod(out, static_cast<std::uint32_t>(p.value.shape.size()));
        for (int d : p.value.shape) write_pod(out, static_cast<std::int32_t>(d));
        out.write(reinterpret_cast<const char*>(p.value.data.data()),
                  static_cast<std::streamsize>(p.value.data.size() * sizeof(double)));
    }
    if (!out) throw CheckpointError("write failure on checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    using namespace ckpt_detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != std::string(kMagic, 4))
        throw CheckpointError("not a checkpoint file: " + path);
    auto version = read_pod<std::uint32_t>(in, "version");
    if (version != Checkpoint::kVersion)
        throw CheckpointError("checkpoint version mismatch: file has " + std::to_string(version) +
                              ", expected " + std::to_string(Checkpoint::kVersion));
    Checkpoint ck;
    ck.seed = read_pod<std::uint64_t>(in, "seed");
    ck.step = read_pod<std::int64_t>(in, "step");
    try {
        ck.cfg = model_config_from_json(json::parse(read_string(in, "config")));
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("corrupt embedded config: ") + e.what());
    }
    auto count = read_pod<std::uint64_t>(in, "tensor count");
    for (std::uint64_t t = 0; t < count; ++t) {
        std::string name = read_string(in, "tensor name");
        auto level = read_pod<std::uint8_t>(in, "level");
        if (level > 2) throw CheckpointError("corrupt level byte for tensor " + name);
        auto frozen = read_pod<std::uint8_t>(in, "frozen flag");
        auto ndim = read_pod<std::uint32_t>(in, "rank");
        std::vector<int> shape;
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            auto dim = read_pod<std::int32_t>(in, "shape");
            if (dim <= 0) throw CheckpointError("corrupt shape for tensor " + name);
            shape.push_back(dim);
            numel *= static_cast<std::size_t>(dim);
        }
        Tensor v = Tensor::zeros(shape);
        in.read(reinterpret_cast<char*>(v.data.data()),
                static_cast<std::streamsize>(numel * sizeof(double)));
        if (!in) throw CheckpointError("checkpoint truncated in tensor " + name);
        ck.store.add(name, std::move(v), static_cast<Level>(level), frozen != 0);
    }
    return ck;
}

}  // namespace srfm
