#include "tgan/nn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

using nlohmann::json;

namespace tgan::nn {

namespace {
constexpr char kMagic[8] = {'T', 'G', 'A', 'N', 'C', 'K', 'P', '1'};

template <class T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const std::string& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw DataError("truncated checkpoint: " + path);
    return v;
}
} // namespace

void save_checkpoint(const std::string& path, const NetworkConfig& config, const json& meta,
                     const std::vector<std::pair<std::string, Tensor*>>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));

    json header;
    header["config"] = config.to_json();
    header["meta"] = meta;
    const std::string hdr = header.dump();
    write_pod<std::uint64_t>(out, hdr.size());
    out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));

    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensor->shape.size()));
        for (int d : tensor->shape) write_pod<std::int32_t>(out, d);
        out.write(reinterpret_cast<const char*>(tensor->data.data()),
                  static_cast<std::streamsize>(tensor->data.size() * sizeof(float)));
    }
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("not a checkpoint file: " + path);

    const auto hdr_len = read_pod<std::uint64_t>(in, path);
    std::string hdr(hdr_len, '\0');
    if (!in.read(hdr.data(), static_cast<std::streamsize>(hdr_len)))
        throw DataError("truncated checkpoint: " + path);
    json header;
    try {
        header = json::parse(hdr);
    } catch (const json::exception& e) {
        throw DataError("corrupt checkpoint header in " + path + ": " + e.what());
    }

    Checkpoint ckpt;
    ckpt.config = NetworkConfig::from_json(header.at("config"));
    ckpt.meta = header.value("meta", json::object());

    const auto n_tensors = read_pod<std::uint32_t>(in, path);
    for (std::uint32_t t = 0; t < n_tensors; ++t) {
        const auto name_len = read_pod<std::uint32_t>(in, path);
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) throw DataError("truncated checkpoint: " + path);
        const auto ndim = read_pod<std::uint32_t>(in, path);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = read_pod<std::int32_t>(in, path);
        Tensor tensor(shape);
        if (!in.read(reinterpret_cast<char*>(tensor.data.data()),
                     static_cast<std::streamsize>(tensor.data.size() * sizeof(float))))
            throw DataError("truncated checkpoint: " + path);
        ckpt.tensors.emplace(std::move(name), std::move(tensor));
    }
    return ckpt;
}

void restore_into(const Checkpoint& ckpt, const NetworkConfig& expected,
                  std::vector<std::pair<std::string, Tensor*>> tensors) {
    if (!(ckpt.config == expected))
        throw ConfigError("checkpoint config does not match the requested network config");
    for (auto& [name, dst] : tensors) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end()) throw DataError("checkpoint is missing tensor '" + name + "'");
        if (it->second.shape != dst->shape)
            throw DataError("checkpoint tensor '" + name + "' has shape " + it->second.shape_str() +
                            ", expected " + dst->shape_str());
        dst->data = it->second.data;
    }
}

} // namespace tgan::nn
