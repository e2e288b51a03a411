#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "vaelab/tensor.hpp"

namespace vaelab {

// Versioned binary container of named tensors; little-endian raw data so a
// save/load round trip is bit-exact on the machines this runs on.
namespace detail {

inline void put_u32(std::ofstream& f, uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}
inline uint32_t get_u32(std::ifstream& f) {
    uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

}  // namespace detail

constexpr char kCheckpointMagic[8] = {'V', 'L', 'C', 'P', '0', '0', '0', '1'};

template <typename T>
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor<T>>>& named) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot create checkpoint " + path);
    f.write(kCheckpointMagic, 8);
    detail::put_u32(f, static_cast<uint32_t>(sizeof(T)));
    detail::put_u32(f, static_cast<uint32_t>(named.size()));
    for (const auto& [name, t] : named) {
        detail::put_u32(f, static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put_u32(f, static_cast<uint32_t>(t.shape().size()));
        for (int d : t.shape()) detail::put_u32(f, static_cast<uint32_t>(d));
        f.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * static_cast<int64_t>(sizeof(T))));
    }
    if (!f) throw IoError("short write to checkpoint " + path);
}

// Strict loader: the checkpoint must carry exactly the given tensors, same
// names, same order, same shapes. Values are written in place.
template <typename T>
void load_checkpoint(const std::string& path,
                     std::vector<std::pair<std::string, Tensor<T>>> named) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw FormatError("bad checkpoint magic in " + path);
    }
    if (detail::get_u32(f) != sizeof(T)) {
        throw FormatError("checkpoint precision does not match this model: " + path);
    }
    const uint32_t count = detail::get_u32(f);
    if (count != named.size()) {
        throw IntegrityError("checkpoint holds " + std::to_string(count) + " tensors, expected " +
                             std::to_string(named.size()));
    }
    for (auto& [name, t] : named) {
        const uint32_t name_len = detail::get_u32(f);
        std::string got(name_len, '\0');
        f.read(got.data(), name_len);
        if (got != name) throw IntegrityError("checkpoint tensor '" + got + "', expected '" + name + "'");
        const uint32_t ndim = detail::get_u32(f);
        Shape shape(ndim);
        for (auto& d : shape) d = static_cast<int>(detail::get_u32(f));
        if (shape != t.shape()) {
            throw IntegrityError("checkpoint shape " + shape_str(shape) + " for '" + name +
                                 "', expected " + shape_str(t.shape()));
        }
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.numel() * static_cast<int64_t>(sizeof(T))));
        if (!f) throw IoError("truncated checkpoint " + path);
    }
}

}  // namespace vaelab
