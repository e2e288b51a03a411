#include "vaelab/dataset.hpp"

#include <zlib.h>

#include <cstdio>
#include <filesystem>

namespace vaelab {

namespace {

constexpr uint32_t kImagesMagic = 0x00000803;
constexpr uint32_t kLabelsMagic = 0x00000801;

// Reads the whole file through zlib's gz layer, which transparently handles
// both gzip-compressed and plain files.
std::vector<uint8_t> read_all(const std::string& path) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path);
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path);
    std::vector<uint8_t> out;
    uint8_t buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof(buf))) > 0) {
        out.insert(out.end(), buf, buf + n);
    }
    const bool bad = n < 0;
    gzclose(f);
    if (bad) throw IoError("read error in " + path);
    return out;
}

uint32_t be32(const std::vector<uint8_t>& b, size_t off) {
    return (uint32_t(b[off]) << 24) | (uint32_t(b[off + 1]) << 16) | (uint32_t(b[off + 2]) << 8) |
           uint32_t(b[off + 3]);
}

}  // namespace

IdxImages read_idx_images(const std::string& path) {
    std::vector<uint8_t> bytes = read_all(path);
    if (bytes.size() < 4) throw IoError("truncated IDX image file: " + path);
    const uint32_t magic = be32(bytes, 0);
    if (magic != kImagesMagic) {
        char hex[16];
        std::snprintf(hex, sizeof(hex), "0x%08x", magic);
        throw FormatError(std::string("bad image magic ") + hex + " in " + path);
    }
    if (bytes.size() < 16) throw IoError("truncated IDX image file: " + path);
    IdxImages im;
    im.count = static_cast<int>(be32(bytes, 4));
    im.rows = static_cast<int>(be32(bytes, 8));
    im.cols = static_cast<int>(be32(bytes, 12));
    if (im.count <= 0 || im.rows <= 0 || im.cols <= 0) {
        throw FormatError("non-positive dimensions in " + path);
    }
    const size_t expect = 16 + static_cast<size_t>(im.count) * im.rows * im.cols;
    if (bytes.size() < expect) throw IoError("truncated IDX image data in " + path);
    im.pixels.assign(bytes.begin() + 16, bytes.begin() + static_cast<ptrdiff_t>(expect));
    return im;
}

IdxLabels read_idx_labels(const std::string& path) {
    std::vector<uint8_t> bytes = read_all(path);
    if (bytes.size() < 4) throw IoError("truncated IDX label file: " + path);
    const uint32_t magic = be32(bytes, 0);
    if (magic != kLabelsMagic) {
        char hex[16];
        std::snprintf(hex, sizeof(hex), "0x%08x", magic);
        throw FormatError(std::string("bad label magic ") + hex + " in " + path);
    }
    if (bytes.size() < 8) throw IoError("truncated IDX label file: " + path);
    IdxLabels lb;
    lb.count = static_cast<int>(be32(bytes, 4));
    if (lb.count <= 0) throw FormatError("non-positive label count in " + path);
    const size_t expect = 8 + static_cast<size_t>(lb.count);
    if (bytes.size() < expect) throw IoError("truncated IDX label data in " + path);
    lb.labels.assign(bytes.begin() + 8, bytes.begin() + static_cast<ptrdiff_t>(expect));
    return lb;
}

}  // namespace vaelab
