#include "vaelab/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace vaelab {

namespace {

void push_be32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

uint32_t be32_at(const std::vector<uint8_t>& b, size_t off) {
    return (uint32_t(b[off]) << 24) | (uint32_t(b[off + 1]) << 16) | (uint32_t(b[off + 2]) << 8) |
           uint32_t(b[off + 3]);
}

void push_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
    push_be32(out, static_cast<uint32_t>(data.size()));
    const size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + crc_start, static_cast<uInt>(4 + data.size()));
    push_be32(out, crc);
}

void write_png(const std::string& path, int width, int height, int channels,
               const std::vector<uint8_t>& pixels) {
    if (width <= 0 || height <= 0) throw ContractError("png: non-positive dimensions");
    if (pixels.size() != static_cast<size_t>(width) * height * channels) {
        throw ContractError("png: pixel buffer size mismatch");
    }
    // filter byte 0 before every scanline
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (1 + static_cast<size_t>(width) * channels));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        const uint8_t* row = pixels.data() + static_cast<size_t>(y) * width * channels;
        raw.insert(raw.end(), row, row + static_cast<size_t>(width) * channels);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
        throw IoError("png: deflate failed");
    }
    comp.resize(comp_len);

    std::vector<uint8_t> out = {137, 80, 78, 71, 13, 10, 26, 10};
    std::vector<uint8_t> ihdr;
    push_be32(ihdr, static_cast<uint32_t>(width));
    push_be32(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);                                        // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);                    // gray / rgb
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    push_chunk(out, "IHDR", ihdr);
    push_chunk(out, "IDAT", comp);
    push_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot create " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to " + path);
}

}  // namespace

void write_png_gray(const std::string& path, int width, int height,
                    const std::vector<uint8_t>& pixels) {
    write_png(path, width, height, 1, pixels);
}

void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<uint8_t>& rgb) {
    write_png(path, width, height, 3, rgb);
}

std::vector<uint8_t> read_png_gray(const std::string& path, int* width, int* height) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    if (bytes.size() < 8 + 25) throw FormatError("png too small: " + path);
    static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    if (std::memcmp(bytes.data(), sig, 8) != 0) throw FormatError("bad png signature: " + path);

    int w = 0, h = 0;
    std::vector<uint8_t> idat;
    size_t off = 8;
    while (off + 8 <= bytes.size()) {
        const uint32_t len = be32_at(bytes, off);
        if (off + 12 + len > bytes.size()) throw FormatError("truncated png chunk: " + path);
        const char* type = reinterpret_cast<const char*>(bytes.data() + off + 4);
        const uint8_t* data = bytes.data() + off + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            w = static_cast<int>(be32_at(bytes, off + 8));
            h = static_cast<int>(be32_at(bytes, off + 12));
            if (data[8] != 8 || data[9] != 0) throw FormatError("png is not 8-bit gray: " + path);
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        off += 12 + len;
    }
    if (w <= 0 || h <= 0 || idat.empty()) throw FormatError("png missing IHDR/IDAT: " + path);

    std::vector<uint8_t> raw(static_cast<size_t>(h) * (1 + static_cast<size_t>(w)));
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size()) {
        throw FormatError("png inflate failed: " + path);
    }
    std::vector<uint8_t> pixels(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        const uint8_t* row = raw.data() + static_cast<size_t>(y) * (w + 1);
        if (row[0] != 0) throw FormatError("png uses filters beyond the writer's: " + path);
        std::copy_n(row + 1, w, pixels.begin() + static_cast<size_t>(y) * w);
    }
    *width = w;
    *height = h;
    return pixels;
}

ImageGrid make_grid(int rows, int cols, const std::vector<float>& tiles, int tile_h, int tile_w) {
    ImageGrid g;
    g.rows = rows;
    g.cols = cols;
    g.tile_h = tile_h;
    g.tile_w = tile_w;
    if (tiles.size() != static_cast<size_t>(rows) * cols * tile_h * tile_w) {
        throw ContractError("grid: tile buffer does not match rows*cols");
    }
    g.tiles = tiles;
    for (auto& v : g.tiles) v = std::clamp(v, 0.0f, 1.0f);
    return g;
}

std::vector<float> ImageGrid::assemble() const {
    const int W = cols * tile_w, H = rows * tile_h;
    std::vector<float> img(static_cast<size_t>(W) * H, 0.0f);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const float* t = tile(r, c);
            for (int y = 0; y < tile_h; ++y) {
                std::copy_n(t + static_cast<size_t>(y) * tile_w, tile_w,
                            img.begin() + (static_cast<size_t>(r) * tile_h + y) * W +
                                static_cast<size_t>(c) * tile_w);
            }
        }
    }
    return img;
}

void ImageGrid::write_png(const std::string& path) const {
    const std::vector<float> img = assemble();
    std::vector<uint8_t> bytes(img.size());
    for (size_t i = 0; i < img.size(); ++i) {
        bytes[i] = static_cast<uint8_t>(std::lround(std::clamp(img[i], 0.0f, 1.0f) * 255.0f));
    }
    write_png_gray(path, cols * tile_w, rows * tile_h, bytes);
}

void ImageGrid::write_csv(const std::string& path) const {
    const std::vector<float> img = assemble();
    std::ofstream f(path);
    if (!f) throw IoError("cannot create " + path);
    const int W = cols * tile_w, H = rows * tile_h;
    char buf[32];
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(img[static_cast<size_t>(y) * W + x]));
            f << buf;
            f << (x + 1 == W ? '\n' : ',');
        }
    }
    if (!f) throw IoError("short write to " + path);
}

}  // namespace vaelab
