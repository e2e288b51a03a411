#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vaelab/common.hpp"

namespace vaelab {

// rows x cols of grayscale tiles; values clamped to [0,1] before any export.
struct ImageGrid {
    int rows = 0;
    int cols = 0;
    int tile_h = 28;
    int tile_w = 28;
    std::vector<float> tiles;  // rows*cols tiles, each tile_h*tile_w, row-major

    int64_t tile_count() const { return static_cast<int64_t>(rows) * cols; }
    const float* tile(int r, int c) const {
        return tiles.data() + (static_cast<size_t>(r) * cols + c) * tile_h * tile_w;
    }

    // single image of size (rows*tile_h) x (cols*tile_w), values in [0,1]
    std::vector<float> assemble() const;

    void write_png(const std::string& path) const;
    void write_csv(const std::string& path) const;
};

ImageGrid make_grid(int rows, int cols, const std::vector<float>& tiles, int tile_h = 28,
                    int tile_w = 28);

// 8-bit PNG writers (zlib-backed, deterministic output for fixed input)
void write_png_gray(const std::string& path, int width, int height,
                    const std::vector<uint8_t>& pixels);
void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<uint8_t>& rgb);

// decode helper for round-trip tests; returns 8-bit gray pixels
std::vector<uint8_t> read_png_gray(const std::string& path, int* width, int* height);

}  // namespace vaelab
