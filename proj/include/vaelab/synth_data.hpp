#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vaelab {

// Deterministic 28x28 ten-class shape corpus in MNIST's IDX container format.
// Two styles so the two-dataset experiment matrix has distinct inputs:
// "digits" uses thin strokes and small glyphs, "fashion" uses larger filled
// and textured shapes. Samples get random shift/scale/rotation/brightness
// jitter plus pixel noise, which keeps the classes separable but not trivial.

enum class SynthStyle { digits, fashion };

SynthStyle synth_style_from_name(const std::string& name);

struct SynthConfig {
    SynthStyle style = SynthStyle::digits;
    int n_train = 60000;
    int n_test = 10000;
    uint64_t seed = 2024;
    double pixel_noise = 0.16;
    bool gzip = false;
};

struct SynthSplit {
    std::vector<uint8_t> pixels;  // n*28*28
    std::vector<uint8_t> labels;  // n
};

SynthSplit generate_synth_split(const SynthConfig& cfg, int n, uint64_t split_tag);

// Writes train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte
// and t10k-labels-idx1-ubyte (plus .gz suffix when requested) into dir.
void write_synth_idx(const std::string& dir, const SynthConfig& cfg);

// Low-level IDX writers, also used by test fixtures.
void write_idx_images_file(const std::string& path, const std::vector<uint8_t>& pixels, int count,
                           int rows, int cols, bool gzip);
void write_idx_labels_file(const std::string& path, const std::vector<uint8_t>& labels, bool gzip);

}  // namespace vaelab
