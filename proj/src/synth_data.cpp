#include "vaelab/synth_data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vaelab/common.hpp"
#include "vaelab/random.hpp"

namespace vaelab {

namespace {

constexpr int kSide = 28;

struct Jitter {
    double dx, dy;       // center shift, pixels
    double scale;        // glyph scale
    double cos_t, sin_t; // rotation
    double intensity;
};

bool digits_shape(int cls, double u, double v) {
    const double r = std::sqrt(u * u + v * v);
    switch (cls) {
        case 0: return std::fabs(r - 0.62) < 0.16;                         // ring
        case 1: return std::fabs(u) < 0.16 && std::fabs(v) < 0.85;         // vertical bar
        case 2: return std::fabs(v) < 0.16 && std::fabs(u) < 0.85;         // horizontal bar
        case 3:                                                            // plus
            return (std::fabs(u) < 0.14 && std::fabs(v) < 0.8) ||
                   (std::fabs(v) < 0.14 && std::fabs(u) < 0.8);
        case 4:                                                            // X
            return r < 0.95 && (std::fabs(u - v) * 0.7071 < 0.15 ||
                                std::fabs(u + v) * 0.7071 < 0.15);
        case 5: return r < 0.52;                                           // disc
        case 6: {                                                          // square outline
            const double m = std::max(std::fabs(u), std::fabs(v));
            return std::fabs(m - 0.6) < 0.14;
        }
        case 7: return std::fabs(u + v) * 0.7071 < 0.15 && r < 0.95;       // slash
        case 8: {                                                          // two discs
            const double du1 = u + 0.42, dv1 = v + 0.42;
            const double du2 = u - 0.42, dv2 = v - 0.42;
            return std::sqrt(du1 * du1 + dv1 * dv1) < 0.30 ||
                   std::sqrt(du2 * du2 + dv2 * dv2) < 0.30;
        }
        case 9: return v > -0.55 && v < 0.75 - 1.73 * std::fabs(u);        // triangle
    }
    return false;
}

bool fashion_shape(int cls, double u, double v) {
    const double r = std::sqrt(u * u + v * v);
    const double m = std::max(std::fabs(u), std::fabs(v));
    switch (cls) {
        case 0: return std::fabs(m - 0.75) < 0.14;                         // frame
        case 1:                                                            // two bars
            return std::fabs(v) < 0.8 &&
                   (std::fabs(u - 0.35) < 0.14 || std::fabs(u + 0.35) < 0.14);
        case 2: return r < 0.7;                                            // big disc
        case 3: {                                                          // checkerboard
            if (m > 0.8) return false;
            const int iu = static_cast<int>(std::floor((u + 0.8) / 0.4));
            const int iv = static_cast<int>(std::floor((v + 0.8) / 0.4));
            return ((iu + iv) & 1) == 0;
        }
        case 4: return m < 0.8 && std::sin(v * 9.42477796) > 0.2;          // h-stripes
        case 5: return m < 0.8 && std::sin(u * 9.42477796) > 0.2;          // v-stripes
        case 6: return std::fabs(r - 0.72) < 0.14;                         // big ring
        case 7: return std::fabs(std::fabs(u) + std::fabs(v) - 0.75) < 0.14;  // diamond outline
        case 8: return std::fabs(u) + std::fabs(v) < 0.6;                  // filled diamond
        case 9:                                                            // T
            return (std::fabs(v + 0.55) < 0.16 && std::fabs(u) < 0.75) ||
                   (std::fabs(u) < 0.16 && v > -0.55 && v < 0.8);
    }
    return false;
}

void render(SynthStyle style, int cls, const Jitter& j, double noise_std, Rng& rng,
            uint8_t* out) {
    const double cx = 13.5 + j.dx, cy = 13.5 + j.dy;
    const double inv_rad = 1.0 / (9.0 * j.scale);
    for (int py = 0; py < kSide; ++py) {
        for (int px = 0; px < kSide; ++px) {
            // 2x2 supersampling softens the edges
            double acc = 0.0;
            for (int sy = 0; sy < 2; ++sy) {
                for (int sx = 0; sx < 2; ++sx) {
                    const double x = (px + 0.25 + 0.5 * sx - cx) * inv_rad;
                    const double y = (py + 0.25 + 0.5 * sy - cy) * inv_rad;
                    const double u = j.cos_t * x - j.sin_t * y;
                    const double v = j.sin_t * x + j.cos_t * y;
                    const bool hit = style == SynthStyle::digits ? digits_shape(cls, u, v)
                                                                 : fashion_shape(cls, u, v);
                    acc += hit ? 1.0 : 0.0;
                }
            }
            double val = j.intensity * (acc * 0.25) + noise_std * rng.normal();
            val = std::clamp(val, 0.0, 1.0);
            out[py * kSide + px] = static_cast<uint8_t>(std::lround(val * 255.0));
        }
    }
}

void write_bytes(const std::string& path, const std::vector<uint8_t>& bytes, bool gz) {
    if (gz) {
        gzFile f = gzopen(path.c_str(), "wb");
        if (!f) throw IoError("cannot create " + path);
        const int n = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
        gzclose(f);
        if (n != static_cast<int>(bytes.size())) throw IoError("short write to " + path);
    } else {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot create " + path);
        f.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
        if (!f) throw IoError("short write to " + path);
    }
}

void push_be32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

}  // namespace

SynthStyle synth_style_from_name(const std::string& name) {
    if (name == "digits" || name == "mnist") return SynthStyle::digits;
    if (name == "fashion") return SynthStyle::fashion;
    throw ConfigError("unknown synthetic style '" + name + "'");
}

SynthSplit generate_synth_split(const SynthConfig& cfg, int n, uint64_t split_tag) {
    if (n <= 0) throw ContractError("split size must be positive");
    SynthSplit out;
    out.pixels.resize(static_cast<size_t>(n) * kSide * kSide);
    out.labels.resize(static_cast<size_t>(n));

    // balanced labels, shuffled
    for (int i = 0; i < n; ++i) out.labels[static_cast<size_t>(i)] = static_cast<uint8_t>(i % 10);
    Rng label_rng(derive_seed(cfg.seed, "labels", split_tag));
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(label_rng.below(static_cast<uint64_t>(i) + 1));
        std::swap(out.labels[static_cast<size_t>(i)], out.labels[static_cast<size_t>(j)]);
    }

    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(cfg.seed, "image", split_tag * 0x100000000ULL + static_cast<uint64_t>(i)));
        Jitter j;
        j.dx = rng.uniform(-4.0, 4.0);
        j.dy = rng.uniform(-4.0, 4.0);
        j.scale = rng.uniform(0.65, 1.25);
        const double theta = rng.uniform(-0.5, 0.5);
        j.cos_t = std::cos(theta);
        j.sin_t = std::sin(theta);
        j.intensity = rng.uniform(0.55, 1.0);
        render(cfg.style, out.labels[static_cast<size_t>(i)], j, cfg.pixel_noise, rng,
               out.pixels.data() + static_cast<size_t>(i) * kSide * kSide);
    }
    return out;
}

void write_idx_images_file(const std::string& path, const std::vector<uint8_t>& pixels, int count,
                           int rows, int cols, bool gzip) {
    if (pixels.size() != static_cast<size_t>(count) * rows * cols) {
        throw ContractError("pixel buffer does not match declared dimensions");
    }
    std::vector<uint8_t> bytes;
    bytes.reserve(16 + pixels.size());
    push_be32(bytes, 0x00000803);
    push_be32(bytes, static_cast<uint32_t>(count));
    push_be32(bytes, static_cast<uint32_t>(rows));
    push_be32(bytes, static_cast<uint32_t>(cols));
    bytes.insert(bytes.end(), pixels.begin(), pixels.end());
    write_bytes(path, bytes, gzip);
}

void write_idx_labels_file(const std::string& path, const std::vector<uint8_t>& labels, bool gzip) {
    std::vector<uint8_t> bytes;
    bytes.reserve(8 + labels.size());
    push_be32(bytes, 0x00000801);
    push_be32(bytes, static_cast<uint32_t>(labels.size()));
    bytes.insert(bytes.end(), labels.begin(), labels.end());
    write_bytes(path, bytes, gzip);
}

void write_synth_idx(const std::string& dir, const SynthConfig& cfg) {
    std::filesystem::create_directories(dir);
    const std::string suffix = cfg.gzip ? ".gz" : "";
    SynthSplit train = generate_synth_split(cfg, cfg.n_train, 1);
    write_idx_images_file(dir + "/train-images-idx3-ubyte" + suffix, train.pixels, cfg.n_train,
                          kSide, kSide, cfg.gzip);
    write_idx_labels_file(dir + "/train-labels-idx1-ubyte" + suffix, train.labels, cfg.gzip);
    SynthSplit test = generate_synth_split(cfg, cfg.n_test, 2);
    write_idx_images_file(dir + "/t10k-images-idx3-ubyte" + suffix, test.pixels, cfg.n_test, kSide,
                          kSide, cfg.gzip);
    write_idx_labels_file(dir + "/t10k-labels-idx1-ubyte" + suffix, test.labels, cfg.gzip);
}

}  // namespace vaelab
