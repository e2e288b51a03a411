#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vaelab/image_io.hpp"
#include "vaelab/trainer.hpp"

namespace vaelab {

// Figure-class exports. Everything here is a pure function of
// (checkpoint, manifest, seed): re-running writes identical bytes.

// sigma for prior sampling: 1 for elbo/beta runs, 3 for mu runs
inline double prior_sigma_preset(const ObjectiveConfig& obj) {
    return obj.kind == ObjectiveKind::mu_vae ? 3.0 : 1.0;
}

// traversal sweep: [-2,2] for elbo/beta, [-10,10] for clip ~3, [-20,20] for clip ~6
inline std::pair<double, double> traversal_range_preset(const ObjectiveConfig& obj) {
    if (obj.kind != ObjectiveKind::mu_vae) return {-2.0, 2.0};
    return obj.clip.coefficient < 4.5 ? std::pair<double, double>{-10.0, 10.0}
                                      : std::pair<double, double>{-20.0, 20.0};
}

namespace detail {

template <typename T>
void copy_tile(const Tensor<T>& images, int index, std::vector<float>& tiles, int64_t tile_slot,
               int side) {
    const size_t per = static_cast<size_t>(side) * side;
    const T* src = images.data() + static_cast<size_t>(index) * per;
    float* dst = tiles.data() + static_cast<size_t>(tile_slot) * per;
    for (size_t i = 0; i < per; ++i) dst[i] = static_cast<float>(src[i]);
}

}  // namespace detail

// n originals in the top row, their reconstructions (z = mu, no noise)
// row-paired beneath.
template <typename T>
ImageGrid export_reconstructions(const Vae<T>& model, const ObjectiveConfig& obj,
                                 const Tensor<T>& test_images, int n) {
    if (n < 1 || n > test_images.dim(0)) {
        throw ContractError("export_reconstructions: n exceeds the batch");
    }
    const int side = model.preset().image_side;
    const size_t per = static_cast<size_t>(side) * side;
    std::vector<T> chunk(test_images.values().begin(),
                         test_images.values().begin() + static_cast<size_t>(n) * per);
    Tensor<T> x({n, 1, side, side}, std::move(chunk));
    Tensor<T> codes = encode_eval_mu(model, obj, x);
    Tensor<T> xr = model.decode(nullptr, codes);

    std::vector<float> tiles(static_cast<size_t>(2) * n * per);
    for (int i = 0; i < n; ++i) {
        detail::copy_tile(x, i, tiles, i, side);
        detail::copy_tile(xr, i, tiles, n + i, side);
    }
    return make_grid(2, n, tiles, side, side);
}

// rows*cols decodes of z ~ N(0, sigma^2 I) from a seeded stream
template <typename T>
ImageGrid sample_prior(const Vae<T>& model, double sigma, int rows, int cols, uint64_t seed) {
    if (sigma <= 0) throw ContractError("sample_prior: sigma must be positive");
    const int n = rows * cols;
    const int D = model.preset().z_dim;
    const int side = model.preset().image_side;
    Rng rng(derive_seed(seed, "prior-samples"));
    std::vector<T> zdata(static_cast<size_t>(n) * D);
    for (auto& v : zdata) v = static_cast<T>(rng.normal() * sigma);
    Tensor<T> z({n, D}, std::move(zdata));
    Tensor<T> xr = model.decode(nullptr, z);

    const size_t per = static_cast<size_t>(side) * side;
    std::vector<float> tiles(static_cast<size_t>(n) * per);
    for (int i = 0; i < n; ++i) detail::copy_tile(xr, i, tiles, i, side);
    return make_grid(rows, cols, tiles, side, side);
}

// D rows x steps cols: dimension d swept linearly over [lo, hi], all other
// coordinates pinned to zero.
template <typename T>
ImageGrid latent_traversal(const Vae<T>& model, double lo, double hi, int steps = 40) {
    if (steps < 2) throw ContractError("latent_traversal: steps must be >= 2");
    const int D = model.preset().z_dim;
    const int side = model.preset().image_side;
    std::vector<T> zdata(static_cast<size_t>(D) * steps * D, T(0));
    for (int d = 0; d < D; ++d) {
        for (int s = 0; s < steps; ++s) {
            const double t = lo + (hi - lo) * static_cast<double>(s) / (steps - 1);
            zdata[(static_cast<size_t>(d) * steps + s) * D + d] = static_cast<T>(t);
        }
    }
    Tensor<T> z({D * steps, D}, std::move(zdata));
    Tensor<T> xr = model.decode(nullptr, z);

    const size_t per = static_cast<size_t>(side) * side;
    std::vector<float> tiles(static_cast<size_t>(D) * steps * per);
    for (int i = 0; i < D * steps; ++i) detail::copy_tile(xr, i, tiles, i, side);
    return make_grid(D, steps, tiles, side, side);
}

struct LatentSummary {
    int dims = 0;
    int bins = 61;
    double lo = 0, hi = 0;  // shared bin range, taken from the data
    std::vector<std::vector<int64_t>> counts;  // [D][bins]
    std::vector<double> mean, stddev;          // per dimension
    double grand_mean = 0, grand_std = 0;      // over all samples and dims
};

// Fixed 61-bin histograms over a shared auto range so rows are comparable.
template <typename T>
LatentSummary latent_histograms(const Tensor<T>& codes, int bins = 61) {
    if (codes.ndim() != 2) throw ShapeError("latent_histograms expects codes[NxD]");
    const int n = codes.dim(0), D = codes.dim(1);
    LatentSummary s;
    s.dims = D;
    s.bins = bins;

    double lo = codes.data()[0], hi = codes.data()[0];
    for (auto v : codes.values()) {
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
    }
    if (hi <= lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    s.lo = lo;
    s.hi = hi;
    s.counts.assign(static_cast<size_t>(D), std::vector<int64_t>(static_cast<size_t>(bins), 0));
    s.mean.assign(static_cast<size_t>(D), 0.0);
    s.stddev.assign(static_cast<size_t>(D), 0.0);

    double gsum = 0, gsq = 0;
    for (int d = 0; d < D; ++d) {
        double sum = 0, sq = 0;
        for (int i = 0; i < n; ++i) {
            const double v = static_cast<double>(codes.data()[static_cast<size_t>(i) * D + d]);
            sum += v;
            sq += v * v;
            int b = static_cast<int>((v - lo) / (hi - lo) * bins);
            b = std::clamp(b, 0, bins - 1);
            s.counts[static_cast<size_t>(d)][static_cast<size_t>(b)]++;
        }
        s.mean[static_cast<size_t>(d)] = sum / n;
        const double var = std::max(0.0, sq / n - (sum / n) * (sum / n));
        s.stddev[static_cast<size_t>(d)] = std::sqrt(var);
        gsum += sum;
        gsq += sq;
    }
    const int64_t total = static_cast<int64_t>(n) * D;
    s.grand_mean = gsum / static_cast<double>(total);
    s.grand_std = std::sqrt(std::max(0.0, gsq / static_cast<double>(total) -
                                              s.grand_mean * s.grand_mean));
    return s;
}

inline void write_histograms_csv(const std::string& path, const LatentSummary& s) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot create " + path);
    f << "dim,bin_lo,bin_hi,count\n";
    char buf[96];
    for (int d = 0; d < s.dims; ++d) {
        for (int b = 0; b < s.bins; ++b) {
            const double w = (s.hi - s.lo) / s.bins;
            std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%lld\n", d, s.lo + b * w,
                          s.lo + (b + 1) * w,
                          static_cast<long long>(s.counts[static_cast<size_t>(d)][static_cast<size_t>(b)]));
            f << buf;
        }
    }
}

inline void write_latent_summary_csv(const std::string& path, const LatentSummary& s) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot create " + path);
    f << "dim,mean,std\n";
    char buf[96];
    for (int d = 0; d < s.dims; ++d) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", d, s.mean[static_cast<size_t>(d)],
                      s.stddev[static_cast<size_t>(d)]);
        f << buf;
    }
    std::snprintf(buf, sizeof(buf), "all,%.9g,%.9g\n", s.grand_mean, s.grand_std);
    f << buf;
}

// One row per example: D code floats then the integer label. No header, so
// the row count equals the dataset size.
template <typename T>
void export_latent_codes(const Tensor<T>& codes, const std::vector<int>& labels,
                         const std::string& path) {
    if (codes.dim(0) != static_cast<int>(labels.size())) {
        throw ShapeError("export_latent_codes: code/label count mismatch");
    }
    std::ofstream f(path);
    if (!f) throw IoError("cannot create " + path);
    const int n = codes.dim(0), D = codes.dim(1);
    char buf[48];
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < D; ++d) {
            std::snprintf(buf, sizeof(buf), "%.9g",
                          static_cast<double>(codes.data()[static_cast<size_t>(i) * D + d]));
            f << buf << ',';
        }
        f << labels[static_cast<size_t>(i)] << '\n';
    }
    if (!f) throw IoError("short write to " + path);
}

// 2-D latent scatter, colored by class; used by the toy experiment
template <typename T>
void export_scatter_png(const Tensor<T>& codes, const std::vector<int>& labels,
                        const std::string& path, int size = 480) {
    if (codes.ndim() != 2 || codes.dim(1) != 2) {
        throw ShapeError("export_scatter_png expects codes[Nx2]");
    }
    static const uint8_t palette[10][3] = {
        {230, 25, 75},  {60, 180, 75},   {255, 225, 25}, {0, 130, 200},  {245, 130, 48},
        {145, 30, 180}, {70, 240, 240},  {240, 50, 230}, {210, 245, 60}, {0, 128, 128},
    };
    const int n = codes.dim(0);
    double lo = -1, hi = 1;
    for (auto v : codes.values()) {
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
    }
    const double span = std::max(hi - lo, 1e-9);
    std::vector<uint8_t> rgb(static_cast<size_t>(size) * size * 3, 255);
    for (int i = 0; i < n; ++i) {
        const double x = (static_cast<double>(codes.data()[static_cast<size_t>(i) * 2]) - lo) / span;
        const double y = (static_cast<double>(codes.data()[static_cast<size_t>(i) * 2 + 1]) - lo) / span;
        const int px = std::clamp(static_cast<int>(x * (size - 1)), 0, size - 1);
        const int py = std::clamp(static_cast<int>((1.0 - y) * (size - 1)), 0, size - 1);
        const uint8_t* color = palette[labels[static_cast<size_t>(i)] % 10];
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const int qx = px + dx, qy = py + dy;
                if (qx < 0 || qy < 0 || qx >= size || qy >= size) continue;
                uint8_t* p = rgb.data() + (static_cast<size_t>(qy) * size + qx) * 3;
                p[0] = color[0];
                p[1] = color[1];
                p[2] = color[2];
            }
        }
    }
    write_png_rgb(path, size, size, rgb);
}

// Everything the figures need, written into dir. Reads nothing but the model,
// the manifest presets, and the given test split.
template <typename T>
void run_eval_exports(const std::string& dir, const RunManifest& m, const Vae<T>& model,
                      const Dataset<T>& test, int recon_n = 8) {
    std::filesystem::create_directories(dir);
    const ObjectiveConfig& obj = m.objective;

    ImageGrid recon = export_reconstructions(model, obj, test.images,
                                             std::min(recon_n, test.size()));
    recon.write_png(dir + "/reconstructions.png");
    recon.write_csv(dir + "/reconstructions.csv");

    const double sigma = prior_sigma_preset(obj);
    ImageGrid samples = sample_prior(model, sigma, 8, 8, m.seed);
    samples.write_png(dir + "/samples.png");
    samples.write_csv(dir + "/samples.csv");

    const auto [lo, hi] = traversal_range_preset(obj);
    ImageGrid traversal = latent_traversal(model, lo, hi, 40);
    traversal.write_png(dir + "/traversal.png");
    traversal.write_csv(dir + "/traversal.csv");

    Tensor<T> codes = encode_eval_mu(model, obj, test.images);
    export_latent_codes(codes, test.labels, dir + "/latent_codes.csv");
    LatentSummary summary = latent_histograms(codes);
    write_histograms_csv(dir + "/latent_histograms.csv", summary);
    write_latent_summary_csv(dir + "/latent_summary.csv", summary);

    if (model.preset().z_dim == 2) {
        export_scatter_png(codes, test.labels, dir + "/latent_scatter.png");
    }
}

}  // namespace vaelab
