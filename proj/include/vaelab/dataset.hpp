#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vaelab/random.hpp"
#include "vaelab/tensor.hpp"

namespace vaelab {

// Raw IDX payload as stored on disk (big-endian headers already parsed).
struct IdxImages {
    int count = 0;
    int rows = 0;
    int cols = 0;
    std::vector<uint8_t> pixels;  // count*rows*cols
};

struct IdxLabels {
    int count = 0;
    std::vector<uint8_t> labels;
};

// Both readers accept raw or gzip files (zlib's gz layer handles either).
IdxImages read_idx_images(const std::string& path);
IdxLabels read_idx_labels(const std::string& path);

enum class Split { train, test };

template <typename T>
struct Dataset {
    Tensor<T> images;         // [N,1,H,W], values in [0,1]
    std::vector<int> labels;  // 0..9
    Split split = Split::train;

    int size() const { return images.defined() ? images.dim(0) : 0; }

    // first k examples; the desk-scale subset knob
    Dataset take(int k) const {
        if (k <= 0 || k > size()) throw ContractError("Dataset::take: bad subset size");
        const int H = images.dim(2), W = images.dim(3);
        const size_t per = static_cast<size_t>(H) * W;
        std::vector<T> data(images.values().begin(),
                            images.values().begin() + static_cast<size_t>(k) * per);
        Dataset out;
        out.images = Tensor<T>({k, 1, H, W}, std::move(data));
        out.labels.assign(labels.begin(), labels.begin() + k);
        out.split = split;
        return out;
    }
};

// Parses the image/label pair, cross-checks the counts, scales to [0,1].
template <typename T>
Dataset<T> load_idx(const std::string& images_path, const std::string& labels_path,
                    Split split = Split::train) {
    IdxImages im = read_idx_images(images_path);
    IdxLabels lb = read_idx_labels(labels_path);
    if (im.count != lb.count) {
        throw IntegrityError("image count " + std::to_string(im.count) +
                             " does not match label count " + std::to_string(lb.count));
    }
    Dataset<T> ds;
    std::vector<T> data(im.pixels.size());
    constexpr T inv = T(1) / T(255);
    for (size_t i = 0; i < im.pixels.size(); ++i) data[i] = static_cast<T>(im.pixels[i]) * inv;
    ds.images = Tensor<T>({im.count, 1, im.rows, im.cols}, std::move(data));
    ds.labels.reserve(lb.labels.size());
    for (uint8_t l : lb.labels) {
        if (l > 9) throw IntegrityError("label out of range 0..9");
        ds.labels.push_back(l);
    }
    ds.split = split;
    return ds;
}

struct BatchPlan {
    int batch_size = 64;
    uint64_t seed = 0;
    bool shuffle = true;
    bool drop_last = false;
};

// One epoch's batches as index lists. The permutation is redrawn from an
// epoch-indexed stream, so epoch order is reproducible and epochs differ.
inline std::vector<std::vector<int>> epoch_batches(const BatchPlan& plan, int n, int epoch) {
    if (plan.batch_size < 1) throw ContractError("batch size must be >= 1");
    if (plan.batch_size > n) throw ContractError("batch size exceeds dataset size");
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    if (plan.shuffle) {
        Rng rng(derive_seed(plan.seed, "epoch-permutation", static_cast<uint64_t>(epoch)));
        for (int i = n - 1; i > 0; --i) {
            int j = static_cast<int>(rng.below(static_cast<uint64_t>(i) + 1));
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
        }
    }
    std::vector<std::vector<int>> out;
    for (int start = 0; start < n; start += plan.batch_size) {
        int end = std::min(n, start + plan.batch_size);
        if (plan.drop_last && end - start < plan.batch_size) break;
        out.emplace_back(order.begin() + start, order.begin() + end);
    }
    return out;
}

template <typename T>
struct Batch {
    Tensor<T> images;  // [B,1,H,W]
    std::vector<int> labels;
};

template <typename T>
Batch<T> gather(const Dataset<T>& ds, const std::vector<int>& indices) {
    const int H = ds.images.dim(2), W = ds.images.dim(3);
    const size_t per = static_cast<size_t>(H) * W;
    const int B = static_cast<int>(indices.size());
    std::vector<T> data(static_cast<size_t>(B) * per);
    Batch<T> batch;
    batch.labels.reserve(indices.size());
    const T* src = ds.images.data();
    for (int b = 0; b < B; ++b) {
        const int idx = indices[static_cast<size_t>(b)];
        std::copy_n(src + static_cast<size_t>(idx) * per, per, data.begin() + static_cast<size_t>(b) * per);
        batch.labels.push_back(ds.labels[static_cast<size_t>(idx)]);
    }
    batch.images = Tensor<T>({B, 1, H, W}, std::move(data));
    return batch;
}

}  // namespace vaelab
