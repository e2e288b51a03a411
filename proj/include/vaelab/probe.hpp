#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vaelab/ops.hpp"
#include "vaelab/model.hpp"

namespace vaelab {

// Three-layer fully connected classifier over the latent code, used purely as
// a representation-quality metric. Its input is always detached, so its
// training never reaches the encoder.
template <typename T>
class Probe {
  public:
    Probe(int z_dim, int hidden, uint64_t weight_seed) {
        Rng rng(weight_seed);
        layers_.push_back(detail::make_dense<T>(z_dim, hidden, rng));
        layers_.push_back(detail::make_dense<T>(hidden, hidden, rng));
        layers_.push_back(detail::make_dense<T>(hidden, 10, rng));
    }

    Tensor<T> forward(Tape<T>* tape, const Tensor<T>& z) const {
        if (z.ndim() != 2 || z.dim(1) != layers_[0].W.dim(0)) {
            throw ShapeError("probe expects z[Bx" + std::to_string(layers_[0].W.dim(0)) +
                             "], got " + shape_str(z.shape()));
        }
        Tensor<T> h = z;
        for (size_t i = 0; i + 1 < layers_.size(); ++i) {
            h = relu(tape, affine(tape, h, layers_[i].W, layers_[i].b));
        }
        return affine(tape, h, layers_.back().W, layers_.back().b);
    }

    std::vector<Tensor<T>> parameters() {
        std::vector<Tensor<T>> out;
        for (auto& l : layers_) {
            out.push_back(l.W);
            out.push_back(l.b);
        }
        return out;
    }

    std::vector<std::pair<std::string, Tensor<T>>> named_parameters() {
        std::vector<std::pair<std::string, Tensor<T>>> out;
        for (size_t i = 0; i < layers_.size(); ++i) {
            out.emplace_back("probe.dense" + std::to_string(i) + ".W", layers_[i].W);
            out.emplace_back("probe.dense" + std::to_string(i) + ".b", layers_[i].b);
        }
        return out;
    }

    DenseLayer<T>& final_layer() { return layers_.back(); }

  private:
    std::vector<DenseLayer<T>> layers_;
};

// argmax match rate; ties resolve to the lowest class index
template <typename T>
double accuracy(const Tensor<T>& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2) throw ShapeError("accuracy expects logits[BxK]");
    const int B = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(labels.size()) != B) throw ShapeError("accuracy: label count mismatch");
    int hits = 0;
    for (int b = 0; b < B; ++b) {
        const T* row = logits.data() + static_cast<size_t>(b) * K;
        int best = 0;
        for (int j = 1; j < K; ++j) {
            if (row[j] > row[best]) best = j;
        }
        if (best == labels[static_cast<size_t>(b)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(B);
}

}  // namespace vaelab
