#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "vaelab/ops.hpp"
#include "vaelab/random.hpp"

namespace vaelab {

template <typename T>
struct LatentStats {
    Tensor<T> mu;       // [B,D]
    Tensor<T> log_var;  // [B,D]
};

// Per-sample L2 ball constraint on the encoder means. The effective bound is
// coefficient * sqrt(z_dim).
struct ClipConfig {
    bool enabled = false;
    double coefficient = 3.0;
    bool stop_grad = false;  // treat the rescale factor as a constant in backward

    double bound(int z_dim) const { return coefficient * std::sqrt(static_cast<double>(z_dim)); }
    void validate() const {
        if (enabled && coefficient <= 0) throw ConfigError("clip coefficient must be positive");
    }
};

// Rescales each row of mu onto the L2 ball of radius C. Rows inside the ball
// pass through untouched; a clipped row y = mu * (C/r) gets the full
// product-rule gradient  g_in = (C/r) * (g - mu * (mu.g) / r^2)  unless
// stop_grad treats C/r as constant.
//
// The activation threshold carries a few-ulp slack so that re-clipping an
// already clipped row takes the pass-through branch, making the op exactly
// idempotent in floats.
template <typename T>
Tensor<T> latent_clip(Tape<T>* tape, const Tensor<T>& mu, double C, bool stop_grad = false) {
    if (mu.ndim() != 2) throw ShapeError("latent_clip expects mu[BxD]");
    if (C <= 0) throw ContractError("latent_clip: bound must be positive");
    const int B = mu.dim(0), D = mu.dim(1);
    const double slack = 1.0 + 8.0 * static_cast<double>(std::numeric_limits<T>::epsilon());

    Tensor<T> out = Tensor<T>::zeros(mu.shape());
    std::vector<uint8_t> clipped(static_cast<size_t>(B), 0);
    std::vector<double> radius(static_cast<size_t>(B), 0.0);
    for (int b = 0; b < B; ++b) {
        const T* row = mu.data() + static_cast<size_t>(b) * D;
        T* orow = out.data() + static_cast<size_t>(b) * D;
        double r2 = 0.0;
        for (int d = 0; d < D; ++d) r2 += static_cast<double>(row[d]) * static_cast<double>(row[d]);
        const double r = std::sqrt(r2);
        radius[static_cast<size_t>(b)] = r;
        if (r > C * slack) {
            clipped[static_cast<size_t>(b)] = 1;
            const double s = C / r;
            for (int d = 0; d < D; ++d) orow[d] = static_cast<T>(static_cast<double>(row[d]) * s);
        } else {
            std::copy_n(row, D, orow);
        }
    }
    detail::check_finite(out, "latent_clip");
    if (tape) {
        auto mn = mu.node();
        auto on = out.node();
        tape->record(on, [mn, on, B, D, C, stop_grad, clipped = std::move(clipped),
                          radius = std::move(radius)] {
            if (!mn->wants_grad()) return;
            mn->ensure_grad();
            for (int b = 0; b < B; ++b) {
                const T* g = on->grad.data() + static_cast<size_t>(b) * D;
                T* gi = mn->grad.data() + static_cast<size_t>(b) * D;
                if (!clipped[static_cast<size_t>(b)]) {
                    for (int d = 0; d < D; ++d) gi[d] += g[d];
                    continue;
                }
                const double r = radius[static_cast<size_t>(b)];
                const double s = C / r;
                if (stop_grad) {
                    for (int d = 0; d < D; ++d) gi[d] += static_cast<T>(s * static_cast<double>(g[d]));
                    continue;
                }
                const T* row = mn->value.data() + static_cast<size_t>(b) * D;
                double mg = 0.0;
                for (int d = 0; d < D; ++d) mg += static_cast<double>(row[d]) * static_cast<double>(g[d]);
                const double k = mg / (r * r);
                for (int d = 0; d < D; ++d) {
                    gi[d] += static_cast<T>(s * (static_cast<double>(g[d]) -
                                                 static_cast<double>(row[d]) * k));
                }
            }
        });
    }
    return out;
}

// z = mu + exp(log_var / 2) * eps. Gradients reach mu and log_var; eps is a
// constant draw from the caller's noise stream.
template <typename T>
Tensor<T> reparameterize(Tape<T>* tape, const LatentStats<T>& stats, const Tensor<T>& eps) {
    detail::require_same_shape(stats.mu, eps, "reparameterize");
    Tensor<T> sigma = exp(tape, mul_scalar(tape, stats.log_var, T(0.5)));
    return add(tape, stats.mu, mul(tape, sigma, eps));
}

enum class PresetId { toy_dense_2d, cnn_main };

inline const char* preset_name(PresetId id) {
    return id == PresetId::toy_dense_2d ? "toy_dense_2d" : "cnn_main";
}

inline PresetId preset_from_name(const std::string& s) {
    if (s == "toy_dense_2d") return PresetId::toy_dense_2d;
    if (s == "cnn_main") return PresetId::cnn_main;
    throw ConfigError("unknown preset '" + s + "'");
}

struct ModelPreset {
    PresetId id = PresetId::cnn_main;
    Activation activation = Activation::leaky_relu;
    int z_dim = 10;
    int image_side = 28;
    std::vector<int> dense_widths = {128, 64};  // toy encoder trunk; decoder mirrors

    static ModelPreset cnn_main(int z_dim = 10) {
        ModelPreset p;
        p.id = PresetId::cnn_main;
        p.activation = Activation::leaky_relu;
        p.z_dim = z_dim;
        return p;
    }

    static ModelPreset toy_dense_2d(Activation act, int z_dim = 2) {
        ModelPreset p;
        p.id = PresetId::toy_dense_2d;
        p.activation = act;
        p.z_dim = z_dim;
        return p;
    }
};

template <typename T>
struct DenseLayer {
    Tensor<T> W, b;
};

template <typename T>
struct ConvLayer {
    Tensor<T> K;
    int stride = 1;
};

namespace detail {

template <typename T>
DenseLayer<T> make_dense(int in, int out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (in + out));
    DenseLayer<T> l;
    l.W = Tensor<T>::uniform({in, out}, rng, -limit, limit, true);
    l.b = Tensor<T>::zeros({out}, true);
    return l;
}

template <typename T>
ConvLayer<T> make_conv(int f, int c, int k, int stride, Rng& rng) {
    const double limit = std::sqrt(6.0 / (c * k * k + f * k * k));
    ConvLayer<T> l;
    l.K = Tensor<T>::uniform({f, c, k, k}, rng, -limit, limit, true);
    l.stride = stride;
    return l;
}

}  // namespace detail

// Encoder/decoder pair with two linear heads for (mu, log_var) and a sigmoid
// output. cnn_main: conv(1->8,k4,s2) -> conv(8->16,k3,s2) -> dense 576->128 ->
// heads; decoder mirrors through conv2d_transpose. 28 -> 13 -> 6 and back, all
// shapes exact. toy_dense_2d: dense trunk on the flattened image.
template <typename T>
class Vae {
  public:
    Vae(const ModelPreset& preset, uint64_t weight_seed) : preset_(preset) {
        Rng rng(weight_seed);
        const int side = preset.image_side;
        const int in = side * side;
        if (preset.id == PresetId::cnn_main) {
            enc_conv_.push_back(detail::make_conv<T>(8, 1, 4, 2, rng));   // 28 -> 13
            enc_conv_.push_back(detail::make_conv<T>(16, 8, 3, 2, rng));  // 13 -> 6
            flat_ = 16 * 6 * 6;
            enc_dense_.push_back(detail::make_dense<T>(flat_, 128, rng));
            head_mu_ = detail::make_dense<T>(128, preset.z_dim, rng);
            head_log_var_ = detail::make_dense<T>(128, preset.z_dim, rng);
            dec_dense_.push_back(detail::make_dense<T>(preset.z_dim, 128, rng));
            dec_dense_.push_back(detail::make_dense<T>(128, flat_, rng));
            dec_conv_.push_back(detail::make_conv<T>(16, 8, 3, 2, rng));  // 6 -> 13
            dec_conv_.push_back(detail::make_conv<T>(8, 1, 4, 2, rng));   // 13 -> 28
        } else {
            int w = in;
            for (int width : preset.dense_widths) {
                enc_dense_.push_back(detail::make_dense<T>(w, width, rng));
                w = width;
            }
            head_mu_ = detail::make_dense<T>(w, preset.z_dim, rng);
            head_log_var_ = detail::make_dense<T>(w, preset.z_dim, rng);
            int dw = preset.z_dim;
            for (auto it = preset.dense_widths.rbegin(); it != preset.dense_widths.rend(); ++it) {
                dec_dense_.push_back(detail::make_dense<T>(dw, *it, rng));
                dw = *it;
            }
            dec_dense_.push_back(detail::make_dense<T>(dw, in, rng));
        }
    }

    LatentStats<T> encode(Tape<T>* tape, const Tensor<T>& x) const {
        const int side = preset_.image_side;
        if (x.ndim() != 4 || x.dim(1) != 1 || x.dim(2) != side || x.dim(3) != side) {
            throw ShapeError("encode expects x[Bx1x" + std::to_string(side) + "x" +
                             std::to_string(side) + "], got " + shape_str(x.shape()));
        }
        const int B = x.dim(0);
        Tensor<T> h;
        if (preset_.id == PresetId::cnn_main) {
            h = x;
            for (const auto& c : enc_conv_) {
                h = activation(tape, conv2d(tape, h, c.K, c.stride), preset_.activation);
            }
            h = reshape(tape, h, {B, flat_});
            h = activation(tape, affine(tape, h, enc_dense_[0].W, enc_dense_[0].b),
                           preset_.activation);
        } else {
            h = reshape(tape, x, {B, side * side});
            for (const auto& d : enc_dense_) {
                h = activation(tape, affine(tape, h, d.W, d.b), preset_.activation);
            }
        }
        LatentStats<T> stats;
        stats.mu = affine(tape, h, head_mu_.W, head_mu_.b);
        stats.log_var = affine(tape, h, head_log_var_.W, head_log_var_.b);
        return stats;
    }

    Tensor<T> decode(Tape<T>* tape, const Tensor<T>& z) const {
        if (z.ndim() != 2 || z.dim(1) != preset_.z_dim) {
            throw ShapeError("decode expects z[Bx" + std::to_string(preset_.z_dim) + "], got " +
                             shape_str(z.shape()));
        }
        const int B = z.dim(0);
        const int side = preset_.image_side;
        if (preset_.id == PresetId::cnn_main) {
            Tensor<T> h = z;
            h = activation(tape, affine(tape, h, dec_dense_[0].W, dec_dense_[0].b),
                           preset_.activation);
            h = activation(tape, affine(tape, h, dec_dense_[1].W, dec_dense_[1].b),
                           preset_.activation);
            h = reshape(tape, h, {B, 16, 6, 6});
            h = activation(tape, conv2d_transpose(tape, h, dec_conv_[0].K, dec_conv_[0].stride),
                           preset_.activation);
            h = conv2d_transpose(tape, h, dec_conv_[1].K, dec_conv_[1].stride);
            return reshape(tape, sigmoid(tape, h), {B, 1, side, side});
        }
        Tensor<T> h = z;
        for (size_t i = 0; i + 1 < dec_dense_.size(); ++i) {
            h = activation(tape, affine(tape, h, dec_dense_[i].W, dec_dense_[i].b),
                           preset_.activation);
        }
        h = affine(tape, h, dec_dense_.back().W, dec_dense_.back().b);
        return reshape(tape, sigmoid(tape, h), {B, 1, side, side});
    }

    std::vector<Tensor<T>> parameters() {
        std::vector<Tensor<T>> out;
        for (auto& [name, t] : named_parameters()) out.push_back(t);
        return out;
    }

    std::vector<std::pair<std::string, Tensor<T>>> named_parameters() {
        std::vector<std::pair<std::string, Tensor<T>>> out;
        for (size_t i = 0; i < enc_conv_.size(); ++i) {
            out.emplace_back("enc.conv" + std::to_string(i) + ".K", enc_conv_[i].K);
        }
        for (size_t i = 0; i < enc_dense_.size(); ++i) {
            out.emplace_back("enc.dense" + std::to_string(i) + ".W", enc_dense_[i].W);
            out.emplace_back("enc.dense" + std::to_string(i) + ".b", enc_dense_[i].b);
        }
        out.emplace_back("enc.mu.W", head_mu_.W);
        out.emplace_back("enc.mu.b", head_mu_.b);
        out.emplace_back("enc.log_var.W", head_log_var_.W);
        out.emplace_back("enc.log_var.b", head_log_var_.b);
        for (size_t i = 0; i < dec_dense_.size(); ++i) {
            out.emplace_back("dec.dense" + std::to_string(i) + ".W", dec_dense_[i].W);
            out.emplace_back("dec.dense" + std::to_string(i) + ".b", dec_dense_[i].b);
        }
        for (size_t i = 0; i < dec_conv_.size(); ++i) {
            out.emplace_back("dec.conv" + std::to_string(i) + ".K", dec_conv_[i].K);
        }
        return out;
    }

    const ModelPreset& preset() const { return preset_; }

    DenseLayer<T>& head_mu() { return head_mu_; }
    DenseLayer<T>& head_log_var() { return head_log_var_; }

  private:
    ModelPreset preset_;
    std::vector<ConvLayer<T>> enc_conv_;
    std::vector<DenseLayer<T>> enc_dense_;
    DenseLayer<T> head_mu_, head_log_var_;
    std::vector<DenseLayer<T>> dec_dense_;
    std::vector<ConvLayer<T>> dec_conv_;
    int flat_ = 0;
};

}  // namespace vaelab
