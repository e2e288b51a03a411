#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "vaelab/tape.hpp"
#include "vaelab/tensor.hpp"

// Tensor operations with exact analytic backward rules. Every op takes the
// tape as its first argument; pass nullptr to evaluate without recording
// (inference / metric passes).
//
// All forward outputs are checked for NaN/Inf and raise NumericError rather
// than letting non-finite values propagate silently.

namespace vaelab {

namespace detail {

template <typename T>
inline void check_finite(const Tensor<T>& t, const char* op) {
    for (T v : t.values()) {
        if (!std::isfinite(static_cast<double>(v))) {
            throw NumericError(std::string(op) + " produced a non-finite value");
        }
    }
}

template <typename T>
inline void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

// Row-major micro-GEMMs, accumulate into C. The j-inner loops keep the hot
// path contiguous and auto-vectorizable.

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
inline void gemm_nn_acc(int m, int n, int k, const T* A, const T* B, T* C) {
    for (int i = 0; i < m; ++i) {
        const T* a = A + static_cast<size_t>(i) * k;
        T* c = C + static_cast<size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const T av = a[l];
            const T* b = B + static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C[m,n] += A[m,k] * B[n,k]^T
template <typename T>
inline void gemm_nt_acc(int m, int n, int k, const T* A, const T* B, T* C) {
    for (int i = 0; i < m; ++i) {
        const T* a = A + static_cast<size_t>(i) * k;
        T* c = C + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* b = B + static_cast<size_t>(j) * k;
            T acc = T(0);
            for (int l = 0; l < k; ++l) acc += a[l] * b[l];
            c[j] += acc;
        }
    }
}

// C[m,n] += A[k,m]^T * B[k,n]
template <typename T>
inline void gemm_tn_acc(int m, int n, int k, const T* A, const T* B, T* C) {
    for (int l = 0; l < k; ++l) {
        const T* a = A + static_cast<size_t>(l) * m;
        const T* b = B + static_cast<size_t>(l) * n;
        for (int i = 0; i < m; ++i) {
            const T av = a[i];
            T* c = C + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// x[C,H,W] -> col[C*k*k, oh*ow] for valid cross-correlation with stride s
template <typename T>
inline void im2col(const T* x, int C, int H, int W, int k, int s, int oh, int ow, T* col) {
    const int ohw = oh * ow;
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                T* dst = col + static_cast<size_t>((c * k + ki) * k + kj) * ohw;
                for (int i = 0; i < oh; ++i) {
                    const T* src = x + static_cast<size_t>(c) * H * W +
                                   static_cast<size_t>(i * s + ki) * W + kj;
                    for (int j = 0; j < ow; ++j) dst[i * ow + j] = src[static_cast<size_t>(j) * s];
                }
            }
        }
    }
}

// scatter-add adjoint of im2col
template <typename T>
inline void col2im_acc(const T* col, int C, int H, int W, int k, int s, int oh, int ow, T* x) {
    const int ohw = oh * ow;
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const T* src = col + static_cast<size_t>((c * k + ki) * k + kj) * ohw;
                for (int i = 0; i < oh; ++i) {
                    T* dst = x + static_cast<size_t>(c) * H * W +
                             static_cast<size_t>(i * s + ki) * W + kj;
                    for (int j = 0; j < ow; ++j) dst[static_cast<size_t>(j) * s] += src[i * ow + j];
                }
            }
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise

template <typename T, typename Fwd, typename Bwd>
inline Tensor<T> unary_op(Tape<T>* tape, const Tensor<T>& x, const char* name, Fwd fwd, Bwd bwd) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* xv = x.data();
    T* ov = out.data();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) ov[i] = fwd(xv[i]);
    detail::check_finite(out, name);
    if (tape) {
        auto xn = x.node();
        auto on = out.node();
        tape->record(on, [xn, on, bwd] {
            if (!xn->wants_grad()) return;
            xn->ensure_grad();
            const size_t n = xn->value.size();
            for (size_t i = 0; i < n; ++i) xn->grad[i] += bwd(xn->value[i], on->value[i]) * on->grad[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "add");
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    detail::check_finite(out, "add");
    if (tape) {
        auto an = a.node(), bn = b.node(), on = out.node();
        tape->record(on, [an, bn, on] {
            const size_t n = on->value.size();
            if (an->wants_grad()) {
                an->ensure_grad();
                for (size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
            }
            if (bn->wants_grad()) {
                bn->ensure_grad();
                for (size_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> sub(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "sub");
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
    detail::check_finite(out, "sub");
    if (tape) {
        auto an = a.node(), bn = b.node(), on = out.node();
        tape->record(on, [an, bn, on] {
            const size_t n = on->value.size();
            if (an->wants_grad()) {
                an->ensure_grad();
                for (size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
            }
            if (bn->wants_grad()) {
                bn->ensure_grad();
                for (size_t i = 0; i < n; ++i) bn->grad[i] -= on->grad[i];
            }
        });
    }
    return out;
}

// Hadamard product
template <typename T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "mul");
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
    detail::check_finite(out, "mul");
    if (tape) {
        auto an = a.node(), bn = b.node(), on = out.node();
        tape->record(on, [an, bn, on] {
            const size_t n = on->value.size();
            if (an->wants_grad()) {
                an->ensure_grad();
                for (size_t i = 0; i < n; ++i) an->grad[i] += bn->value[i] * on->grad[i];
            }
            if (bn->wants_grad()) {
                bn->ensure_grad();
                for (size_t i = 0; i < n; ++i) bn->grad[i] += an->value[i] * on->grad[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> add_scalar(Tape<T>* tape, const Tensor<T>& x, T c) {
    return unary_op(
        tape, x, "add_scalar", [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> mul_scalar(Tape<T>* tape, const Tensor<T>& x, T c) {
    return unary_op(
        tape, x, "mul_scalar", [c](T v) { return v * c; }, [c](T, T) { return c; });
}

template <typename T>
Tensor<T> neg(Tape<T>* tape, const Tensor<T>& x) {
    return mul_scalar(tape, x, T(-1));
}

template <typename T>
Tensor<T> exp(Tape<T>* tape, const Tensor<T>& x) {
    return unary_op(
        tape, x, "exp", [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(Tape<T>* tape, const Tensor<T>& x) {
    return unary_op(
        tape, x, "log", [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> sqrt(Tape<T>* tape, const Tensor<T>& x) {
    return unary_op(
        tape, x, "sqrt", [](T v) { return std::sqrt(v); },
        [](T, T y) { return T(1) / (T(2) * y); });
}

template <typename T>
Tensor<T> square(Tape<T>* tape, const Tensor<T>& x) {
    return unary_op(
        tape, x, "square", [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

// subgradient at 0 is 0
template <typename T>
Tensor<T> abs(Tape<T>* tape, const Tensor<T>& x) {
    return unary_op(
        tape, x, "abs", [](T v) { return v < T(0) ? -v : v; },
        [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

enum class Activation { relu, leaky_relu, tanh, sigmoid };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
    }
    return "?";
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "leaky_relu") return Activation::leaky_relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "sigmoid") return Activation::sigmoid;
    throw ConfigError("unknown activation '" + s + "'");
}

inline constexpr double kLeakySlope = 0.01;

// relu subgradient at 0 is defined as 0; leaky_relu uses the negative-side
// slope at 0.
template <typename T>
Tensor<T> activation(Tape<T>* tape, const Tensor<T>& x, Activation kind) {
    switch (kind) {
        case Activation::relu:
            return unary_op(
                tape, x, "relu", [](T v) { return v > T(0) ? v : T(0); },
                [](T v, T) { return v > T(0) ? T(1) : T(0); });
        case Activation::leaky_relu:
            return unary_op(
                tape, x, "leaky_relu",
                [](T v) { return v > T(0) ? v : static_cast<T>(kLeakySlope) * v; },
                [](T v, T) { return v > T(0) ? T(1) : static_cast<T>(kLeakySlope); });
        case Activation::tanh:
            return unary_op(
                tape, x, "tanh", [](T v) { return std::tanh(v); },
                [](T, T y) { return T(1) - y * y; });
        case Activation::sigmoid:
            return unary_op(
                tape, x, "sigmoid", [](T v) { return T(1) / (T(1) + std::exp(-v)); },
                [](T, T y) { return y * (T(1) - y); });
    }
    throw ConfigError("unknown activation kind");
}

template <typename T>
Tensor<T> relu(Tape<T>* tape, const Tensor<T>& x) {
    return activation(tape, x, Activation::relu);
}
template <typename T>
Tensor<T> leaky_relu(Tape<T>* tape, const Tensor<T>& x) {
    return activation(tape, x, Activation::leaky_relu);
}
template <typename T>
Tensor<T> tanh(Tape<T>* tape, const Tensor<T>& x) {
    return activation(tape, x, Activation::tanh);
}
template <typename T>
Tensor<T> sigmoid(Tape<T>* tape, const Tensor<T>& x) {
    return activation(tape, x, Activation::sigmoid);
}

// ---------------------------------------------------------------------------
// reductions / shape

template <typename T>
Tensor<T> sum(Tape<T>* tape, const Tensor<T>& x) {
    T acc = T(0);
    for (T v : x.values()) acc += v;
    Tensor<T> out = Tensor<T>::scalar(acc);
    detail::check_finite(out, "sum");
    if (tape) {
        auto xn = x.node();
        auto on = out.node();
        tape->record(on, [xn, on] {
            if (!xn->wants_grad()) return;
            xn->ensure_grad();
            const T g = on->grad[0];
            for (auto& gi : xn->grad) gi += g;
        });
    }
    return out;
}

// Copying reshape; backward restores the original layout.
template <typename T>
Tensor<T> reshape(Tape<T>* tape, const Tensor<T>& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError("reshape from " + shape_str(x.shape()) + " to " + shape_str(shape) +
                         " changes element count");
    }
    Tensor<T> out(std::move(shape), std::vector<T>(x.values().begin(), x.values().end()));
    if (tape) {
        auto xn = x.node();
        auto on = out.node();
        tape->record(on, [xn, on] {
            if (!xn->wants_grad()) return;
            xn->ensure_grad();
            const size_t n = xn->value.size();
            for (size_t i = 0; i < n; ++i) xn->grad[i] += on->grad[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// linear algebra

// out[b,o] = sum_i x[b,i] W[i,o] + bias[o]
template <typename T>
Tensor<T> affine(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& bias) {
    if (x.ndim() != 2 || W.ndim() != 2 || bias.ndim() != 1) {
        throw ShapeError("affine expects x[BxI], W[IxO], b[O]");
    }
    const int B = x.dim(0), I = x.dim(1), O = W.dim(1);
    if (W.dim(0) != I || bias.dim(0) != O) {
        throw ShapeError("affine: x" + shape_str(x.shape()) + " W" + shape_str(W.shape()) +
                         " b" + shape_str(bias.shape()));
    }
    Tensor<T> out = Tensor<T>::zeros({B, O});
    detail::gemm_nn_acc(B, O, I, x.data(), W.data(), out.data());
    for (int b = 0; b < B; ++b) {
        T* row = out.data() + static_cast<size_t>(b) * O;
        for (int o = 0; o < O; ++o) row[o] += bias.data()[o];
    }
    detail::check_finite(out, "affine");
    if (tape) {
        auto xn = x.node(), wn = W.node(), bn = bias.node(), on = out.node();
        tape->record(on, [xn, wn, bn, on, B, I, O] {
            const T* g = on->grad.data();
            if (xn->wants_grad()) {
                xn->ensure_grad();
                detail::gemm_nt_acc(B, I, O, g, wn->value.data(), xn->grad.data());
            }
            if (wn->wants_grad()) {
                wn->ensure_grad();
                detail::gemm_tn_acc(I, O, B, xn->value.data(), g, wn->grad.data());
            }
            if (bn->wants_grad()) {
                bn->ensure_grad();
                for (int b = 0; b < B; ++b) {
                    const T* row = g + static_cast<size_t>(b) * O;
                    for (int o = 0; o < O; ++o) bn->grad[o] += row[o];
                }
            }
        });
    }
    return out;
}

// Valid-padding cross-correlation, x[B,C,H,W] * K[F,C,k,k] -> [B,F,oh,ow]
template <typename T>
Tensor<T> conv2d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& K, int stride) {
    if (x.ndim() != 4 || K.ndim() != 4) throw ShapeError("conv2d expects x[BxCxHxW], K[FxCxkxk]");
    if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int F = K.dim(0), k = K.dim(2);
    if (K.dim(1) != C) throw ShapeError("conv2d: channel mismatch");
    if (K.dim(3) != k) throw ShapeError("conv2d: kernel must be square");
    if (k > H || k > W) throw ShapeError("conv2d: kernel larger than input");
    const int oh = (H - k) / stride + 1;
    const int ow = (W - k) / stride + 1;

    Tensor<T> out = Tensor<T>::zeros({B, F, oh, ow});
    const int ckk = C * k * k, ohw = oh * ow;
    std::vector<T> col(static_cast<size_t>(ckk) * ohw);
    for (int b = 0; b < B; ++b) {
        detail::im2col(x.data() + static_cast<size_t>(b) * C * H * W, C, H, W, k, stride, oh, ow,
                       col.data());
        detail::gemm_nn_acc(F, ohw, ckk, K.data(), col.data(),
                            out.data() + static_cast<size_t>(b) * F * ohw);
    }
    detail::check_finite(out, "conv2d");
    if (tape) {
        auto xn = x.node(), kn = K.node(), on = out.node();
        tape->record(on, [xn, kn, on, B, C, H, W, F, k, stride, oh, ow] {
            const int ckk = C * k * k, ohw = oh * ow;
            std::vector<T> col(static_cast<size_t>(ckk) * ohw);
            std::vector<T> tmp(static_cast<size_t>(ckk) * ohw);
            const bool want_x = xn->wants_grad(), want_k = kn->wants_grad();
            if (want_x) xn->ensure_grad();
            if (want_k) kn->ensure_grad();
            for (int b = 0; b < B; ++b) {
                const T* g = on->grad.data() + static_cast<size_t>(b) * F * ohw;
                if (want_k || want_x) {
                    detail::im2col(xn->value.data() + static_cast<size_t>(b) * C * H * W, C, H, W,
                                   k, stride, oh, ow, col.data());
                }
                if (want_k) {
                    detail::gemm_nt_acc(F, ckk, ohw, g, col.data(), kn->grad.data());
                }
                if (want_x) {
                    std::fill(tmp.begin(), tmp.end(), T(0));
                    detail::gemm_tn_acc(ckk, ohw, F, kn->value.data(), g, tmp.data());
                    detail::col2im_acc(tmp.data(), C, H, W, k, stride, oh, ow,
                                       xn->grad.data() + static_cast<size_t>(b) * C * H * W);
                }
            }
        });
    }
    return out;
}

// Adjoint of conv2d: forward here equals conv2d's backward w.r.t. its input.
// x[B,F,h,w] * K[F,C,k,k] -> [B,C,H,W] with H = (h-1)*stride + k by default;
// pass out_h/out_w to recover shapes conv2d floored away.
template <typename T>
Tensor<T> conv2d_transpose(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& K, int stride,
                           int out_h = -1, int out_w = -1) {
    if (x.ndim() != 4 || K.ndim() != 4) {
        throw ShapeError("conv2d_transpose expects x[BxFxhxw], K[FxCxkxk]");
    }
    if (stride < 1) throw ContractError("conv2d_transpose: stride must be >= 1");
    const int B = x.dim(0), F = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int C = K.dim(1), k = K.dim(2);
    if (K.dim(0) != F) throw ShapeError("conv2d_transpose: channel mismatch");
    if (K.dim(3) != k) throw ShapeError("conv2d_transpose: kernel must be square");
    const int H = out_h > 0 ? out_h : (h - 1) * stride + k;
    const int W = out_w > 0 ? out_w : (w - 1) * stride + k;
    // the given output must be a valid conv2d input producing [h,w]
    if ((H - k) / stride + 1 != h || (W - k) / stride + 1 != w || H < k || W < k) {
        throw ShapeError("conv2d_transpose: output size " + std::to_string(H) + "x" +
                         std::to_string(W) + " inconsistent with input and stride");
    }

    Tensor<T> out = Tensor<T>::zeros({B, C, H, W});
    const int ckk = C * k * k, hw = h * w;
    std::vector<T> tmp(static_cast<size_t>(ckk) * hw);
    for (int b = 0; b < B; ++b) {
        std::fill(tmp.begin(), tmp.end(), T(0));
        detail::gemm_tn_acc(ckk, hw, F, K.data(), x.data() + static_cast<size_t>(b) * F * hw,
                            tmp.data());
        detail::col2im_acc(tmp.data(), C, H, W, k, stride, h, w,
                           out.data() + static_cast<size_t>(b) * C * H * W);
    }
    detail::check_finite(out, "conv2d_transpose");
    if (tape) {
        auto xn = x.node(), kn = K.node(), on = out.node();
        tape->record(on, [xn, kn, on, B, C, H, W, F, k, stride, h, w] {
            const int ckk = C * k * k, hw = h * w;
            std::vector<T> colg(static_cast<size_t>(ckk) * hw);
            const bool want_x = xn->wants_grad(), want_k = kn->wants_grad();
            if (want_x) xn->ensure_grad();
            if (want_k) kn->ensure_grad();
            for (int b = 0; b < B; ++b) {
                const T* g = on->grad.data() + static_cast<size_t>(b) * C * H * W;
                detail::im2col(g, C, H, W, k, stride, h, w, colg.data());
                if (want_x) {
                    detail::gemm_nn_acc(F, hw, ckk, kn->value.data(), colg.data(),
                                        xn->grad.data() + static_cast<size_t>(b) * F * hw);
                }
                if (want_k) {
                    detail::gemm_nt_acc(F, ckk, hw,
                                        xn->value.data() + static_cast<size_t>(b) * F * hw,
                                        colg.data(), kn->grad.data());
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// classification loss

// Mean softmax cross-entropy over the batch, computed via log-sum-exp.
template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>* tape, const Tensor<T>& logits,
                                const std::vector<int>& labels) {
    if (logits.ndim() != 2) throw ShapeError("softmax_cross_entropy expects logits[BxK]");
    const int B = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(labels.size()) != B) {
        throw ShapeError("softmax_cross_entropy: batch size vs labels mismatch");
    }
    for (int lab : labels) {
        if (lab < 0 || lab >= K) throw ContractError("softmax_cross_entropy: label out of range");
    }
    T total = T(0);
    for (int b = 0; b < B; ++b) {
        const T* row = logits.data() + static_cast<size_t>(b) * K;
        T m = row[0];
        for (int j = 1; j < K; ++j) m = std::max(m, row[j]);
        T lse = T(0);
        for (int j = 0; j < K; ++j) lse += std::exp(row[j] - m);
        lse = m + std::log(lse);
        total += lse - row[labels[static_cast<size_t>(b)]];
    }
    Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(B));
    detail::check_finite(out, "softmax_cross_entropy");
    if (tape) {
        auto xn = logits.node();
        auto on = out.node();
        tape->record(on, [xn, on, labels, B, K] {
            if (!xn->wants_grad()) return;
            xn->ensure_grad();
            const T g = on->grad[0] / static_cast<T>(B);
            for (int b = 0; b < B; ++b) {
                const T* row = xn->value.data() + static_cast<size_t>(b) * K;
                T* grow = xn->grad.data() + static_cast<size_t>(b) * K;
                T m = row[0];
                for (int j = 1; j < K; ++j) m = std::max(m, row[j]);
                T z = T(0);
                for (int j = 0; j < K; ++j) z += std::exp(row[j] - m);
                for (int j = 0; j < K; ++j) {
                    T p = std::exp(row[j] - m) / z;
                    grow[j] += (p - (j == labels[static_cast<size_t>(b)] ? T(1) : T(0))) * g;
                }
            }
        });
    }
    return out;
}

}  // namespace vaelab
