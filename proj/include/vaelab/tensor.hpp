#pragma once

#include <cmath>
#include <cstring>
#include <memory>
#include <span>
#include <vector>

#include "vaelab/common.hpp"
#include "vaelab/random.hpp"

namespace vaelab {

// Backing storage for one tensor. Ops hold these through shared_ptr so the
// tape's backward closures keep operands alive.
template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty until first backward touches it
    bool requires_grad = false;
    bool leaf = true;  // false iff produced by a recorded op

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
    bool wants_grad() const { return !leaf || requires_grad; }
};

// Cheap handle. Copying a Tensor aliases the same storage, which is what the
// tape and the optimizer rely on.
template <typename T>
class Tensor {
  public:
    using value_type = T;

    Tensor() = default;

    Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
        : node_(std::make_shared<TensorNode<T>>()) {
        for (int d : shape) {
            if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + shape_str(shape));
        }
        if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
            throw ShapeError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        }
        node_->shape = std::move(shape);
        node_->value = std::move(data);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return full(std::move(shape), T(0), requires_grad);
    }

    static Tensor full(Shape shape, T v, bool requires_grad = false) {
        std::vector<T> data(static_cast<size_t>(shape_numel(shape)), v);
        return Tensor(std::move(shape), std::move(data), requires_grad);
    }

    static Tensor scalar(T v) { return Tensor({1}, {v}); }

    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false) {
        std::vector<T> data(static_cast<size_t>(shape_numel(shape)));
        for (auto& x : data) x = static_cast<T>(rng.normal() * stddev);
        return Tensor(std::move(shape), std::move(data), requires_grad);
    }

    static Tensor uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false) {
        std::vector<T> data(static_cast<size_t>(shape_numel(shape)));
        for (auto& x : data) x = static_cast<T>(rng.uniform(lo, hi));
        return Tensor(std::move(shape), std::move(data), requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(node_->shape.size()); }
    int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }

    T* data() { return node_->value.data(); }
    const T* data() const { return node_->value.data(); }
    std::span<const T> values() const { return {node_->value.data(), node_->value.size()}; }

    T item() const {
        if (numel() != 1) throw ContractError("item() requires a scalar, got " + shape_str(shape()));
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool rg) {
        node_->requires_grad = rg;
        return *this;
    }
    bool is_leaf() const { return node_->leaf; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const T> grad() const {
        if (node_->grad.empty()) throw ContractError("tensor has no gradient");
        return {node_->grad.data(), node_->grad.size()};
    }
    T grad_at(int64_t i) const { return grad()[static_cast<size_t>(i)]; }

    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    // Leaf copy that shares no graph history; grads never flow through it.
    Tensor detach() const {
        Tensor out(node_->shape, node_->value, false);
        return out;
    }

    std::shared_ptr<TensorNode<T>> node() const { return node_; }

  private:
    std::shared_ptr<TensorNode<T>> node_;
};

template <typename T>
inline bool all_finite(const Tensor<T>& t) {
    for (T v : t.values()) {
        if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
}

}  // namespace vaelab
