#pragma once

#include <cmath>
#include <vector>

#include "vaelab/tensor.hpp"

namespace vaelab {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter moment buffers. Initialize once via init(); adam_step refuses
// to run on a state that does not match its parameter list.
template <typename T>
struct AdamState {
    AdamConfig cfg;
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
    int64_t step = 0;
    bool initialized = false;

    static AdamState init(const std::vector<Tensor<T>>& params, AdamConfig cfg = {}) {
        AdamState st;
        st.cfg = cfg;
        st.m.reserve(params.size());
        st.v.reserve(params.size());
        for (const auto& p : params) {
            st.m.emplace_back(static_cast<size_t>(p.numel()), T(0));
            st.v.emplace_back(static_cast<size_t>(p.numel()), T(0));
        }
        st.initialized = true;
        return st;
    }
};

// Standard Adam update with bias correction. Parameters without an
// accumulated gradient are treated as having zero gradient.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& st) {
    if (!st.initialized) throw ContractError("adam_step: state not initialized");
    if (st.m.size() != params.size()) {
        throw ContractError("adam_step: state holds " + std::to_string(st.m.size()) +
                            " slots for " + std::to_string(params.size()) + " parameters");
    }
    st.step += 1;
    const double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
    for (size_t p = 0; p < params.size(); ++p) {
        auto node = params[p].node();
        if (st.m[p].size() != node->value.size()) {
            throw ContractError("adam_step: parameter shape changed under the optimizer");
        }
        if (node->grad.empty()) continue;
        T* theta = node->value.data();
        const T* g = node->grad.data();
        T* m = st.m[p].data();
        T* v = st.v[p].data();
        const size_t n = node->value.size();
        for (size_t i = 0; i < n; ++i) {
            const double gi = static_cast<double>(g[i]);
            const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
            const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            theta[i] = static_cast<T>(static_cast<double>(theta[i]) -
                                      st.cfg.lr * mhat / (std::sqrt(vhat) + st.cfg.eps));
        }
    }
}

template <typename T>
void zero_grads(std::vector<Tensor<T>>& params) {
    for (auto& p : params) p.zero_grad();
}

}  // namespace vaelab
