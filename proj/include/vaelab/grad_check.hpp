#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <type_traits>
#include <vector>

#include "vaelab/ops.hpp"
#include "vaelab/tape.hpp"

namespace vaelab {

struct GradCheckResult {
    double max_rel_err = 0.0;
    int64_t worst_index = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Central-difference oracle: compares (f(th+h)-f(th-h))/2h against the
// autodiff gradient, coordinate by coordinate, with relative error
// |a-n| / max(|a|,|n|,1e-8). Requires 64-bit scalars; central differences in
// f32 have no usable headroom.
//
// Nondifferentiable points (relu/abs kinks, the clipping boundary) must be
// handled by the caller: either keep inputs away from them or exclude the
// offending coordinates through `skip`. The relu-kink unit test demonstrates
// both the failure and the exclusion.
// Same oracle over a whole parameter list (a composed model loss). The
// builder must rebuild the forward pass from the parameters' current values
// on every call.
template <typename T>
GradCheckResult grad_check_params(const std::function<Tensor<T>(Tape<T>*)>& build,
                                  std::vector<Tensor<T>> params, double h) {
    static_assert(std::is_floating_point_v<T>);
    if (sizeof(T) < 8) throw ContractError("grad_check requires the 64-bit precision mode");

    for (auto& p : params) {
        p.set_requires_grad(true);
        p.zero_grad();
    }
    Tape<T> tape;
    Tensor<T> y = build(&tape);
    if (y.numel() != 1) throw ContractError("grad_check: f must be scalar-valued");
    tape.backward(y);

    GradCheckResult res;
    int64_t flat = 0;
    for (auto& p : params) {
        const bool has = p.has_grad();
        for (int64_t i = 0; i < p.numel(); ++i, ++flat) {
            const double a = has ? static_cast<double>(p.grad()[static_cast<size_t>(i)]) : 0.0;
            const T saved = p.data()[i];
            p.data()[i] = saved + static_cast<T>(h);
            const double fp = static_cast<double>(build(nullptr).item());
            p.data()[i] = saved - static_cast<T>(h);
            const double fm = static_cast<double>(build(nullptr).item());
            p.data()[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            const double rel = std::fabs(a - numeric) / denom;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_index = flat;
                res.worst_analytic = a;
                res.worst_numeric = numeric;
            }
        }
    }
    return res;
}

template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>(Tape<T>*, const Tensor<T>&)>& f,
                           const Tensor<T>& theta, double h,
                           const std::vector<uint8_t>* skip = nullptr) {
    static_assert(std::is_floating_point_v<T>);
    if (sizeof(T) < 8) throw ContractError("grad_check requires the 64-bit precision mode");
    if (h <= 0) throw ContractError("grad_check: h must be positive");

    Tensor<T> param(theta.shape(), std::vector<T>(theta.values().begin(), theta.values().end()),
                    true);
    Tape<T> tape;
    Tensor<T> y = f(&tape, param);
    if (y.numel() != 1) throw ContractError("grad_check: f must be scalar-valued");
    tape.backward(y);
    std::vector<T> analytic(param.grad().begin(), param.grad().end());

    GradCheckResult res;
    const int64_t n = param.numel();
    for (int64_t i = 0; i < n; ++i) {
        if (skip && (*skip)[static_cast<size_t>(i)]) continue;
        const T saved = param.data()[i];
        param.data()[i] = saved + static_cast<T>(h);
        const double fp = static_cast<double>(f(nullptr, param).item());
        param.data()[i] = saved - static_cast<T>(h);
        const double fm = static_cast<double>(f(nullptr, param).item());
        param.data()[i] = saved;

        const double numeric = (fp - fm) / (2.0 * h);
        const double a = static_cast<double>(analytic[static_cast<size_t>(i)]);
        const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
        const double rel = std::fabs(a - numeric) / denom;
        if (rel > res.max_rel_err) {
            res.max_rel_err = rel;
            res.worst_index = i;
            res.worst_analytic = a;
            res.worst_numeric = numeric;
        }
    }
    return res;
}

}  // namespace vaelab
