#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vaelab/tensor.hpp"

namespace vaelab {

// Reverse-mode tape. Ops append one step each in creation order, so the step
// list is already a topological order of the recorded graph; backward replays
// it once in reverse.
//
// Gradient semantics: interior (op-produced) grads are cleared at the start of
// every backward pass, leaf grads accumulate across passes until zero_grad.
template <typename T>
class Tape {
  public:
    struct Step {
        std::shared_ptr<TensorNode<T>> out;
        std::function<void()> backward;
    };

    void record(std::shared_ptr<TensorNode<T>> out, std::function<void()> backward) {
        out->leaf = false;
        steps_.push_back({std::move(out), std::move(backward)});
    }

    size_t size() const { return steps_.size(); }
    bool empty() const { return steps_.empty(); }

    // Total step visits across all backward calls (instrumentation: one
    // backward over N steps must add exactly N).
    uint64_t steps_visited() const { return steps_visited_; }

    void backward(const Tensor<T>& loss) {
        if (loss.numel() != 1) {
            throw ContractError("backward requires a scalar loss, got " + shape_str(loss.shape()));
        }
        if (steps_.empty()) throw ContractError("backward on an empty tape");

        for (auto& step : steps_) {
            step.out->ensure_grad();
            std::fill(step.out->grad.begin(), step.out->grad.end(), T(0));
        }
        loss.node()->ensure_grad();
        loss.node()->grad[0] = T(1);

        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
            it->backward();
            ++steps_visited_;
        }
    }

  private:
    std::vector<Step> steps_;
    uint64_t steps_visited_ = 0;
};

}  // namespace vaelab
