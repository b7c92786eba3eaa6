#pragma once

#include "heatgrid/error.hpp"
#include "heatgrid/tensor.hpp"

namespace heatgrid {

// L = alpha * mean|pred - target| + (1 - alpha) * mean (pred - target)^2.
// alpha = 1 is pure mean-absolute loss, alpha = 0 pure mean-squared.
template <typename S>
Tensor<S> hybrid_loss(const Tensor<S>& pred, const Tensor<S>& target, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ContractError("hybrid_loss alpha must lie in [0,1], got " + std::to_string(alpha));
    }
    if (pred.shape() != target.shape()) {
        throw ShapeError("hybrid_loss shape mismatch: " + shape_to_string(pred.shape()) +
                         " vs " + shape_to_string(target.shape()));
    }
    auto diff = elementwise_sub(pred, target);
    auto l1 = mean_all(abs_all(diff));
    auto l2 = mean_all(square_all(diff));
    return elementwise_add(scalar_mul(l1, static_cast<S>(alpha)),
                           scalar_mul(l2, static_cast<S>(1.0 - alpha)));
}

}  // namespace heatgrid
