#pragma once

#include "litefbcn/layer.hpp"

namespace lfb {

template <typename T>
struct LossResult {
    T loss = T(0);
    Tensor<T> dlogits;  // gradient with respect to the pre-softmax logits
};

// Mean categorical cross-entropy over the batch. Probabilities are clamped
// at 1e-12 before the log; the combined softmax + cross-entropy gradient is
// (p - y) / N on the logits.
template <typename T>
LossResult<T> cross_entropy_loss(const Tensor<T>& probs, const std::vector<std::size_t>& labels);

// lambda * sum w^2 over the given tensors (the classification-layer kernels).
template <typename T>
T l2_penalty(const std::vector<const Tensor<T>*>& weights, T lambda);

}  // namespace lfb
