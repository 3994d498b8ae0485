#include "litefbcn/loss.hpp"

#include <cmath>

namespace lfb {

template <typename T>
LossResult<T> cross_entropy_loss(const Tensor<T>& probs, const std::vector<std::size_t>& labels) {
    if (probs.rank() != 2) throw ShapeMismatch("cross_entropy_loss: expected (N,classes)");
    const std::size_t n = probs.dim(0), m = probs.dim(1);
    if (labels.size() != n) {
        throw ShapeMismatch("cross_entropy_loss: label count " + std::to_string(labels.size()) +
                            " != batch size " + std::to_string(n));
    }
    LossResult<T> r;
    r.dlogits = Tensor<T>(probs.shape());
    const T inv_n = T(1) / static_cast<T>(n);
    T loss = T(0);
    for (std::size_t b = 0; b < n; ++b) {
        const std::size_t y = labels[b];
        if (y >= m) throw LabelOutOfRange("cross_entropy_loss: label " + std::to_string(y));
        const T p = std::max(probs.at2(b, y), static_cast<T>(1e-12));
        loss -= std::log(p);
        for (std::size_t j = 0; j < m; ++j) {
            r.dlogits.at2(b, j) = (probs.at2(b, j) - (j == y ? T(1) : T(0))) * inv_n;
        }
    }
    r.loss = loss * inv_n;
    return r;
}

template <typename T>
T l2_penalty(const std::vector<const Tensor<T>*>& weights, T lambda) {
    T acc = T(0);
    for (const Tensor<T>* w : weights) {
        for (std::size_t i = 0; i < w->size(); ++i) acc += (*w)[i] * (*w)[i];
    }
    return lambda * acc;
}

template LossResult<float> cross_entropy_loss<float>(const Tensor<float>&,
                                                     const std::vector<std::size_t>&);
template LossResult<double> cross_entropy_loss<double>(const Tensor<double>&,
                                                       const std::vector<std::size_t>&);
template float l2_penalty<float>(const std::vector<const Tensor<float>*>&, float);
template double l2_penalty<double>(const std::vector<const Tensor<double>*>&, double);

}  // namespace lfb
