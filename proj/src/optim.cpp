#include "litefbcn/optim.hpp"

namespace lfb {

template <typename T>
void sgd_step(std::vector<ParamRef<T>>& params, SgdState<T>& state, T lr, T momentum,
              bool nesterov) {
    std::size_t vi = 0;
    for (ParamRef<T>& p : params) {
        if (!p.trainable) continue;
        if (vi == state.velocity.size()) {
            state.velocity.emplace_back(p.value->shape());
        }
        Tensor<T>& v = state.velocity[vi++];
        if (!v.same_shape(*p.value)) {
            throw ShapeMismatch("sgd_step: velocity buffer misaligned with '" + p.name + "'");
        }
        Tensor<T>& w = *p.value;
        const Tensor<T>& g = *p.grad;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const T vn = momentum * v[i] - lr * g[i];
            v[i] = vn;
            w[i] += nesterov ? momentum * vn - lr * g[i] : vn;
        }
    }
}

template void sgd_step<float>(std::vector<ParamRef<float>>&, SgdState<float>&, float, float, bool);
template void sgd_step<double>(std::vector<ParamRef<double>>&, SgdState<double>&, double, double,
                               bool);

}  // namespace lfb
