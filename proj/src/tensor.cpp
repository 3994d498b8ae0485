#include "litefbcn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lfb {

namespace {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch(std::string(op) + ": operand shapes differ");
    }
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "mul");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] > T(0) ? a[i] : T(0);
    return out;
}

template <typename T>
Tensor<T> exp_elem(const Tensor<T>& a) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::exp(a[i]);
    return out;
}

template <typename T>
Tensor<T> log_elem(const Tensor<T>& a) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::log(a[i]);
    return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeMismatch("matmul: operands must be rank-2");
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeMismatch("matmul: inner dimensions disagree (" + std::to_string(k) +
                            " vs " + std::to_string(b.dim(0)) + ")");
    }
    Tensor<T> c({m, n});
    // i-k-j order: row of B streams through cache; accumulation order per
    // output element stays index-ascending in t, so results are reproducible.
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < k; ++t) {
            const T av = a.at2(i, t);
            const T* brow = b.data() + t * n;
            T* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

namespace {

template <typename T, typename Fold>
Tensor<T> reduce_impl(const Tensor<T>& a, const std::vector<std::size_t>& axes, T init,
                      Fold fold, bool divide_by_count) {
    const std::size_t rank = a.rank();
    std::vector<bool> reduced(rank, false);
    for (std::size_t ax : axes) {
        if (ax >= rank) throw BadAxis("reduce: axis " + std::to_string(ax) + " out of range");
        if (reduced[ax]) throw BadAxis("reduce: axis " + std::to_string(ax) + " repeated");
        reduced[ax] = true;
    }

    std::vector<std::size_t> out_shape;
    for (std::size_t d = 0; d < rank; ++d) {
        if (!reduced[d]) out_shape.push_back(a.dim(d));
    }
    if (out_shape.empty()) out_shape.push_back(1);

    std::size_t count = 1;
    for (std::size_t d = 0; d < rank; ++d) {
        if (reduced[d]) count *= a.dim(d);
    }

    Tensor<T> out = Tensor<T>::full(out_shape, init);

    // Walk the input in flat (ascending) order; map each element to its
    // output slot by dropping reduced axes.
    std::vector<std::size_t> idx(rank, 0);
    std::vector<std::size_t> out_stride(rank, 0);
    {
        std::size_t s = 1;
        for (std::size_t d = rank; d-- > 0;) {
            if (!reduced[d]) {
                out_stride[d] = s;
                s *= a.dim(d);
            }
        }
    }
    for (std::size_t flat = 0; flat < a.size(); ++flat) {
        std::size_t oflat = 0;
        for (std::size_t d = 0; d < rank; ++d) {
            if (!reduced[d]) oflat += idx[d] * out_stride[d];
        }
        fold(out[oflat], a[flat]);
        for (std::size_t d = rank; d-- > 0;) {
            if (++idx[d] < a.dim(d)) break;
            idx[d] = 0;
        }
    }

    if (divide_by_count && count > 0) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] /= static_cast<T>(count);
    }
    return out;
}

}  // namespace

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& a, const std::vector<std::size_t>& axes) {
    return reduce_impl<T>(a, axes, T(0), [](T& acc, T v) { acc += v; }, false);
}

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& a, const std::vector<std::size_t>& axes) {
    return reduce_impl<T>(a, axes, T(0), [](T& acc, T v) { acc += v; }, true);
}

template <typename T>
Tensor<T> reduce_max(const Tensor<T>& a, const std::vector<std::size_t>& axes) {
    return reduce_impl<T>(a, axes, std::numeric_limits<T>::lowest(),
                          [](T& acc, T v) { acc = std::max(acc, v); }, false);
}

#define LFB_INSTANTIATE(T)                                                            \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                    \
    template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                    \
    template Tensor<T> scale<T>(const Tensor<T>&, T);                                 \
    template Tensor<T> relu<T>(const Tensor<T>&);                                     \
    template Tensor<T> exp_elem<T>(const Tensor<T>&);                                 \
    template Tensor<T> log_elem<T>(const Tensor<T>&);                                 \
    template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                 \
    template Tensor<T> reduce_sum<T>(const Tensor<T>&, const std::vector<std::size_t>&);  \
    template Tensor<T> reduce_mean<T>(const Tensor<T>&, const std::vector<std::size_t>&); \
    template Tensor<T> reduce_max<T>(const Tensor<T>&, const std::vector<std::size_t>&);

LFB_INSTANTIATE(float)
LFB_INSTANTIATE(double)

#undef LFB_INSTANTIATE

}  // namespace lfb
