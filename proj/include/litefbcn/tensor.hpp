#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "litefbcn/errors.hpp"

namespace lfb {

enum class Dtype : std::uint32_t { F32 = 0, F64 = 1 };

template <typename T>
constexpr Dtype dtype_of();
template <>
constexpr Dtype dtype_of<float>() { return Dtype::F32; }
template <>
constexpr Dtype dtype_of<double>() { return Dtype::F64; }

// Dense row-major tensor, channels-last convention: feature maps are
// (N, H, W, C). Data is one flat buffer; there are no strided views.
// Construction fills the buffer, after which callers treat tensors as
// read-only values (parameters are mutated only through ParamRef).
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(checked_size(shape_), T(0)) {}

    Tensor(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_size(shape_)) {
            throw ShapeMismatch("Tensor: data length does not match shape product");
        }
    }

    static Tensor full(std::vector<std::size_t> shape, T value) {
        Tensor t(std::move(shape));
        for (auto& v : t.data_) v = value;
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // Flat-index helpers for the common ranks.
    T& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const T& at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    T& at3(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    const T& at3(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    T& at4(std::size_t n, std::size_t i, std::size_t j, std::size_t c) {
        return data_[((n * shape_[1] + i) * shape_[2] + j) * shape_[3] + c];
    }
    const T& at4(std::size_t n, std::size_t i, std::size_t j, std::size_t c) const {
        return data_[((n * shape_[1] + i) * shape_[2] + j) * shape_[3] + c];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    static std::size_t checked_size(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) {
            if (d == 0) throw ShapeMismatch("Tensor: zero-sized dimension");
            n *= d;
        }
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

// --- elementary kernels -----------------------------------------------------
// All reductions run in ascending index order so repeated calls with the same
// inputs produce identical bits.

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T>
Tensor<T> relu(const Tensor<T>& a);
template <typename T>
Tensor<T> exp_elem(const Tensor<T>& a);
template <typename T>
Tensor<T> log_elem(const Tensor<T>& a);

// C[i][j] = sum_t A[i][t] * B[t][j]; both operands rank 2.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Reductions over a sorted set of axes; the reduced axes are dropped. Reducing
// over every axis yields a rank-1 tensor of size 1.
template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& a, const std::vector<std::size_t>& axes);
template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& a, const std::vector<std::size_t>& axes);
template <typename T>
Tensor<T> reduce_max(const Tensor<T>& a, const std::vector<std::size_t>& axes);

}  // namespace lfb
