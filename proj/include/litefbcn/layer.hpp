#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "litefbcn/tensor.hpp"

namespace lfb {

enum class Mode { Train, Infer };

enum class Padding { Same, Valid };

// View of one named parameter tensor. `trainable` and `running` are mutually
// exclusive; running-statistic tensors (batch-norm moving mean/variance) are
// saved in checkpoints but never receive gradients.
template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value = nullptr;
    Tensor<T>* grad = nullptr;  // null for running statistics
    bool trainable = true;
    bool running = false;
    bool classifier_weight = false;  // carries the l2 penalty when set
    std::string kind;                // owning layer kind, filled by Network::params
};

// One named parameter plus its gradient buffer.
template <typename T>
struct Param {
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = true;
    bool running = false;

    explicit Param(Tensor<T> v, bool trainable_ = true, bool running_ = false)
        : value(std::move(v)), grad(value.shape()), trainable(trainable_), running(running_) {}
    Param() = default;

    void zero_grad() {
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = T(0);
    }
};

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;

    // Forward caches whatever backward needs; backward returns dLoss/dInput
    // and accumulates parameter gradients. Calling backward before forward
    // throws UnrecordedForward.
    virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
    virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;

    virtual std::string kind() const = 0;
    virtual void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        (void)prefix;
        (void)out;
    }

    // Output shape and forward FLOPs for a single input shape (no batch
    // dimension handling differences: shapes carry the batch axis).
    virtual std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const = 0;
    virtual std::uint64_t flops(const std::vector<std::size_t>& in) const = 0;

    virtual nlohmann::json describe() const;
};

// Spatial output size for one axis.
std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride, Padding padding);
// Leading (top/left) zero-pad for `same` padding; `valid` pads nothing.
std::size_t conv_pad_before(std::size_t in, std::size_t k, std::size_t stride, Padding padding);

const char* padding_name(Padding p);
Padding padding_from_name(const std::string& name);

}  // namespace lfb
