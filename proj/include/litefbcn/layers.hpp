#pragma once

#include <optional>

#include "litefbcn/layer.hpp"

namespace lfb {

// 2D convolution, cross-correlation semantics (no kernel flip).
// Input (N,H,W,C), weights (kh,kw,C,K), optional bias (K), output (N,H',W',K).
template <typename T>
class Conv2D : public Layer<T> {
public:
    Conv2D(std::size_t kh, std::size_t kw, std::size_t in_ch, std::size_t out_ch,
           std::size_t stride, Padding padding, bool has_bias);

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    std::string kind() const override { return "Conv2D"; }
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::uint64_t flops(const std::vector<std::size_t>& in) const override;
    nlohmann::json describe() const override;

    Param<T>& weight() { return weight_; }
    Param<T>* bias() { return has_bias_ ? &bias_ : nullptr; }
    std::size_t out_channels() const { return out_ch_; }

private:
    std::size_t kh_, kw_, in_ch_, out_ch_, stride_;
    Padding padding_;
    bool has_bias_;
    Param<T> weight_;
    Param<T> bias_;
    std::optional<Tensor<T>> cached_padded_;  // zero-padded forward input
    std::vector<std::size_t> cached_in_shape_;
};

// Depthwise 2D convolution: one kh x kw filter per channel, channel count
// preserved. Weights (kh,kw,C), optional bias (C).
template <typename T>
class DepthwiseConv2D : public Layer<T> {
public:
    DepthwiseConv2D(std::size_t kh, std::size_t kw, std::size_t channels, std::size_t stride,
                    Padding padding, bool has_bias);

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    std::string kind() const override { return "DepthwiseConv2D"; }
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::uint64_t flops(const std::vector<std::size_t>& in) const override;
    nlohmann::json describe() const override;

    Param<T>& weight() { return weight_; }
    Param<T>* bias() { return has_bias_ ? &bias_ : nullptr; }

private:
    std::size_t kh_, kw_, channels_, stride_;
    Padding padding_;
    bool has_bias_;
    Param<T> weight_;
    Param<T> bias_;
    std::optional<Tensor<T>> cached_padded_;
    std::vector<std::size_t> cached_in_shape_;
};

// Affine map on (N,D) -> (N,M); weights (D,M), bias (M).
template <typename T>
class Dense : public Layer<T> {
public:
    Dense(std::size_t in_dim, std::size_t out_dim, bool has_bias);

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    std::string kind() const override { return "Dense"; }
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::uint64_t flops(const std::vector<std::size_t>& in) const override;
    nlohmann::json describe() const override;

    Param<T>& weight() { return weight_; }
    Param<T>* bias() { return has_bias_ ? &bias_ : nullptr; }
    // Marks this layer as the classification layer so its kernel (not the
    // bias) carries the l2 penalty.
    void mark_classifier() { is_classifier_ = true; }
    bool is_classifier() const { return is_classifier_; }

private:
    std::size_t in_dim_, out_dim_;
    bool has_bias_;
    bool is_classifier_ = false;
    Param<T> weight_;
    Param<T> bias_;
    std::optional<Tensor<T>> cached_input_;
};

// Batch normalization over the last axis. Train mode normalizes with batch
// statistics (biased variance) and updates the running estimates as
// running <- momentum * running + (1 - momentum) * batch.
template <typename T>
class BatchNorm : public Layer<T> {
public:
    BatchNorm(std::size_t features, T eps = T(1e-5), T momentum = T(0.9));

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    std::string kind() const override { return "BatchNorm"; }
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::uint64_t flops(const std::vector<std::size_t>& in) const override;
    nlohmann::json describe() const override;

    std::size_t features() const { return features_; }

private:
    std::size_t features_;
    T eps_, momentum_;
    Param<T> gamma_, beta_;
    Param<T> running_mean_, running_var_;
    std::optional<Tensor<T>> cached_xhat_;
    std::vector<T> cached_inv_std_;
    std::size_t cached_rows_ = 0;
};

template <typename T>
class ReLU : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    std::string kind() const override { return "ReLU"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        return in;
    }
    std::uint64_t flops(const std::vector<std::size_t>&) const override { return 0; }
    nlohmann::json describe() const override;

    // Distance of the latest preactivations from the kink at 0; used to pick
    // well-conditioned finite-difference evaluation points.
    T min_abs_cached_input() const;

private:
    std::optional<Tensor<T>> cached_input_;
};

// Spatial mean per channel: (N,H,W,C) -> (N,C).
template <typename T>
class GlobalAvgPool : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    std::string kind() const override { return "GlobalAvgPool"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::uint64_t flops(const std::vector<std::size_t>& in) const override;
    nlohmann::json describe() const override;

private:
    std::vector<std::size_t> cached_in_shape_;
};

}  // namespace lfb
