#pragma once

#include <string>

#include "litefbcn/layer.hpp"

namespace lfb {

enum class HeadVariant { BaselineGAP, BCNNDual, FastBCNN, LiteFBCN };

const char* head_variant_name(HeadVariant v);
HeadVariant head_variant_from_name(const std::string& name);

struct HeadConfig {
    HeadVariant variant = HeadVariant::LiteFBCN;
    std::size_t gamma = 2;  // channel reduction factor, LiteFBCN only
    std::size_t num_classes = 2;
    bool reducer_bias = true;

    nlohmann::json to_json() const;
    static HeadConfig from_json(const nlohmann::json& j);
};

// K = C / gamma; throws NonDivisible when gamma does not divide C.
std::size_t resolve_reduction(std::size_t channels, std::size_t gamma);

// 1x1 convolution across channels: (N,H,W,C) x (1,1,C,K) -> (N,H,W,K).
// Linear projection only; no activation follows.
template <typename T>
Tensor<T> channel_reduce(const Tensor<T>& f, const Tensor<T>& w_cr, const Tensor<T>* bias);
template <typename T>
Tensor<T> channel_reduce(const Tensor<T>& f, const Tensor<T>& w_cr) {
    return channel_reduce(f, w_cr, static_cast<const Tensor<T>*>(nullptr));
}

// B[n] = sum_{i,j} f(i,j) (x) f(i,j)^T over spatial locations: (N,H,W,K) -> (N,K,K).
template <typename T>
Tensor<T> bilinear_pool_self(const Tensor<T>& f);

// B[n] = sum_{i,j} f_a(i,j) (x) f_b(i,j)^T; spatial dims must match exactly.
template <typename T>
Tensor<T> bilinear_pool_dual(const Tensor<T>& fa, const Tensor<T>& fb);

// Signed square root: sign(x) * sqrt(|x|), elementwise.
template <typename T>
Tensor<T> signed_sqrt(const Tensor<T>& x);

// Flatten each sample of B row-major, apply signed sqrt, then l2-normalize.
// All-zero rows stay all-zero.
template <typename T>
Tensor<T> normalize_bilinear(const Tensor<T>& b);

// Row-wise softmax on (N, num_classes) logits.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits);

// Closed-form parameter counts per head variant. Batch norm contributes 4 per
// feature (gamma, beta and the two running statistics); the trainable /
// running split is reported separately.
struct HeadParamCount {
    std::size_t reducer = 0;
    std::size_t batchnorm_trainable = 0;
    std::size_t batchnorm_running = 0;
    std::size_t classifier = 0;
    std::size_t bilinear_length = 0;

    std::size_t trainable() const { return reducer + batchnorm_trainable + classifier; }
    std::size_t total() const { return trainable() + batchnorm_running; }
};

HeadParamCount head_param_count(HeadVariant variant, std::size_t channels, std::size_t gamma,
                                std::size_t num_classes, std::size_t channels_b = 0,
                                bool reducer_bias = true);

// --- layers used by the head chain -------------------------------------------

template <typename T>
class BilinearPoolSelf : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    std::string kind() const override { return "BilinearPoolSelf"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::uint64_t flops(const std::vector<std::size_t>& in) const override;
    nlohmann::json describe() const override;

private:
    std::optional<Tensor<T>> cached_input_;
};

// Two-input pooling; forward2/backward2 carry the pair, the single-input
// Layer entry points are not part of its contract.
template <typename T>
class BilinearPoolDual : public Layer<T> {
public:
    Tensor<T> forward2(const Tensor<T>& fa, const Tensor<T>& fb, Mode mode);
    std::pair<Tensor<T>, Tensor<T>> backward2(const Tensor<T>& grad_out);

    Tensor<T> forward(const Tensor<T>&, Mode) override {
        throw Error("BilinearPoolDual: use forward2");
    }
    Tensor<T> backward(const Tensor<T>&) override { throw Error("BilinearPoolDual: use backward2"); }
    std::string kind() const override { return "BilinearPoolDual"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::uint64_t flops(const std::vector<std::size_t>& in) const override;
    nlohmann::json describe() const override;

private:
    std::optional<Tensor<T>> cached_a_, cached_b_;
};

// Signed square root followed by row-wise l2 normalization; flattens
// (N,Ka,Kb) to (N,Ka*Kb).
template <typename T>
class SignedSqrtL2 : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    std::string kind() const override { return "SignedSqrtL2"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    std::uint64_t flops(const std::vector<std::size_t>& in) const override;
    nlohmann::json describe() const override;

    // Smallest |x| seen by the signed square root in the latest forward. The
    // root's curvature explodes toward 0, so finite-difference verification
    // needs evaluation points where this stays comfortably positive.
    T min_abs_cached_input() const;

private:
    std::optional<Tensor<T>> cached_input_;   // pre-chain values (for d ssqrt)
    std::optional<Tensor<T>> cached_unit_;    // post-chain unit rows
    std::vector<T> cached_norms_;
};

inline constexpr double kSignedSqrtGradEps = 1e-8;
inline constexpr double kL2NormalizeEps = 1e-12;

}  // namespace lfb
