#include "litefbcn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "litefbcn/flops.hpp"

namespace lfb {

std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride, Padding padding) {
    if (stride == 0) throw ShapeMismatch("conv: stride must be positive");
    if (padding == Padding::Same) {
        return (in + stride - 1) / stride;  // ceil(in / stride)
    }
    if (in < k) throw ShapeMismatch("conv: valid padding needs input >= kernel");
    return (in - k) / stride + 1;
}

std::size_t conv_pad_before(std::size_t in, std::size_t k, std::size_t stride, Padding padding) {
    if (padding == Padding::Valid) return 0;
    const std::size_t out = conv_out_dim(in, k, stride, padding);
    const std::size_t span = (out - 1) * stride + k;
    const std::size_t total = span > in ? span - in : 0;
    return total / 2;  // extra pad, if odd, goes after
}

const char* padding_name(Padding p) { return p == Padding::Same ? "same" : "valid"; }

Padding padding_from_name(const std::string& name) {
    if (name == "same") return Padding::Same;
    if (name == "valid") return Padding::Valid;
    throw ConfigError("unknown padding '" + name + "' (expected 'same' or 'valid')");
}

template <typename T>
nlohmann::json Layer<T>::describe() const {
    return nlohmann::json{{"kind", kind()}};
}

namespace {

std::size_t pad_total(std::size_t in, std::size_t k, std::size_t stride, Padding padding) {
    if (padding == Padding::Valid) return 0;
    const std::size_t out = conv_out_dim(in, k, stride, padding);
    const std::size_t span = (out - 1) * stride + k;
    return span > in ? span - in : 0;
}

// Zero-pads the spatial axes of an (N,H,W,C) tensor. Boundary taps then
// execute the full kernel footprint, which keeps the arithmetic-work count
// equal to the closed-form FLOP formulas.
template <typename T>
Tensor<T> pad_spatial(const Tensor<T>& x, std::size_t ph_before, std::size_t ph_total,
                      std::size_t pw_before, std::size_t pw_total) {
    if (ph_total == 0 && pw_total == 0) return x;
    const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    Tensor<T> out({n, h + ph_total, w + pw_total, c});
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < h; ++i) {
            const T* src = &x.at4(b, i, 0, 0);
            T* dst = &out.at4(b, i + ph_before, pw_before, 0);
            std::copy(src, src + w * c, dst);
        }
    }
    return out;
}

template <typename T>
Tensor<T> crop_spatial(const Tensor<T>& xp, const std::vector<std::size_t>& target,
                       std::size_t ph_before, std::size_t pw_before) {
    if (xp.shape() == target) return xp;
    const std::size_t n = target[0], h = target[1], w = target[2], c = target[3];
    Tensor<T> out(target);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < h; ++i) {
            const T* src = &xp.at4(b, i + ph_before, pw_before, 0);
            T* dst = &out.at4(b, i, 0, 0);
            std::copy(src, src + w * c, dst);
        }
    }
    return out;
}

template <typename T>
void check_rank4(const Tensor<T>& x, const char* who) {
    if (x.rank() != 4) {
        throw ShapeMismatch(std::string(who) + ": expected rank-4 (N,H,W,C) input, got rank " +
                            std::to_string(x.rank()));
    }
}

}  // namespace

// --- Conv2D -----------------------------------------------------------------

template <typename T>
Conv2D<T>::Conv2D(std::size_t kh, std::size_t kw, std::size_t in_ch, std::size_t out_ch,
                  std::size_t stride, Padding padding, bool has_bias)
    : kh_(kh), kw_(kw), in_ch_(in_ch), out_ch_(out_ch), stride_(stride), padding_(padding),
      has_bias_(has_bias), weight_(Tensor<T>({kh, kw, in_ch, out_ch})),
      bias_(Tensor<T>({out_ch})) {
    if (out_ch_ == 0) throw ConfigError("Conv2D: out-channel count must be positive");
}

template <typename T>
Tensor<T> Conv2D<T>::forward(const Tensor<T>& x, Mode) {
    check_rank4(x, "Conv2D");
    if (x.dim(3) != in_ch_) {
        throw ShapeMismatch("Conv2D: input has " + std::to_string(x.dim(3)) +
                            " channels, weights expect " + std::to_string(in_ch_));
    }
    const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2);
    const std::size_t oh = conv_out_dim(h, kh_, stride_, padding_);
    const std::size_t ow = conv_out_dim(w, kw_, stride_, padding_);
    const std::size_t phb = conv_pad_before(h, kh_, stride_, padding_);
    const std::size_t pwb = conv_pad_before(w, kw_, stride_, padding_);

    Tensor<T> xp = pad_spatial(x, phb, pad_total(h, kh_, stride_, padding_), pwb,
                               pad_total(w, kw_, stride_, padding_));
    cached_padded_ = xp;
    cached_in_shape_ = x.shape();

    Tensor<T> out({n, oh, ow, out_ch_});
    const std::uint64_t per_pos = 2ull * kh_ * kw_ * in_ch_ * out_ch_ + (has_bias_ ? out_ch_ : 0);
    std::vector<T> acc(out_ch_);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                if (has_bias_) {
                    std::copy(bias_.value.data(), bias_.value.data() + out_ch_, acc.begin());
                } else {
                    std::fill(acc.begin(), acc.end(), T(0));
                }
                for (std::size_t di = 0; di < kh_; ++di) {
                    for (std::size_t dj = 0; dj < kw_; ++dj) {
                        const T* xrow = &xp.at4(b, i * stride_ + di, j * stride_ + dj, 0);
                        const T* wrow = &weight_.value[((di * kw_ + dj) * in_ch_) * out_ch_];
                        for (std::size_t c = 0; c < in_ch_; ++c) {
                            const T xv = xrow[c];
                            const T* wk = wrow + c * out_ch_;
                            for (std::size_t k = 0; k < out_ch_; ++k) acc[k] += xv * wk[k];
                        }
                    }
                }
                std::copy(acc.begin(), acc.end(), &out.at4(b, i, j, 0));
                flops::tally(per_pos);
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> Conv2D<T>::backward(const Tensor<T>& grad_out) {
    if (!cached_padded_) throw UnrecordedForward("Conv2D::backward before forward");
    const Tensor<T>& xp = *cached_padded_;
    const std::size_t n = grad_out.dim(0), oh = grad_out.dim(1), ow = grad_out.dim(2);

    Tensor<T> dxp(xp.shape());
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                const T* g = &grad_out.at4(b, i, j, 0);
                if (has_bias_) {
                    for (std::size_t k = 0; k < out_ch_; ++k) bias_.grad[k] += g[k];
                }
                for (std::size_t di = 0; di < kh_; ++di) {
                    for (std::size_t dj = 0; dj < kw_; ++dj) {
                        const T* xrow = &xp.at4(b, i * stride_ + di, j * stride_ + dj, 0);
                        T* dxrow = &dxp.at4(b, i * stride_ + di, j * stride_ + dj, 0);
                        const std::size_t wbase = (di * kw_ + dj) * in_ch_ * out_ch_;
                        for (std::size_t c = 0; c < in_ch_; ++c) {
                            const T xv = xrow[c];
                            const T* wk = &weight_.value[wbase + c * out_ch_];
                            T* dwk = &weight_.grad[wbase + c * out_ch_];
                            T acc = T(0);
                            for (std::size_t k = 0; k < out_ch_; ++k) {
                                dwk[k] += xv * g[k];
                                acc += wk[k] * g[k];
                            }
                            dxrow[c] += acc;
                        }
                    }
                }
            }
        }
    }
    const std::size_t h = cached_in_shape_[1], w = cached_in_shape_[2];
    return crop_spatial(dxp, cached_in_shape_, conv_pad_before(h, kh_, stride_, padding_),
                        conv_pad_before(w, kw_, stride_, padding_));
}

template <typename T>
void Conv2D<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".weight", &weight_.value, &weight_.grad, true, false, false, ""});
    if (has_bias_) {
        out.push_back({prefix + ".bias", &bias_.value, &bias_.grad, true, false, false, ""});
    }
}

template <typename T>
std::vector<std::size_t> Conv2D<T>::output_shape(const std::vector<std::size_t>& in) const {
    return {in[0], conv_out_dim(in[1], kh_, stride_, padding_),
            conv_out_dim(in[2], kw_, stride_, padding_), out_ch_};
}

template <typename T>
std::uint64_t Conv2D<T>::flops(const std::vector<std::size_t>& in) const {
    const auto out = output_shape(in);
    const std::uint64_t positions = std::uint64_t(out[0]) * out[1] * out[2];
    return positions * (2ull * kh_ * kw_ * in_ch_ * out_ch_ + (has_bias_ ? out_ch_ : 0));
}

template <typename T>
nlohmann::json Conv2D<T>::describe() const {
    return {{"kind", "Conv2D"},   {"kernel", {kh_, kw_}},
            {"stride", stride_},  {"padding", padding_name(padding_)},
            {"channels", {in_ch_, out_ch_}}, {"has_bias", has_bias_}};
}

// --- DepthwiseConv2D ---------------------------------------------------------

template <typename T>
DepthwiseConv2D<T>::DepthwiseConv2D(std::size_t kh, std::size_t kw, std::size_t channels,
                                    std::size_t stride, Padding padding, bool has_bias)
    : kh_(kh), kw_(kw), channels_(channels), stride_(stride), padding_(padding),
      has_bias_(has_bias), weight_(Tensor<T>({kh, kw, channels})),
      bias_(Tensor<T>({channels})) {}

template <typename T>
Tensor<T> DepthwiseConv2D<T>::forward(const Tensor<T>& x, Mode) {
    check_rank4(x, "DepthwiseConv2D");
    if (x.dim(3) != channels_) {
        throw ShapeMismatch("DepthwiseConv2D: input has " + std::to_string(x.dim(3)) +
                            " channels, weights expect " + std::to_string(channels_));
    }
    const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2);
    const std::size_t oh = conv_out_dim(h, kh_, stride_, padding_);
    const std::size_t ow = conv_out_dim(w, kw_, stride_, padding_);
    const std::size_t phb = conv_pad_before(h, kh_, stride_, padding_);
    const std::size_t pwb = conv_pad_before(w, kw_, stride_, padding_);

    Tensor<T> xp = pad_spatial(x, phb, pad_total(h, kh_, stride_, padding_), pwb,
                               pad_total(w, kw_, stride_, padding_));
    cached_padded_ = xp;
    cached_in_shape_ = x.shape();

    Tensor<T> out({n, oh, ow, channels_});
    const std::uint64_t per_pos = 2ull * kh_ * kw_ * channels_ + (has_bias_ ? channels_ : 0);
    std::vector<T> acc(channels_);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                if (has_bias_) {
                    std::copy(bias_.value.data(), bias_.value.data() + channels_, acc.begin());
                } else {
                    std::fill(acc.begin(), acc.end(), T(0));
                }
                for (std::size_t di = 0; di < kh_; ++di) {
                    for (std::size_t dj = 0; dj < kw_; ++dj) {
                        const T* xrow = &xp.at4(b, i * stride_ + di, j * stride_ + dj, 0);
                        const T* wrow = &weight_.value[(di * kw_ + dj) * channels_];
                        for (std::size_t c = 0; c < channels_; ++c) acc[c] += xrow[c] * wrow[c];
                    }
                }
                std::copy(acc.begin(), acc.end(), &out.at4(b, i, j, 0));
                flops::tally(per_pos);
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> DepthwiseConv2D<T>::backward(const Tensor<T>& grad_out) {
    if (!cached_padded_) throw UnrecordedForward("DepthwiseConv2D::backward before forward");
    const Tensor<T>& xp = *cached_padded_;
    const std::size_t n = grad_out.dim(0), oh = grad_out.dim(1), ow = grad_out.dim(2);

    Tensor<T> dxp(xp.shape());
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                const T* g = &grad_out.at4(b, i, j, 0);
                if (has_bias_) {
                    for (std::size_t c = 0; c < channels_; ++c) bias_.grad[c] += g[c];
                }
                for (std::size_t di = 0; di < kh_; ++di) {
                    for (std::size_t dj = 0; dj < kw_; ++dj) {
                        const T* xrow = &xp.at4(b, i * stride_ + di, j * stride_ + dj, 0);
                        T* dxrow = &dxp.at4(b, i * stride_ + di, j * stride_ + dj, 0);
                        const std::size_t wbase = (di * kw_ + dj) * channels_;
                        for (std::size_t c = 0; c < channels_; ++c) {
                            weight_.grad[wbase + c] += xrow[c] * g[c];
                            dxrow[c] += weight_.value[wbase + c] * g[c];
                        }
                    }
                }
            }
        }
    }
    const std::size_t h = cached_in_shape_[1], w = cached_in_shape_[2];
    return crop_spatial(dxp, cached_in_shape_, conv_pad_before(h, kh_, stride_, padding_),
                        conv_pad_before(w, kw_, stride_, padding_));
}

template <typename T>
void DepthwiseConv2D<T>::collect_params(const std::string& prefix,
                                        std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".weight", &weight_.value, &weight_.grad, true, false, false, ""});
    if (has_bias_) {
        out.push_back({prefix + ".bias", &bias_.value, &bias_.grad, true, false, false, ""});
    }
}

template <typename T>
std::vector<std::size_t> DepthwiseConv2D<T>::output_shape(
    const std::vector<std::size_t>& in) const {
    return {in[0], conv_out_dim(in[1], kh_, stride_, padding_),
            conv_out_dim(in[2], kw_, stride_, padding_), channels_};
}

template <typename T>
std::uint64_t DepthwiseConv2D<T>::flops(const std::vector<std::size_t>& in) const {
    const auto out = output_shape(in);
    const std::uint64_t positions = std::uint64_t(out[0]) * out[1] * out[2];
    return positions * (2ull * kh_ * kw_ * channels_ + (has_bias_ ? channels_ : 0));
}

template <typename T>
nlohmann::json DepthwiseConv2D<T>::describe() const {
    return {{"kind", "DepthwiseConv2D"}, {"kernel", {kh_, kw_}},
            {"stride", stride_},         {"padding", padding_name(padding_)},
            {"channels", {channels_, channels_}}, {"has_bias", has_bias_}};
}

// --- Dense -------------------------------------------------------------------

template <typename T>
Dense<T>::Dense(std::size_t in_dim, std::size_t out_dim, bool has_bias)
    : in_dim_(in_dim), out_dim_(out_dim), has_bias_(has_bias),
      weight_(Tensor<T>({in_dim, out_dim})), bias_(Tensor<T>({out_dim})) {}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Mode) {
    if (x.rank() != 2 || x.dim(1) != in_dim_) {
        throw ShapeMismatch("Dense: expected (N," + std::to_string(in_dim_) + ") input");
    }
    cached_input_ = x;
    const std::size_t n = x.dim(0);
    Tensor<T> out({n, out_dim_});
    for (std::size_t b = 0; b < n; ++b) {
        T* orow = &out.at2(b, 0);
        if (has_bias_) {
            std::copy(bias_.value.data(), bias_.value.data() + out_dim_, orow);
        }
        const T* xrow = &x.at2(b, 0);
        for (std::size_t d = 0; d < in_dim_; ++d) {
            const T xv = xrow[d];
            const T* wrow = &weight_.value.at2(d, 0);
            for (std::size_t m = 0; m < out_dim_; ++m) orow[m] += xv * wrow[m];
        }
        flops::tally(2ull * in_dim_ * out_dim_ + (has_bias_ ? out_dim_ : 0));
    }
    return out;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_out) {
    if (!cached_input_) throw UnrecordedForward("Dense::backward before forward");
    const Tensor<T>& x = *cached_input_;
    const std::size_t n = x.dim(0);
    Tensor<T> dx(x.shape());
    for (std::size_t b = 0; b < n; ++b) {
        const T* g = &grad_out.at2(b, 0);
        const T* xrow = &x.at2(b, 0);
        T* dxrow = &dx.at2(b, 0);
        if (has_bias_) {
            for (std::size_t m = 0; m < out_dim_; ++m) bias_.grad[m] += g[m];
        }
        for (std::size_t d = 0; d < in_dim_; ++d) {
            const T* wrow = &weight_.value.at2(d, 0);
            T* dwrow = &weight_.grad.at2(d, 0);
            const T xv = xrow[d];
            T acc = T(0);
            for (std::size_t m = 0; m < out_dim_; ++m) {
                dwrow[m] += xv * g[m];
                acc += wrow[m] * g[m];
            }
            dxrow[d] = acc;
        }
    }
    return dx;
}

template <typename T>
void Dense<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back(
        {prefix + ".weight", &weight_.value, &weight_.grad, true, false, is_classifier_, ""});
    if (has_bias_) {
        out.push_back({prefix + ".bias", &bias_.value, &bias_.grad, true, false, false, ""});
    }
}

template <typename T>
std::vector<std::size_t> Dense<T>::output_shape(const std::vector<std::size_t>& in) const {
    return {in[0], out_dim_};
}

template <typename T>
std::uint64_t Dense<T>::flops(const std::vector<std::size_t>& in) const {
    return std::uint64_t(in[0]) * (2ull * in_dim_ * out_dim_ + (has_bias_ ? out_dim_ : 0));
}

template <typename T>
nlohmann::json Dense<T>::describe() const {
    return {{"kind", "Dense"},
            {"channels", {in_dim_, out_dim_}},
            {"has_bias", has_bias_},
            {"classifier", is_classifier_}};
}

// --- BatchNorm ----------------------------------------------------------------

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t features, T eps, T momentum)
    : features_(features), eps_(eps), momentum_(momentum),
      gamma_(Tensor<T>::full({features}, T(1))), beta_(Tensor<T>({features})),
      running_mean_(Tensor<T>({features}), false, true),
      running_var_(Tensor<T>::full({features}, T(1)), false, true) {}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Mode mode) {
    if (x.rank() < 2 || x.shape().back() != features_) {
        throw ShapeMismatch("BatchNorm: last axis must have " + std::to_string(features_) +
                            " features");
    }
    const std::size_t rows = x.size() / features_;
    if (rows == 0) throw ZeroBatch("BatchNorm: empty batch in train mode");

    Tensor<T> out(x.shape());
    if (mode == Mode::Infer) {
        for (std::size_t r = 0; r < rows; ++r) {
            const T* xrow = x.data() + r * features_;
            T* orow = out.data() + r * features_;
            for (std::size_t f = 0; f < features_; ++f) {
                const T inv = T(1) / std::sqrt(running_var_.value[f] + eps_);
                orow[f] = gamma_.value[f] * (xrow[f] - running_mean_.value[f]) * inv +
                          beta_.value[f];
            }
        }
        flops::tally(2ull * x.size());
        cached_xhat_.reset();
        return out;
    }

    std::vector<T> mean(features_, T(0)), var(features_, T(0));
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xrow = x.data() + r * features_;
        for (std::size_t f = 0; f < features_; ++f) mean[f] += xrow[f];
    }
    for (std::size_t f = 0; f < features_; ++f) mean[f] /= static_cast<T>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xrow = x.data() + r * features_;
        for (std::size_t f = 0; f < features_; ++f) {
            const T d = xrow[f] - mean[f];
            var[f] += d * d;
        }
    }
    for (std::size_t f = 0; f < features_; ++f) var[f] /= static_cast<T>(rows);

    cached_inv_std_.assign(features_, T(0));
    for (std::size_t f = 0; f < features_; ++f) {
        cached_inv_std_[f] = T(1) / std::sqrt(var[f] + eps_);
    }

    Tensor<T> xhat(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xrow = x.data() + r * features_;
        T* hrow = xhat.data() + r * features_;
        T* orow = out.data() + r * features_;
        for (std::size_t f = 0; f < features_; ++f) {
            hrow[f] = (xrow[f] - mean[f]) * cached_inv_std_[f];
            orow[f] = gamma_.value[f] * hrow[f] + beta_.value[f];
        }
    }
    flops::tally(2ull * x.size());

    for (std::size_t f = 0; f < features_; ++f) {
        running_mean_.value[f] = momentum_ * running_mean_.value[f] + (T(1) - momentum_) * mean[f];
        running_var_.value[f] = momentum_ * running_var_.value[f] + (T(1) - momentum_) * var[f];
    }

    cached_xhat_ = std::move(xhat);
    cached_rows_ = rows;
    return out;
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& grad_out) {
    if (!cached_xhat_) throw UnrecordedForward("BatchNorm::backward before train-mode forward");
    const Tensor<T>& xhat = *cached_xhat_;
    const std::size_t rows = cached_rows_;

    std::vector<T> sum_g(features_, T(0)), sum_gx(features_, T(0));
    for (std::size_t r = 0; r < rows; ++r) {
        const T* g = grad_out.data() + r * features_;
        const T* h = xhat.data() + r * features_;
        for (std::size_t f = 0; f < features_; ++f) {
            sum_g[f] += g[f];
            sum_gx[f] += g[f] * h[f];
        }
    }
    for (std::size_t f = 0; f < features_; ++f) {
        gamma_.grad[f] += sum_gx[f];
        beta_.grad[f] += sum_g[f];
    }

    Tensor<T> dx(grad_out.shape());
    const T inv_rows = T(1) / static_cast<T>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* g = grad_out.data() + r * features_;
        const T* h = xhat.data() + r * features_;
        T* d = dx.data() + r * features_;
        for (std::size_t f = 0; f < features_; ++f) {
            d[f] = gamma_.value[f] * cached_inv_std_[f] *
                   (g[f] - sum_g[f] * inv_rows - h[f] * sum_gx[f] * inv_rows);
        }
    }
    return dx;
}

template <typename T>
void BatchNorm<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".gamma", &gamma_.value, &gamma_.grad, true, false, false, ""});
    out.push_back({prefix + ".beta", &beta_.value, &beta_.grad, true, false, false, ""});
    out.push_back({prefix + ".running_mean", &running_mean_.value, nullptr, false, true, false, ""});
    out.push_back({prefix + ".running_var", &running_var_.value, nullptr, false, true, false, ""});
}

template <typename T>
std::vector<std::size_t> BatchNorm<T>::output_shape(const std::vector<std::size_t>& in) const {
    return in;
}

template <typename T>
std::uint64_t BatchNorm<T>::flops(const std::vector<std::size_t>& in) const {
    std::uint64_t numel = 1;
    for (std::size_t d : in) numel *= d;
    return 2ull * numel;  // inference: one scale, one shift per element
}

template <typename T>
nlohmann::json BatchNorm<T>::describe() const {
    return {{"kind", "BatchNorm"}, {"channels", {features_, features_}}, {"has_bias", false}};
}

// --- ReLU ---------------------------------------------------------------------

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, Mode) {
    cached_input_ = x;
    return relu(x);
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad_out) {
    if (!cached_input_) throw UnrecordedForward("ReLU::backward before forward");
    const Tensor<T>& x = *cached_input_;
    Tensor<T> dx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > T(0) ? grad_out[i] : T(0);
    return dx;
}

template <typename T>
T ReLU<T>::min_abs_cached_input() const {
    if (!cached_input_) throw UnrecordedForward("ReLU: no forward recorded");
    T m = std::numeric_limits<T>::infinity();
    for (std::size_t i = 0; i < cached_input_->size(); ++i) {
        m = std::min(m, std::abs((*cached_input_)[i]));
    }
    return m;
}

template <typename T>
nlohmann::json ReLU<T>::describe() const {
    return {{"kind", "ReLU"}};
}

// --- GlobalAvgPool --------------------------------------------------------------

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x, Mode) {
    check_rank4(x, "GlobalAvgPool");
    cached_in_shape_ = x.shape();
    const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    Tensor<T> out({n, c});
    for (std::size_t b = 0; b < n; ++b) {
        T* orow = &out.at2(b, 0);
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                const T* xrow = &x.at4(b, i, j, 0);
                for (std::size_t ch = 0; ch < c; ++ch) orow[ch] += xrow[ch];
            }
        }
        const T inv = T(1) / static_cast<T>(h * w);
        for (std::size_t ch = 0; ch < c; ++ch) orow[ch] *= inv;
        flops::tally(std::uint64_t(h) * w * c + c);
    }
    return out;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& grad_out) {
    if (cached_in_shape_.empty()) throw UnrecordedForward("GlobalAvgPool::backward before forward");
    const std::size_t n = cached_in_shape_[0], h = cached_in_shape_[1], w = cached_in_shape_[2],
                      c = cached_in_shape_[3];
    Tensor<T> dx(cached_in_shape_);
    const T inv = T(1) / static_cast<T>(h * w);
    for (std::size_t b = 0; b < n; ++b) {
        const T* g = &grad_out.at2(b, 0);
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                T* dxrow = &dx.at4(b, i, j, 0);
                for (std::size_t ch = 0; ch < c; ++ch) dxrow[ch] = g[ch] * inv;
            }
        }
    }
    return dx;
}

template <typename T>
std::vector<std::size_t> GlobalAvgPool<T>::output_shape(const std::vector<std::size_t>& in) const {
    return {in[0], in[3]};
}

template <typename T>
std::uint64_t GlobalAvgPool<T>::flops(const std::vector<std::size_t>& in) const {
    return std::uint64_t(in[0]) * (std::uint64_t(in[1]) * in[2] * in[3] + in[3]);
}

template <typename T>
nlohmann::json GlobalAvgPool<T>::describe() const {
    return {{"kind", "GlobalAvgPool"}};
}

#define LFB_INSTANTIATE_LAYERS(T)      \
    template class Layer<T>;           \
    template class Conv2D<T>;          \
    template class DepthwiseConv2D<T>; \
    template class Dense<T>;           \
    template class BatchNorm<T>;       \
    template class ReLU<T>;            \
    template class GlobalAvgPool<T>;

LFB_INSTANTIATE_LAYERS(float)
LFB_INSTANTIATE_LAYERS(double)

#undef LFB_INSTANTIATE_LAYERS

}  // namespace lfb
