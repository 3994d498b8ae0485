#include "litefbcn/heads.hpp"

#include <cmath>
#include <limits>

#include "litefbcn/flops.hpp"

namespace lfb {

const char* head_variant_name(HeadVariant v) {
    switch (v) {
        case HeadVariant::BaselineGAP: return "baseline";
        case HeadVariant::BCNNDual: return "bcnn";
        case HeadVariant::FastBCNN: return "fbcnn";
        case HeadVariant::LiteFBCN: return "litefbcn";
    }
    return "?";
}

HeadVariant head_variant_from_name(const std::string& name) {
    if (name == "baseline") return HeadVariant::BaselineGAP;
    if (name == "bcnn") return HeadVariant::BCNNDual;
    if (name == "fbcnn") return HeadVariant::FastBCNN;
    if (name == "litefbcn") return HeadVariant::LiteFBCN;
    throw ConfigError("unknown head variant '" + name +
                      "' (expected baseline|bcnn|fbcnn|litefbcn)");
}

nlohmann::json HeadConfig::to_json() const {
    return {{"variant", head_variant_name(variant)},
            {"gamma", gamma},
            {"num_classes", num_classes},
            {"reducer_bias", reducer_bias}};
}

HeadConfig HeadConfig::from_json(const nlohmann::json& j) {
    HeadConfig c;
    if (j.contains("variant")) c.variant = head_variant_from_name(j.at("variant"));
    if (j.contains("gamma")) c.gamma = j.at("gamma").get<std::size_t>();
    if (j.contains("num_classes")) c.num_classes = j.at("num_classes").get<std::size_t>();
    if (j.contains("reducer_bias")) c.reducer_bias = j.at("reducer_bias").get<bool>();
    if (c.gamma == 0) throw ConfigError("head.gamma must be positive");
    if (c.num_classes == 0) throw ConfigError("head.num_classes must be positive");
    return c;
}

std::size_t resolve_reduction(std::size_t channels, std::size_t gamma) {
    if (gamma == 0) throw NonDivisible("channel reduction factor must be positive");
    if (channels % gamma != 0) {
        throw NonDivisible("channel count " + std::to_string(channels) +
                           " is not divisible by reduction factor " + std::to_string(gamma));
    }
    return channels / gamma;
}

template <typename T>
Tensor<T> channel_reduce(const Tensor<T>& f, const Tensor<T>& w_cr, const Tensor<T>* bias) {
    if (f.rank() != 4) throw ShapeMismatch("channel_reduce: expected (N,H,W,C) input");
    if (w_cr.rank() != 4 || w_cr.dim(0) != 1 || w_cr.dim(1) != 1) {
        throw ShapeMismatch("channel_reduce: weights must be (1,1,C,K)");
    }
    const std::size_t c = f.dim(3), k = w_cr.dim(3);
    if (w_cr.dim(2) != c) {
        throw ShapeMismatch("channel_reduce: weight channel dim " + std::to_string(w_cr.dim(2)) +
                            " does not match input channels " + std::to_string(c));
    }
    if (bias && bias->size() != k) throw ShapeMismatch("channel_reduce: bias length != K");

    const std::size_t n = f.dim(0), h = f.dim(1), w = f.dim(2);
    Tensor<T> out({n, h, w, k});
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                const T* xrow = &f.at4(b, i, j, 0);
                T* orow = &out.at4(b, i, j, 0);
                if (bias) {
                    for (std::size_t t = 0; t < k; ++t) orow[t] = (*bias)[t];
                }
                for (std::size_t ci = 0; ci < c; ++ci) {
                    const T xv = xrow[ci];
                    const T* wrow = &w_cr[ci * k];
                    for (std::size_t t = 0; t < k; ++t) orow[t] += xv * wrow[t];
                }
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> bilinear_pool_self(const Tensor<T>& f) {
    if (f.rank() != 4) throw ShapeMismatch("bilinear_pool_self: expected (N,H,W,K) input");
    const std::size_t n = f.dim(0), h = f.dim(1), w = f.dim(2), k = f.dim(3);
    Tensor<T> out({n, k, k});
    for (std::size_t b = 0; b < n; ++b) {
        T* bmat = &out.at3(b, 0, 0);
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                const T* v = &f.at4(b, i, j, 0);
                for (std::size_t a = 0; a < k; ++a) {
                    const T va = v[a];
                    T* row = bmat + a * k;
                    for (std::size_t bb = 0; bb < k; ++bb) row[bb] += va * v[bb];
                }
            }
        }
        flops::tally(2ull * h * w * k * k);
    }
    return out;
}

template <typename T>
Tensor<T> bilinear_pool_dual(const Tensor<T>& fa, const Tensor<T>& fb) {
    if (fa.rank() != 4 || fb.rank() != 4) {
        throw ShapeMismatch("bilinear_pool_dual: expected (N,H,W,K) inputs");
    }
    if (fa.dim(0) != fb.dim(0)) throw ShapeMismatch("bilinear_pool_dual: batch sizes differ");
    if (fa.dim(1) != fb.dim(1) || fa.dim(2) != fb.dim(2)) {
        throw SpatialMismatch("bilinear_pool_dual: spatial dims differ (" +
                              std::to_string(fa.dim(1)) + "x" + std::to_string(fa.dim(2)) +
                              " vs " + std::to_string(fb.dim(1)) + "x" +
                              std::to_string(fb.dim(2)) + ")");
    }
    const std::size_t n = fa.dim(0), h = fa.dim(1), w = fa.dim(2);
    const std::size_t ka = fa.dim(3), kb = fb.dim(3);
    Tensor<T> out({n, ka, kb});
    for (std::size_t b = 0; b < n; ++b) {
        T* bmat = &out.at3(b, 0, 0);
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                const T* va = &fa.at4(b, i, j, 0);
                const T* vb = &fb.at4(b, i, j, 0);
                for (std::size_t a = 0; a < ka; ++a) {
                    const T av = va[a];
                    T* row = bmat + a * kb;
                    for (std::size_t t = 0; t < kb; ++t) row[t] += av * vb[t];
                }
            }
        }
        flops::tally(2ull * h * w * ka * kb);
    }
    return out;
}

template <typename T>
Tensor<T> signed_sqrt(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] >= T(0) ? std::sqrt(x[i]) : -std::sqrt(-x[i]);
    }
    return out;
}

template <typename T>
Tensor<T> normalize_bilinear(const Tensor<T>& b) {
    if (b.rank() < 2) throw ShapeMismatch("normalize_bilinear: expected rank >= 2");
    const std::size_t n = b.dim(0);
    const std::size_t len = b.size() / n;
    Tensor<T> out({n, len});
    for (std::size_t r = 0; r < n; ++r) {
        const T* src = b.data() + r * len;
        T* dst = out.data() + r * len;
        T sq = T(0);
        for (std::size_t i = 0; i < len; ++i) {
            dst[i] = src[i] >= T(0) ? std::sqrt(src[i]) : -std::sqrt(-src[i]);
            sq += dst[i] * dst[i];
        }
        const T norm = std::sqrt(sq);
        const T inv = T(1) / std::max(norm, static_cast<T>(kL2NormalizeEps));
        for (std::size_t i = 0; i < len; ++i) dst[i] *= inv;
    }
    return out;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
    if (logits.rank() != 2) throw ShapeMismatch("softmax_rows: expected (N,classes)");
    const std::size_t n = logits.dim(0), m = logits.dim(1);
    Tensor<T> out(logits.shape());
    for (std::size_t r = 0; r < n; ++r) {
        const T* x = &logits.at2(r, 0);
        T* y = &out.at2(r, 0);
        T mx = x[0];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, x[j]);
        T sum = T(0);
        for (std::size_t j = 0; j < m; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        const T inv = T(1) / sum;
        for (std::size_t j = 0; j < m; ++j) y[j] *= inv;
    }
    return out;
}

HeadParamCount head_param_count(HeadVariant variant, std::size_t channels, std::size_t gamma,
                                std::size_t num_classes, std::size_t channels_b,
                                bool reducer_bias) {
    HeadParamCount p;
    switch (variant) {
        case HeadVariant::BaselineGAP:
            p.bilinear_length = channels;  // pooled vector, first-order
            p.classifier = channels * num_classes + num_classes;
            return p;
        case HeadVariant::FastBCNN: {
            const std::size_t len = channels * channels;
            p.bilinear_length = len;
            p.batchnorm_trainable = 2 * len;
            p.batchnorm_running = 2 * len;
            p.classifier = len * num_classes + num_classes;
            return p;
        }
        case HeadVariant::BCNNDual: {
            if (channels_b == 0) channels_b = channels;
            const std::size_t len = channels * channels_b;
            p.bilinear_length = len;
            p.batchnorm_trainable = 2 * len;
            p.batchnorm_running = 2 * len;
            p.classifier = len * num_classes + num_classes;
            return p;
        }
        case HeadVariant::LiteFBCN: {
            const std::size_t k = resolve_reduction(channels, gamma);
            const std::size_t len = k * k;
            p.reducer = channels * k + (reducer_bias ? k : 0);
            p.bilinear_length = len;
            p.batchnorm_trainable = 2 * len;
            p.batchnorm_running = 2 * len;
            p.classifier = len * num_classes + num_classes;
            return p;
        }
    }
    throw ConfigError("unknown head variant");
}

// --- layers -------------------------------------------------------------------

template <typename T>
Tensor<T> BilinearPoolSelf<T>::forward(const Tensor<T>& x, Mode) {
    Tensor<T> out = bilinear_pool_self(x);
    cached_input_ = x;
    return out;
}

template <typename T>
Tensor<T> BilinearPoolSelf<T>::backward(const Tensor<T>& grad_out) {
    if (!cached_input_) throw UnrecordedForward("BilinearPoolSelf::backward before forward");
    const Tensor<T>& f = *cached_input_;
    const std::size_t n = f.dim(0), h = f.dim(1), w = f.dim(2), k = f.dim(3);

    // dF(i,j) = (G + G^T) F(i,j)
    Tensor<T> sym({n, k, k});
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t c = 0; c < k; ++c) {
                sym.at3(b, a, c) = grad_out.at3(b, a, c) + grad_out.at3(b, c, a);
            }
        }
    }
    Tensor<T> dx(f.shape());
    for (std::size_t b = 0; b < n; ++b) {
        const T* smat = &sym.at3(b, 0, 0);
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                const T* v = &f.at4(b, i, j, 0);
                T* d = &dx.at4(b, i, j, 0);
                for (std::size_t a = 0; a < k; ++a) {
                    const T* srow = smat + a * k;
                    T acc = T(0);
                    for (std::size_t c = 0; c < k; ++c) acc += srow[c] * v[c];
                    d[a] = acc;
                }
            }
        }
    }
    return dx;
}

template <typename T>
std::vector<std::size_t> BilinearPoolSelf<T>::output_shape(
    const std::vector<std::size_t>& in) const {
    return {in[0], in[3], in[3]};
}

template <typename T>
std::uint64_t BilinearPoolSelf<T>::flops(const std::vector<std::size_t>& in) const {
    return std::uint64_t(in[0]) * 2ull * in[1] * in[2] * in[3] * in[3];
}

template <typename T>
nlohmann::json BilinearPoolSelf<T>::describe() const {
    return {{"kind", "BilinearPoolSelf"}};
}

template <typename T>
Tensor<T> BilinearPoolDual<T>::forward2(const Tensor<T>& fa, const Tensor<T>& fb, Mode) {
    Tensor<T> out = bilinear_pool_dual(fa, fb);
    cached_a_ = fa;
    cached_b_ = fb;
    return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> BilinearPoolDual<T>::backward2(const Tensor<T>& grad_out) {
    if (!cached_a_ || !cached_b_) {
        throw UnrecordedForward("BilinearPoolDual::backward before forward");
    }
    const Tensor<T>& fa = *cached_a_;
    const Tensor<T>& fb = *cached_b_;
    const std::size_t n = fa.dim(0), h = fa.dim(1), w = fa.dim(2);
    const std::size_t ka = fa.dim(3), kb = fb.dim(3);

    Tensor<T> da(fa.shape()), db(fb.shape());
    for (std::size_t b = 0; b < n; ++b) {
        const T* g = &grad_out.at3(b, 0, 0);
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                const T* va = &fa.at4(b, i, j, 0);
                const T* vb = &fb.at4(b, i, j, 0);
                T* pa = &da.at4(b, i, j, 0);
                T* pb = &db.at4(b, i, j, 0);
                for (std::size_t a = 0; a < ka; ++a) {
                    const T* grow = g + a * kb;
                    T acc = T(0);
                    for (std::size_t t = 0; t < kb; ++t) {
                        acc += grow[t] * vb[t];
                        pb[t] += grow[t] * va[a];
                    }
                    pa[a] = acc;
                }
            }
        }
    }
    return {std::move(da), std::move(db)};
}

template <typename T>
std::vector<std::size_t> BilinearPoolDual<T>::output_shape(
    const std::vector<std::size_t>& in) const {
    return {in[0], in[3], in[3]};
}

template <typename T>
std::uint64_t BilinearPoolDual<T>::flops(const std::vector<std::size_t>& in) const {
    return std::uint64_t(in[0]) * 2ull * in[1] * in[2] * in[3] * in[3];
}

template <typename T>
nlohmann::json BilinearPoolDual<T>::describe() const {
    return {{"kind", "BilinearPoolDual"}};
}

template <typename T>
Tensor<T> SignedSqrtL2<T>::forward(const Tensor<T>& x, Mode) {
    const std::size_t n = x.dim(0);
    const std::size_t len = x.size() / n;
    cached_input_ = x;
    cached_norms_.assign(n, T(0));

    Tensor<T> out({n, len});
    for (std::size_t r = 0; r < n; ++r) {
        const T* src = x.data() + r * len;
        T* dst = out.data() + r * len;
        T sq = T(0);
        for (std::size_t i = 0; i < len; ++i) {
            dst[i] = src[i] >= T(0) ? std::sqrt(src[i]) : -std::sqrt(-src[i]);
            sq += dst[i] * dst[i];
        }
        const T norm = std::sqrt(sq);
        cached_norms_[r] = norm;
        const T inv = T(1) / std::max(norm, static_cast<T>(kL2NormalizeEps));
        for (std::size_t i = 0; i < len; ++i) dst[i] *= inv;
        flops::tally(5ull * len + 1);  // ssqrt 2/elem, dot 2/elem, divide 1/elem, one sqrt
    }
    cached_unit_ = out;
    return out;
}

template <typename T>
Tensor<T> SignedSqrtL2<T>::backward(const Tensor<T>& grad_out) {
    if (!cached_input_ || !cached_unit_) {
        throw UnrecordedForward("SignedSqrtL2::backward before forward");
    }
    const Tensor<T>& x = *cached_input_;
    const Tensor<T>& z = *cached_unit_;
    const std::size_t n = grad_out.dim(0);
    const std::size_t len = grad_out.size() / n;

    Tensor<T> dx(x.shape());
    for (std::size_t r = 0; r < n; ++r) {
        const T* g = grad_out.data() + r * len;
        const T* zr = z.data() + r * len;
        const T* xr = x.data() + r * len;
        T* d = dx.data() + r * len;
        const T inv_norm = T(1) / std::max(cached_norms_[r], static_cast<T>(kL2NormalizeEps));
        T gz = T(0);
        for (std::size_t i = 0; i < len; ++i) gz += g[i] * zr[i];
        for (std::size_t i = 0; i < len; ++i) {
            const T dy = (g[i] - zr[i] * gz) * inv_norm;  // through l2
            const T dsz = T(1) / (T(2) * std::sqrt(std::abs(xr[i])) +
                                  static_cast<T>(kSignedSqrtGradEps));
            d[i] = dy * dsz;
        }
    }
    return dx;
}

template <typename T>
T SignedSqrtL2<T>::min_abs_cached_input() const {
    if (!cached_input_) throw UnrecordedForward("SignedSqrtL2: no forward recorded");
    T m = std::numeric_limits<T>::infinity();
    for (std::size_t i = 0; i < cached_input_->size(); ++i) {
        m = std::min(m, std::abs((*cached_input_)[i]));
    }
    return m;
}

template <typename T>
std::vector<std::size_t> SignedSqrtL2<T>::output_shape(const std::vector<std::size_t>& in) const {
    std::size_t len = 1;
    for (std::size_t i = 1; i < in.size(); ++i) len *= in[i];
    return {in[0], len};
}

template <typename T>
std::uint64_t SignedSqrtL2<T>::flops(const std::vector<std::size_t>& in) const {
    std::size_t len = 1;
    for (std::size_t i = 1; i < in.size(); ++i) len *= in[i];
    return std::uint64_t(in[0]) * (5ull * len + 1);
}

template <typename T>
nlohmann::json SignedSqrtL2<T>::describe() const {
    return {{"kind", "SignedSqrtL2"}};
}

#define LFB_INSTANTIATE_HEADS(T)                                                              \
    template Tensor<T> channel_reduce<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*); \
    template Tensor<T> bilinear_pool_self<T>(const Tensor<T>&);                               \
    template Tensor<T> bilinear_pool_dual<T>(const Tensor<T>&, const Tensor<T>&);             \
    template Tensor<T> signed_sqrt<T>(const Tensor<T>&);                                      \
    template Tensor<T> normalize_bilinear<T>(const Tensor<T>&);                               \
    template Tensor<T> softmax_rows<T>(const Tensor<T>&);                                     \
    template class BilinearPoolSelf<T>;                                                       \
    template class BilinearPoolDual<T>;                                                       \
    template class SignedSqrtL2<T>;

LFB_INSTANTIATE_HEADS(float)
LFB_INSTANTIATE_HEADS(double)

#undef LFB_INSTANTIATE_HEADS

}  // namespace lfb
