#include "litefbcn/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "litefbcn/loss.hpp"
#include "litefbcn/rng.hpp"
#include "litefbcn/rtf.hpp"

namespace lfb {

// --- BackboneSpec ---------------------------------------------------------------

BackboneSpec BackboneSpec::micro(std::size_t h, std::size_t w, std::size_t c,
                                 const std::vector<std::size_t>& widths,
                                 const std::vector<std::size_t>& strides) {
    if (widths.size() != strides.size()) {
        throw ConfigError("backbone: widths and strides must have equal length");
    }
    BackboneSpec spec;
    spec.input_h = h;
    spec.input_w = w;
    spec.input_c = c;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        BackboneBlock b;
        b.kind = (i % 2 == 0) ? BackboneBlock::Kind::Standard
                              : BackboneBlock::Kind::DepthwiseSeparable;
        b.width = widths[i];
        b.stride = strides[i];
        spec.blocks.push_back(b);
    }
    return spec;
}

std::size_t BackboneSpec::out_channels() const {
    return blocks.empty() ? input_c : blocks.back().width;
}

std::vector<std::size_t> BackboneSpec::output_map() const {
    std::size_t h = input_h, w = input_w;
    for (const auto& b : blocks) {
        h = conv_out_dim(h, 3, b.stride, Padding::Same);
        w = conv_out_dim(w, 3, b.stride, Padding::Same);
        if (h == 0 || w == 0) throw ConfigError("backbone: feature map collapsed below 1x1");
    }
    return {h, w, out_channels()};
}

nlohmann::json BackboneSpec::to_json() const {
    nlohmann::json jblocks = nlohmann::json::array();
    for (const auto& b : blocks) {
        jblocks.push_back({{"kind", b.kind == BackboneBlock::Kind::Standard ? "standard" : "ds"},
                           {"width", b.width},
                           {"stride", b.stride}});
    }
    return {{"input", {input_h, input_w, input_c}}, {"blocks", jblocks}};
}

BackboneSpec BackboneSpec::from_json(const nlohmann::json& j) {
    BackboneSpec spec;
    if (j.contains("input")) {
        const auto& in = j.at("input");
        if (!in.is_array() || in.size() != 3) {
            throw ConfigError("backbone.input must be [H, W, C]");
        }
        spec.input_h = in[0].get<std::size_t>();
        spec.input_w = in[1].get<std::size_t>();
        spec.input_c = in[2].get<std::size_t>();
    }
    if (j.contains("blocks")) {
        for (const auto& jb : j.at("blocks")) {
            BackboneBlock b;
            const std::string kind = jb.at("kind").get<std::string>();
            if (kind == "standard") {
                b.kind = BackboneBlock::Kind::Standard;
            } else if (kind == "ds") {
                b.kind = BackboneBlock::Kind::DepthwiseSeparable;
            } else {
                throw ConfigError("backbone block kind '" + kind + "' unknown");
            }
            b.width = jb.at("width").get<std::size_t>();
            b.stride = jb.at("stride").get<std::size_t>();
            if (b.width == 0 || b.stride == 0) {
                throw ConfigError("backbone block width/stride must be positive");
            }
            spec.blocks.push_back(b);
        }
    }
    return spec;
}

template <typename T>
std::vector<Slot<T>> build_backbone_layers(const BackboneSpec& spec, const std::string& prefix) {
    std::vector<Slot<T>> out;
    std::size_t in_ch = spec.input_c;
    for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
        const BackboneBlock& b = spec.blocks[i];
        const std::string base = prefix + "." + std::to_string(i);
        if (b.kind == BackboneBlock::Kind::Standard) {
            out.push_back({base + ".conv", std::make_unique<Conv2D<T>>(3, 3, in_ch, b.width,
                                                                       b.stride, Padding::Same,
                                                                       /*has_bias=*/false)});
            out.push_back({base + ".bn", std::make_unique<BatchNorm<T>>(b.width)});
            out.push_back({base + ".relu", std::make_unique<ReLU<T>>()});
        } else {
            out.push_back({base + ".dw",
                           std::make_unique<DepthwiseConv2D<T>>(3, 3, in_ch, b.stride,
                                                                Padding::Same,
                                                                /*has_bias=*/false)});
            out.push_back({base + ".dw_bn", std::make_unique<BatchNorm<T>>(in_ch)});
            out.push_back({base + ".dw_relu", std::make_unique<ReLU<T>>()});
            out.push_back({base + ".pw", std::make_unique<Conv2D<T>>(1, 1, in_ch, b.width, 1,
                                                                     Padding::Valid,
                                                                     /*has_bias=*/false)});
            out.push_back({base + ".pw_bn", std::make_unique<BatchNorm<T>>(b.width)});
            out.push_back({base + ".pw_relu", std::make_unique<ReLU<T>>()});
        }
        in_ch = b.width;
    }
    return out;
}

// --- Network ----------------------------------------------------------------------

template <typename T>
Network<T>::Network(BackboneSpec backbone, HeadConfig head, std::uint64_t seed)
    : backbone_(std::move(backbone)), head_(head) {
    feature_channels_ = backbone_.out_channels();
    backbone_.output_map();  // validates the map never collapses

    trunk_a_ = build_backbone_layers<T>(backbone_, "backbone");

    std::size_t len = 0;
    switch (head_.variant) {
        case HeadVariant::BaselineGAP:
            reduced_channels_ = feature_channels_;
            gap_ = std::make_unique<GlobalAvgPool<T>>();
            len = feature_channels_;
            break;
        case HeadVariant::FastBCNN:
            reduced_channels_ = feature_channels_;
            pool_self_ = std::make_unique<BilinearPoolSelf<T>>();
            len = feature_channels_ * feature_channels_;
            break;
        case HeadVariant::LiteFBCN:
            reduced_channels_ = resolve_reduction(feature_channels_, head_.gamma);
            reducer_ = std::make_unique<Conv2D<T>>(1, 1, feature_channels_, reduced_channels_, 1,
                                                   Padding::Valid, head_.reducer_bias);
            pool_self_ = std::make_unique<BilinearPoolSelf<T>>();
            len = reduced_channels_ * reduced_channels_;
            break;
        case HeadVariant::BCNNDual:
            reduced_channels_ = feature_channels_;
            trunk_b_ = build_backbone_layers<T>(backbone_, "backbone_b");
            pool_dual_ = std::make_unique<BilinearPoolDual<T>>();
            len = feature_channels_ * feature_channels_;
            break;
    }

    if (head_.variant == HeadVariant::BaselineGAP) {
        auto cls = std::make_unique<Dense<T>>(len, head_.num_classes, /*has_bias=*/true);
        cls->mark_classifier();
        post_.push_back({"head.classifier", std::move(cls)});
    } else {
        post_.push_back({"head.norm", std::make_unique<SignedSqrtL2<T>>()});
        post_.push_back({"head.bn", std::make_unique<BatchNorm<T>>(len)});
        auto cls = std::make_unique<Dense<T>>(len, head_.num_classes, /*has_bias=*/true);
        cls->mark_classifier();
        post_.push_back({"head.classifier", std::move(cls)});
    }

    // Kaiming-uniform fan-in init for conv / dense kernels, zeros for biases,
    // batch-norm defaults from its constructor. One counter stream consumed in
    // enumeration order makes initialization a pure function of the seed.
    CounterRng rng(seed);
    for (ParamRef<T>& p : params()) {
        if (!p.trainable) continue;
        const auto& shape = p.value->shape();
        std::size_t fan_in = 0;
        if (p.kind == "Conv2D" && shape.size() == 4) {
            fan_in = shape[0] * shape[1] * shape[2];
        } else if (p.kind == "DepthwiseConv2D" && shape.size() == 3) {
            fan_in = shape[0] * shape[1];
        } else if (p.kind == "Dense" && shape.size() == 2) {
            fan_in = shape[0];
        }
        if (fan_in == 0) continue;  // biases, batch-norm parameters
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (std::size_t i = 0; i < p.value->size(); ++i) {
            (*p.value)[i] = static_cast<T>(rng.uniform_symmetric(bound));
        }
    }
}

template <typename T>
void Network<T>::check_input(const Tensor<T>& x) const {
    if (x.rank() != 4 || x.dim(1) != backbone_.input_h || x.dim(2) != backbone_.input_w ||
        x.dim(3) != backbone_.input_c) {
        throw VariantShapeMismatch(
            "input map does not match the model: expected (N," + std::to_string(backbone_.input_h) +
            "," + std::to_string(backbone_.input_w) + "," + std::to_string(backbone_.input_c) +
            ")");
    }
}

template <typename T>
Tensor<T> Network<T>::run_trunk(std::vector<Slot<T>>& trunk, const Tensor<T>& x, Mode mode) {
    Tensor<T> a = x;
    for (auto& slot : trunk) a = slot.layer->forward(a, mode);
    return a;
}

template <typename T>
Tensor<T> Network<T>::run_post(Tensor<T> p, Mode mode) {
    for (auto& slot : post_) {
        p = slot.layer->forward(p, mode);
        if (slot.name == "head.norm") last_embedding_ = p;
    }
    return p;
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& x, Mode mode) {
    if (head_.variant == HeadVariant::BCNNDual) return forward_pair(x, x, mode);
    check_input(x);
    Tensor<T> a = run_trunk(trunk_a_, x, mode);
    Tensor<T> p;
    switch (head_.variant) {
        case HeadVariant::BaselineGAP:
            p = gap_->forward(a, mode);
            last_embedding_ = p;
            break;
        case HeadVariant::FastBCNN:
            p = pool_self_->forward(a, mode);
            break;
        case HeadVariant::LiteFBCN:
            p = pool_self_->forward(reducer_->forward(a, mode), mode);
            break;
        default:
            break;
    }
    return run_post(std::move(p), mode);
}

template <typename T>
Tensor<T> Network<T>::forward_pair(const Tensor<T>& xa, const Tensor<T>& xb, Mode mode) {
    if (head_.variant != HeadVariant::BCNNDual) {
        throw VariantShapeMismatch("forward_pair: this head variant takes one feature map");
    }
    check_input(xa);
    check_input(xb);
    Tensor<T> a = run_trunk(trunk_a_, xa, mode);
    Tensor<T> b = run_trunk(trunk_b_, xb, mode);
    Tensor<T> p = pool_dual_->forward2(a, b, mode);
    return run_post(std::move(p), mode);
}

template <typename T>
Tensor<T> Network<T>::predict_proba(const Tensor<T>& x, Mode mode) {
    return softmax_rows(forward(x, mode));
}

template <typename T>
Tensor<T> Network<T>::backward(const Tensor<T>& dlogits) {
    Tensor<T> g = dlogits;
    for (auto it = post_.rbegin(); it != post_.rend(); ++it) {
        g = (*it).layer->backward(g);
    }
    switch (head_.variant) {
        case HeadVariant::BaselineGAP:
            g = gap_->backward(g);
            break;
        case HeadVariant::FastBCNN: {
            // (N, K*K) flat gradient back to the (N,K,K) pooled matrix
            Tensor<T> gm({g.dim(0), reduced_channels_, reduced_channels_}, g.vec());
            g = pool_self_->backward(gm);
            break;
        }
        case HeadVariant::LiteFBCN: {
            Tensor<T> gm({g.dim(0), reduced_channels_, reduced_channels_}, g.vec());
            g = pool_self_->backward(gm);
            g = reducer_->backward(g);
            break;
        }
        case HeadVariant::BCNNDual: {
            Tensor<T> gm({g.dim(0), feature_channels_, feature_channels_}, g.vec());
            auto [ga, gb] = pool_dual_->backward2(gm);
            for (auto it = trunk_b_.rbegin(); it != trunk_b_.rend(); ++it) {
                gb = (*it).layer->backward(gb);
            }
            g = std::move(ga);
            break;
        }
    }
    for (auto it = trunk_a_.rbegin(); it != trunk_a_.rend(); ++it) {
        g = (*it).layer->backward(g);
    }
    return g;
}

template <typename T>
void Network<T>::zero_grad() {
    for (ParamRef<T>& p : params()) {
        if (p.grad) {
            for (std::size_t i = 0; i < p.grad->size(); ++i) (*p.grad)[i] = T(0);
        }
    }
}

template <typename T>
std::vector<ParamRef<T>> Network<T>::params() {
    std::vector<ParamRef<T>> out;
    auto collect = [&out](const std::string& name, Layer<T>* layer) {
        const std::size_t before = out.size();
        layer->collect_params(name, out);
        for (std::size_t i = before; i < out.size(); ++i) out[i].kind = layer->kind();
    };
    for (auto& slot : trunk_a_) collect(slot.name, slot.layer.get());
    for (auto& slot : trunk_b_) collect(slot.name, slot.layer.get());
    if (reducer_) collect("head.reducer", reducer_.get());
    for (auto& slot : post_) collect(slot.name, slot.layer.get());
    return out;
}

template <typename T>
std::size_t Network<T>::bilinear_length() const {
    switch (head_.variant) {
        case HeadVariant::BaselineGAP: return feature_channels_;
        case HeadVariant::FastBCNN:
        case HeadVariant::BCNNDual: return feature_channels_ * feature_channels_;
        case HeadVariant::LiteFBCN: return reduced_channels_ * reduced_channels_;
    }
    return 0;
}

template <typename T>
const Tensor<T>& Network<T>::last_embedding() const {
    if (!last_embedding_) throw UnrecordedForward("last_embedding: no forward pass recorded");
    return *last_embedding_;
}

template <typename T>
T Network<T>::chain_input_min_abs() const {
    for (const auto& slot : post_) {
        if (const auto* chain = dynamic_cast<const SignedSqrtL2<T>*>(slot.layer.get())) {
            return chain->min_abs_cached_input();
        }
    }
    return std::numeric_limits<T>::infinity();
}

template <typename T>
T Network<T>::relu_input_min_abs() const {
    T m = std::numeric_limits<T>::infinity();
    auto scan = [&m](const std::vector<Slot<T>>& slots) {
        for (const auto& slot : slots) {
            if (const auto* r = dynamic_cast<const ReLU<T>*>(slot.layer.get())) {
                m = std::min(m, r->min_abs_cached_input());
            }
        }
    };
    scan(trunk_a_);
    scan(trunk_b_);
    return m;
}

template <typename T>
nlohmann::json Network<T>::describe() const {
    nlohmann::json layers = nlohmann::json::array();
    auto push = [&layers](const std::string& name, const Layer<T>* l) {
        nlohmann::json j = l->describe();
        j["name"] = name;
        layers.push_back(std::move(j));
    };
    for (const auto& slot : trunk_a_) push(slot.name, slot.layer.get());
    for (const auto& slot : trunk_b_) push(slot.name, slot.layer.get());
    if (reducer_) push("head.reducer", reducer_.get());
    if (gap_) push("head.gap", gap_.get());
    if (pool_self_) push("head.pool", pool_self_.get());
    if (pool_dual_) push("head.pool", pool_dual_.get());
    for (const auto& slot : post_) push(slot.name, slot.layer.get());

    return {{"backbone", backbone_.to_json()},
            {"head", head_.to_json()},
            {"layers", std::move(layers)}};
}

// --- accounting ---------------------------------------------------------------------

template <typename T>
ParamCountReport count_params(Network<T>& net) {
    ParamCountReport report;
    std::vector<std::string> order;
    std::map<std::string, ParamCountRow> rows;
    for (const ParamRef<T>& p : net.params()) {
        // strip the trailing ".weight"/".gamma"/... component
        const std::size_t dot = p.name.rfind('.');
        const std::string layer_name = p.name.substr(0, dot);
        auto it = rows.find(layer_name);
        if (it == rows.end()) {
            order.push_back(layer_name);
            it = rows.emplace(layer_name, ParamCountRow{layer_name, 0, 0}).first;
        }
        if (p.running) {
            it->second.running += p.value->size();
            report.running_total += p.value->size();
        } else {
            it->second.trainable += p.value->size();
            report.trainable_total += p.value->size();
        }
    }
    for (const auto& name : order) report.per_layer.push_back(rows.at(name));
    return report;
}

template <typename T>
FlopReport estimate_flops(Network<T>& net, const std::vector<std::size_t>& input_shape) {
    if (input_shape.size() != 4) throw ShapeMismatch("estimate_flops: expected (N,H,W,C)");
    FlopReport report;
    auto add_row = [&report](const std::string& name, std::uint64_t f) {
        report.per_layer.push_back({name, f});
        report.total += f;
        if (name.rfind("head.", 0) == 0) report.head_total += f;
    };

    std::vector<std::size_t> shape = input_shape;
    for (auto& slot : net.trunk_slots()) {
        add_row(slot.name, slot.layer->flops(shape));
        shape = slot.layer->output_shape(shape);
    }
    if (net.head_config().variant == HeadVariant::BCNNDual) {
        std::vector<std::size_t> shape_b = input_shape;
        for (auto& slot : net.trunk_b_slots()) {
            add_row(slot.name, slot.layer->flops(shape_b));
            shape_b = slot.layer->output_shape(shape_b);
        }
        add_row("head.pool",
                2ull * shape[0] * shape[1] * shape[2] * shape[3] * shape_b[3]);
        shape = {shape[0], shape[3], shape_b[3]};
    } else if (net.head_config().variant == HeadVariant::BaselineGAP) {
        add_row("head.gap", net.gap_layer().flops(shape));
        shape = net.gap_layer().output_shape(shape);
    } else {
        if (net.head_config().variant == HeadVariant::LiteFBCN) {
            add_row("head.reducer", net.reducer_layer().flops(shape));
            shape = net.reducer_layer().output_shape(shape);
        }
        add_row("head.pool", net.pool_self_layer().flops(shape));
        shape = net.pool_self_layer().output_shape(shape);
    }
    for (auto& slot : net.post_slots()) {
        add_row(slot.name, slot.layer->flops(shape));
        shape = slot.layer->output_shape(shape);
    }
    return report;
}

// --- checkpoints -----------------------------------------------------------------------

template <typename T>
void save_checkpoint(const std::filesystem::path& dir, Network<T>& net) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format"] = "litefbcn-checkpoint";
    manifest["version"] = 1;
    manifest["model"] = net.describe();
    nlohmann::json jparams = nlohmann::json::array();
    for (ParamRef<T>& p : net.params()) {
        const std::string file = p.name + kRtfExtension;
        write_rtf(dir / file, *p.value);
        jparams.push_back({{"name", p.name},
                           {"file", file},
                           {"shape", p.value->shape()},
                           {"dtype", dtype_of<T>() == Dtype::F32 ? "f32" : "f64"},
                           {"trainable", p.trainable},
                           {"running", p.running}});
    }
    manifest["params"] = std::move(jparams);
    std::ofstream f(dir / "manifest.json");
    if (!f) throw Error("cannot write checkpoint manifest in '" + dir.string() + "'");
    f << manifest.dump(2) << "\n";
}

template <typename T>
Network<T> load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream f(dir / "manifest.json");
    if (!f) throw Error("cannot open checkpoint manifest in '" + dir.string() + "'");
    nlohmann::json manifest = nlohmann::json::parse(f);
    const nlohmann::json& model = manifest.at("model");
    BackboneSpec bspec = BackboneSpec::from_json(model.at("backbone"));
    HeadConfig head = HeadConfig::from_json(model.at("head"));
    Network<T> net(std::move(bspec), head, /*seed=*/0);

    std::map<std::string, ParamRef<T>> by_name;
    for (ParamRef<T>& p : net.params()) by_name.emplace(p.name, p);

    std::set<std::string> restored;
    for (const auto& jp : manifest.at("params")) {
        const std::string name = jp.at("name").get<std::string>();
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw ConfigError("checkpoint parameter '" + name + "' does not fit the model");
        }
        Tensor<T> v = read_rtf_as<T>(dir / jp.at("file").get<std::string>());
        if (v.shape() != it->second.value->shape()) {
            throw ShapeMismatch("checkpoint parameter '" + name + "' has mismatched shape");
        }
        *it->second.value = std::move(v);
        restored.insert(name);
    }
    if (restored.size() != by_name.size()) {
        throw ConfigError("checkpoint incomplete: restored " + std::to_string(restored.size()) +
                          " of " + std::to_string(by_name.size()) + " parameters");
    }
    return net;
}

// --- gradient verification -----------------------------------------------------------

namespace {

double objective_value(Network<double>& net, const Tensor<double>& x,
                       const std::vector<std::size_t>& labels, double l2_strength) {
    Tensor<double> probs = net.predict_proba(x, Mode::Train);
    LossResult<double> lr = cross_entropy_loss(probs, labels);
    std::vector<const Tensor<double>*> cls;
    for (ParamRef<double>& p : net.params()) {
        if (p.classifier_weight) cls.push_back(p.value);
    }
    return lr.loss + l2_penalty(cls, l2_strength);
}

}  // namespace

GradCheckReport grad_check(Network<double>& net, const Tensor<double>& x,
                           const std::vector<std::size_t>& labels, double h,
                           std::size_t min_samples, double l2_strength, bool corrupt) {
    net.zero_grad();
    Tensor<double> probs = net.predict_proba(x, Mode::Train);
    LossResult<double> lr = cross_entropy_loss(probs, labels);
    net.backward(lr.dlogits);

    std::vector<ParamRef<double>> refs = net.params();
    std::vector<ParamRef<double>> trainable;
    for (ParamRef<double>& p : refs) {
        if (p.trainable) {
            if (p.classifier_weight) {
                for (std::size_t i = 0; i < p.value->size(); ++i) {
                    (*p.grad)[i] += 2.0 * l2_strength * (*p.value)[i];
                }
            }
            trainable.push_back(p);
        }
    }

    // Analytic gradients frozen before the finite-difference sweep mutates
    // parameters.
    std::vector<std::vector<double>> analytic;
    analytic.reserve(trainable.size());
    for (const ParamRef<double>& p : trainable) analytic.push_back(p.grad->vec());
    if (corrupt && !analytic.empty()) analytic[0][0] += 1.0;

    GradCheckReport report;
    // Smallest per-tensor quota whose clipped sum reaches min_samples (small
    // tensors contribute everything they have).
    std::size_t total_coords = 0, max_size = 0;
    for (const ParamRef<double>& p : trainable) {
        total_coords += p.value->size();
        max_size = std::max(max_size, p.value->size());
    }
    const std::size_t target = std::min(min_samples, total_coords);
    std::size_t quota = std::max<std::size_t>(
        1, trainable.empty() ? 1 : (target + trainable.size() - 1) / trainable.size());
    auto coverage = [&](std::size_t q) {
        std::size_t n = 0;
        for (const ParamRef<double>& p : trainable) n += std::min(q, p.value->size());
        return n;
    };
    while (quota < max_size && coverage(quota) < target) ++quota;

    // Below this magnitude the difference quotient at h = 1e-5 is dominated
    // by f64 rounding noise (~1e-11 on the loss), so a ratio test cannot
    // distinguish a correct gradient from a wrong one. Such coordinates are
    // held to an absolute agreement bound instead.
    constexpr double kRatioFloor = 1e-5;
    constexpr double kTinyAgreement = 1e-6;

    for (std::size_t t = 0; t < trainable.size(); ++t) {
        ParamRef<double>& p = trainable[t];
        const std::size_t n_idx = std::min(quota, p.value->size());
        for (std::size_t s = 0; s < n_idx; ++s) {
            const std::size_t idx = s * p.value->size() / n_idx;
            const double saved = (*p.value)[idx];
            (*p.value)[idx] = saved + h;
            const double fp = objective_value(net, x, labels, l2_strength);
            (*p.value)[idx] = saved - h;
            const double fm = objective_value(net, x, labels, l2_strength);
            (*p.value)[idx] = saved;

            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[t][idx];
            double rel;
            if (std::max(std::abs(a), std::abs(numeric)) >= kRatioFloor) {
                rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            } else {
                // both sides at noise level: flag only genuine disagreement
                rel = std::abs(a - numeric) < kTinyAgreement ? 0.0 : 1.0;
            }
            report.max_rel_error = std::max(report.max_rel_error, rel);
            auto [it, inserted] = report.per_kind.emplace(p.kind, rel);
            if (!inserted) it->second = std::max(it->second, rel);
            ++report.params_checked;
        }
    }

    // Layer kinds without parameters of their own (ReLU, pooling, the
    // normalization chain) are exercised by every gradient that flows through
    // them; report the chain-wide maximum for those.
    const nlohmann::json desc = net.describe();
    for (const auto& jl : desc.at("layers")) {
        const std::string kind = jl.at("kind").get<std::string>();
        report.per_kind.emplace(kind, report.max_rel_error);
    }
    return report;
}

Tensor<double> conditioned_check_input(Network<double>& net, std::uint64_t seed,
                                       std::size_t batch, double min_cell,
                                       std::size_t max_attempts) {
    // Parameter perturbations of h = 1e-5 can move preactivations by up to
    // roughly 1e-4 through a first-layer weight; keep every ReLU at least
    // this far from its kink.
    constexpr double kMinReluMargin = 2e-4;

    const BackboneSpec& spec = net.backbone_spec();
    double best_cell = -1.0, best_relu = -1.0;
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
        CounterRng rng(derive_seed(seed, 0xC0D1ull + attempt));
        Tensor<double> x({batch, spec.input_h, spec.input_w, spec.input_c});
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform_symmetric(2.0);
        net.forward(x, Mode::Train);
        const double cell_abs = net.chain_input_min_abs();
        const double relu_abs = net.relu_input_min_abs();
        best_cell = std::max(best_cell, cell_abs);
        best_relu = std::max(best_relu, relu_abs);
        if (cell_abs >= min_cell && relu_abs >= kMinReluMargin) return x;
    }
    throw NumericError(
        "conditioned_check_input: no well-conditioned evaluation point found (best chain cell " +
        std::to_string(best_cell) + ", best relu margin " + std::to_string(best_relu) + ")");
}

GradCheckReport conditioned_grad_check(const BackboneSpec& backbone, HeadConfig head,
                                       std::uint64_t seed, std::size_t batch,
                                       std::size_t min_samples, double l2_strength, bool corrupt,
                                       double h) {
    if (head.num_classes < 2) throw ConfigError("grad check needs at least 2 classes");
    std::vector<std::size_t> labels(batch);
    for (std::size_t i = 0; i < batch; ++i) labels[i] = i % head.num_classes;

    constexpr std::size_t kModelAttempts = 8;
    for (std::size_t k = 0; k < kModelAttempts; ++k) {
        Network<double> net(backbone, head, derive_seed(seed, 0x11ull + k));
        try {
            Tensor<double> x = conditioned_check_input(net, derive_seed(seed, 0x1000ull + k), batch);
            return grad_check(net, x, labels, h, min_samples, l2_strength, corrupt);
        } catch (const NumericError&) {
            if (k + 1 == kModelAttempts) throw;
        }
    }
    throw NumericError("conditioned_grad_check: unreachable");
}

// --- explicit instantiations ------------------------------------------------------------

#define LFB_INSTANTIATE_NETWORK(T)                                                        \
    template std::vector<Slot<T>> build_backbone_layers<T>(const BackboneSpec&,           \
                                                           const std::string&);           \
    template class Network<T>;                                                            \
    template ParamCountReport count_params<T>(Network<T>&);                               \
    template FlopReport estimate_flops<T>(Network<T>&, const std::vector<std::size_t>&);  \
    template void save_checkpoint<T>(const std::filesystem::path&, Network<T>&);          \
    template Network<T> load_checkpoint<T>(const std::filesystem::path&);

LFB_INSTANTIATE_NETWORK(float)
LFB_INSTANTIATE_NETWORK(double)

#undef LFB_INSTANTIATE_NETWORK

}  // namespace lfb
