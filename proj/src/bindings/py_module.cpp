// Python bindings for the main numeric operations: raw-tensor file I/O,
// channel reduction, bilinear pooling, the normalization chain, parameter
// accounting, classification metrics, and repeated-measures ANOVA.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "litefbcn/anova.hpp"
#include "litefbcn/heads.hpp"
#include "litefbcn/metrics.hpp"
#include "litefbcn/rtf.hpp"

namespace py = pybind11;
using namespace lfb;

namespace {

template <typename T>
Tensor<T> tensor_from_array(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
    std::vector<std::size_t> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<std::size_t>(a.shape(i));
    std::vector<T> data(a.data(), a.data() + a.size());
    return Tensor<T>(std::move(shape), std::move(data));
}

template <typename T>
py::array_t<T> array_from_tensor(const Tensor<T>& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<T> out(shape);
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
}

using ArrayF64 = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::object py_read_rtf(const std::string& path) {
    TensorVariant v = read_rtf(path);
    if (auto* f = std::get_if<Tensor<float>>(&v)) return array_from_tensor(*f);
    return array_from_tensor(std::get<Tensor<double>>(v));
}

void py_write_rtf(const std::string& path, py::array array) {
    if (py::isinstance<py::array_t<float>>(array)) {
        write_rtf(path, tensor_from_array<float>(array.cast<py::array_t<float>>()));
    } else {
        write_rtf(path, tensor_from_array<double>(ArrayF64::ensure(array)));
    }
}

py::dict py_head_param_count(const std::string& variant, std::size_t channels, std::size_t gamma,
                             std::size_t num_classes, std::size_t channels_b, bool reducer_bias) {
    HeadParamCount p = head_param_count(head_variant_from_name(variant), channels, gamma,
                                        num_classes, channels_b, reducer_bias);
    py::dict d;
    d["reducer"] = p.reducer;
    d["batchnorm_trainable"] = p.batchnorm_trainable;
    d["batchnorm_running"] = p.batchnorm_running;
    d["classifier"] = p.classifier;
    d["bilinear_length"] = p.bilinear_length;
    d["trainable"] = p.trainable();
    d["total"] = p.total();
    return d;
}

py::array_t<std::uint64_t> py_confusion(const std::vector<std::size_t>& preds,
                                        const std::vector<std::size_t>& labels,
                                        std::size_t n_classes) {
    ConfusionMatrix cm = confusion(preds, labels, n_classes);
    py::array_t<std::uint64_t> out({n_classes, n_classes});
    for (std::size_t t = 0; t < n_classes; ++t) {
        for (std::size_t p = 0; p < n_classes; ++p) {
            out.mutable_at(t, p) = cm.at(t, p);
        }
    }
    return out;
}

py::dict py_metrics(
    const py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>& cm_in) {
    if (cm_in.ndim() != 2 || cm_in.shape(0) != cm_in.shape(1)) {
        throw ShapeMismatch("metrics: confusion matrix must be square");
    }
    const std::size_t n = static_cast<std::size_t>(cm_in.shape(0));
    ConfusionMatrix cm(n);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t p = 0; p < n; ++p) cm.at(t, p) = cm_in.at(t, p);
    }
    MetricsReport r = metrics(cm);
    py::dict d;
    d["accuracy"] = r.accuracy;
    d["macro_precision"] = r.macro_precision;
    d["macro_recall"] = r.macro_recall;
    d["macro_f1"] = r.macro_f1;
    d["weighted_precision"] = r.weighted_precision;
    d["weighted_recall"] = r.weighted_recall;
    d["weighted_f1"] = r.weighted_f1;
    d["degenerate"] = r.has_degenerate;
    return d;
}

py::dict py_rm_anova(const ArrayF64& scores) {
    if (scores.ndim() != 2) {
        throw ShapeMismatch("rm_anova: expected a 2-d subjects x methods array");
    }
    std::vector<std::vector<double>> m(scores.shape(0), std::vector<double>(scores.shape(1)));
    for (py::ssize_t s = 0; s < scores.shape(0); ++s) {
        for (py::ssize_t t = 0; t < scores.shape(1); ++t) m[s][t] = scores.at(s, t);
    }
    AnovaResult r = rm_anova(m);
    py::dict d;
    d["f_statistic"] = r.f_statistic;
    d["df_treatment"] = r.df_treatment;
    d["df_error"] = r.df_error;
    d["p_value"] = r.p_value;
    d["significant"] = r.significant;
    d["degenerate"] = r.degenerate;
    return d;
}

}  // namespace

PYBIND11_MODULE(_litefbcn, m) {
    m.doc() = "bilinear-pooling head family: core numeric operations";

    py::register_exception<NonDivisible>(m, "NonDivisible", PyExc_ValueError);
    py::register_exception<ShapeMismatch>(m, "ShapeMismatch", PyExc_ValueError);
    py::register_exception<RtfError>(m, "RtfError", PyExc_ValueError);

    m.def("read_rtf", &py_read_rtf, py::arg("path"),
          "Read a raw-tensor file; the array dtype matches the stored one.");
    m.def("write_rtf", &py_write_rtf, py::arg("path"), py::arg("array"),
          "Write an array as a raw-tensor file (float32 or float64).");

    m.def("resolve_reduction", &resolve_reduction, py::arg("channels"), py::arg("gamma"),
          "K = C / gamma; raises when gamma does not divide C.");
    m.def(
        "channel_reduce",
        [](const ArrayF64& f, const ArrayF64& w, py::object bias) {
            Tensor<double> ft = tensor_from_array(f);
            Tensor<double> wt = tensor_from_array(w);
            if (bias.is_none()) return array_from_tensor(channel_reduce(ft, wt));
            Tensor<double> bt = tensor_from_array<double>(ArrayF64::ensure(bias));
            return array_from_tensor(channel_reduce(ft, wt, &bt));
        },
        py::arg("feature_map"), py::arg("weights"), py::arg("bias") = py::none(),
        "1x1 channel projection: (N,H,W,C) x (1,1,C,K) -> (N,H,W,K).");
    m.def(
        "bilinear_pool_self",
        [](const ArrayF64& f) {
            return array_from_tensor(bilinear_pool_self(tensor_from_array(f)));
        },
        py::arg("feature_map"), "Sum of per-location self outer products: (N,H,W,K) -> (N,K,K).");
    m.def(
        "bilinear_pool_dual",
        [](const ArrayF64& fa, const ArrayF64& fb) {
            return array_from_tensor(
                bilinear_pool_dual(tensor_from_array(fa), tensor_from_array(fb)));
        },
        py::arg("feature_map_a"), py::arg("feature_map_b"),
        "Two-map bilinear pooling: (N,H,W,Ka) x (N,H,W,Kb) -> (N,Ka,Kb).");
    m.def(
        "signed_sqrt",
        [](const ArrayF64& x) { return array_from_tensor(signed_sqrt(tensor_from_array(x))); },
        py::arg("x"), "Elementwise sign(x) * sqrt(|x|).");
    m.def(
        "normalize_bilinear",
        [](const ArrayF64& b) {
            return array_from_tensor(normalize_bilinear(tensor_from_array(b)));
        },
        py::arg("bilinear"),
        "Flatten row-major, signed square root, then row-wise l2 normalization.");
    m.def(
        "softmax",
        [](const ArrayF64& z) { return array_from_tensor(softmax_rows(tensor_from_array(z))); },
        py::arg("logits"), "Row-wise softmax.");

    m.def("head_param_count", &py_head_param_count, py::arg("variant"), py::arg("channels"),
          py::arg("gamma") = 1, py::arg("num_classes") = 2, py::arg("channels_b") = 0,
          py::arg("reducer_bias") = true,
          "Closed-form parameter counts for baseline|bcnn|fbcnn|litefbcn heads.");

    m.def("confusion", &py_confusion, py::arg("predictions"), py::arg("labels"),
          py::arg("n_classes"), "Confusion matrix, rows = true class.");
    m.def("metrics", &py_metrics, py::arg("confusion_matrix"),
          "Accuracy plus macro / weighted precision, recall and F1.");
    m.def("rm_anova", &py_rm_anova, py::arg("scores"),
          "One-way repeated-measures ANOVA on a subjects x methods matrix.");
    m.def("f_upper_tail", &f_upper_tail, py::arg("f"), py::arg("df1"), py::arg("df2"),
          "P(F(df1, df2) > f) via the regularized incomplete beta.");
}
