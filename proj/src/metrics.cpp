#include "litefbcn/metrics.hpp"

namespace lfb {

std::size_t ConfusionMatrix::total() const {
    std::size_t t = 0;
    for (std::size_t v : counts) t += v;
    return t;
}

std::size_t ConfusionMatrix::trace() const {
    std::size_t t = 0;
    for (std::size_t c = 0; c < n_classes; ++c) t += at(c, c);
    return t;
}

nlohmann::json ConfusionMatrix::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t t = 0; t < n_classes; ++t) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t p = 0; p < n_classes; ++p) row.push_back(at(t, p));
        rows.push_back(std::move(row));
    }
    return rows;
}

ConfusionMatrix confusion(const std::vector<std::size_t>& preds,
                          const std::vector<std::size_t>& labels, std::size_t n_classes) {
    if (preds.size() != labels.size()) {
        throw ShapeMismatch("confusion: prediction and label counts differ");
    }
    ConfusionMatrix cm(n_classes);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (labels[i] >= n_classes) {
            throw LabelOutOfRange("confusion: label " + std::to_string(labels[i]) +
                                  " >= n_classes " + std::to_string(n_classes));
        }
        if (preds[i] >= n_classes) {
            throw LabelOutOfRange("confusion: prediction " + std::to_string(preds[i]) +
                                  " >= n_classes " + std::to_string(n_classes));
        }
        ++cm.at(labels[i], preds[i]);
    }
    return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
    MetricsReport r;
    const std::size_t n = cm.n_classes;
    const std::size_t total = cm.total();
    r.accuracy = total ? static_cast<double>(cm.trace()) / static_cast<double>(total) : 0.0;
    if (total == 0) r.has_degenerate = true;

    for (std::size_t c = 0; c < n; ++c) {
        std::size_t row_sum = 0, col_sum = 0;
        for (std::size_t j = 0; j < n; ++j) {
            row_sum += cm.at(c, j);
            col_sum += cm.at(j, c);
        }
        ClassMetrics m;
        m.support = row_sum;
        const std::size_t tp = cm.at(c, c);
        if (col_sum) {
            m.precision = static_cast<double>(tp) / static_cast<double>(col_sum);
        } else {
            r.has_degenerate = true;
        }
        if (row_sum) {
            m.recall = static_cast<double>(tp) / static_cast<double>(row_sum);
        } else {
            r.has_degenerate = true;
        }
        if (m.precision + m.recall > 0.0) {
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        }
        r.per_class.push_back(m);

        r.macro_precision += m.precision;
        r.macro_recall += m.recall;
        r.macro_f1 += m.f1;
        if (total) {
            const double w = static_cast<double>(row_sum) / static_cast<double>(total);
            r.weighted_precision += w * m.precision;
            r.weighted_recall += w * m.recall;
            r.weighted_f1 += w * m.f1;
        }
    }
    if (n) {
        r.macro_precision /= static_cast<double>(n);
        r.macro_recall /= static_cast<double>(n);
        r.macro_f1 /= static_cast<double>(n);
    }
    return r;
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& m : per_class) {
        per.push_back({{"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support}});
    }
    return {{"fold", fold_id},
            {"accuracy", accuracy},
            {"macro_precision", macro_precision},
            {"macro_recall", macro_recall},
            {"macro_f1", macro_f1},
            {"weighted_precision", weighted_precision},
            {"weighted_recall", weighted_recall},
            {"weighted_f1", weighted_f1},
            {"per_class", std::move(per)},
            {"degenerate", has_degenerate}};
}

}  // namespace lfb
