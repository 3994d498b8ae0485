#pragma once

#include <vector>

#include "json.hpp"

#include "litefbcn/errors.hpp"

namespace lfb {

// Rows are the true class, columns the prediction.
struct ConfusionMatrix {
    std::size_t n_classes = 0;
    std::vector<std::size_t> counts;  // row-major n_classes x n_classes

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t n) : n_classes(n), counts(n * n, 0) {}

    std::size_t& at(std::size_t t, std::size_t p) { return counts[t * n_classes + p]; }
    std::size_t at(std::size_t t, std::size_t p) const { return counts[t * n_classes + p]; }
    std::size_t total() const;
    std::size_t trace() const;

    nlohmann::json to_json() const;
};

ConfusionMatrix confusion(const std::vector<std::size_t>& preds,
                          const std::vector<std::size_t>& labels, std::size_t n_classes);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct MetricsReport {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    std::vector<ClassMetrics> per_class;
    std::size_t fold_id = 0;
    bool has_degenerate = false;  // some class had an empty row or column

    nlohmann::json to_json() const;
};

// Per-class precision/recall from column/row sums (0 when the denominator is
// 0, flagged); F1 is the harmonic mean, 0 when both components are 0. Macro
// averages are unweighted; weighted averages use row support.
MetricsReport metrics(const ConfusionMatrix& cm);

}  // namespace lfb
