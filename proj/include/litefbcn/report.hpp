#pragma once

#include "litefbcn/dataset.hpp"
#include "litefbcn/network.hpp"

namespace lfb {

struct LatencyStats {
    double median_ms = 0.0;
    double mean_ms = 0.0;
    double std_ms = 0.0;
    std::size_t reps = 0;
    std::size_t warmup = 0;
    std::string host;
};

// Wall-clock per single-image forward pass (inference-mode batch norm),
// warmup excluded, pinned to one CPU when the platform allows it. Numbers are
// reported artifacts, never asserted against.
LatencyStats benchmark_latency(Network<float>& net, std::size_t reps = 100,
                               std::size_t warmup = 10);

// One CSV row per sample: label, then the post-normalization bilinear vector
// (the pooled vector for the baseline head). Header `label,f0,f1,...`.
void export_features(Network<float>& net, const LoadedDataset& data,
                     const std::filesystem::path& out_csv);

struct EfficiencyRow {
    std::string head;
    std::string gamma;  // "N/A" where the variant has no reduction factor
    std::size_t trainable_params = 0;
    std::size_t total_params = 0;
    std::size_t head_params_closed = 0;
    std::size_t head_params_counted = 0;
    std::uint64_t total_flops = 0;
    std::uint64_t head_flops = 0;
    std::size_t bilinear_length = 0;
    double median_latency_ms = 0.0;
};

struct EfficiencyReport {
    std::vector<EfficiencyRow> rows;
    std::string host;

    void write_csv(const std::filesystem::path& path) const;
    std::string to_text() const;
};

// Baseline, single-trunk bilinear head, and the reduced variant over the
// given reduction factors, all on one backbone. Latency columns are filled
// only when `latency_reps` > 0.
EfficiencyReport efficiency_report(const BackboneSpec& backbone, std::size_t num_classes,
                                   const std::vector<std::size_t>& gammas,
                                   std::size_t latency_reps, std::uint64_t seed);

}  // namespace lfb
