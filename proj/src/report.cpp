#include "litefbcn/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#ifdef __linux__
#include <sched.h>
#endif

#include "litefbcn/rng.hpp"
#include "litefbcn/train.hpp"

namespace lfb {

namespace {

std::string host_descriptor() {
    std::string cpu = "unknown-cpu";
    std::ifstream f("/proc/cpuinfo");
    std::string line;
    while (std::getline(f, line)) {
        if (line.rfind("model name", 0) == 0) {
            const std::size_t colon = line.find(':');
            if (colon != std::string::npos) {
                cpu = line.substr(colon + 2);
            }
            break;
        }
    }
#if defined(__GNUC__) && !defined(__clang__)
    return cpu + " / gcc " + std::to_string(__GNUC__) + "." + std::to_string(__GNUC_MINOR__);
#elif defined(__clang__)
    return cpu + " / clang " + std::to_string(__clang_major__);
#else
    return cpu;
#endif
}

void pin_current_thread() {
#ifdef __linux__
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(0, &set);
    sched_setaffinity(0, sizeof(set), &set);  // best effort
#endif
}

}  // namespace

LatencyStats benchmark_latency(Network<float>& net, std::size_t reps, std::size_t warmup) {
    pin_current_thread();
    const BackboneSpec& spec = net.backbone_spec();
    Tensor<float> input({1, spec.input_h, spec.input_w, spec.input_c});
    CounterRng rng(0xBEAC4ull);
    for (std::size_t i = 0; i < input.size(); ++i) {
        input[i] = static_cast<float>(rng.uniform_symmetric(1.0));
    }

    for (std::size_t i = 0; i < warmup; ++i) net.forward(input, Mode::Infer);

    std::vector<double> ms;
    ms.reserve(reps);
    for (std::size_t i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Tensor<float> probs = softmax_rows(net.forward(input, Mode::Infer));
        const auto t1 = std::chrono::steady_clock::now();
        (void)probs;
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }

    LatencyStats s;
    s.reps = reps;
    s.warmup = warmup;
    s.host = host_descriptor();
    if (ms.empty()) return s;
    std::vector<double> sorted = ms;
    std::sort(sorted.begin(), sorted.end());
    s.median_ms = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                    : 0.5 * (sorted[sorted.size() / 2 - 1] +
                                             sorted[sorted.size() / 2]);
    double sum = 0.0;
    for (double v : ms) sum += v;
    s.mean_ms = sum / static_cast<double>(ms.size());
    double sq = 0.0;
    for (double v : ms) sq += (v - s.mean_ms) * (v - s.mean_ms);
    s.std_ms = std::sqrt(sq / static_cast<double>(ms.size()));
    return s;
}

void export_features(Network<float>& net, const LoadedDataset& data,
                     const std::filesystem::path& out_csv) {
    std::ofstream f(out_csv, std::ios::trunc);
    if (!f) throw Error("cannot write feature export '" + out_csv.string() + "'");

    const std::size_t len = net.bilinear_length();
    f << "label";
    for (std::size_t i = 0; i < len; ++i) f << ",f" << i;
    f << "\n";

    const auto& s = data.sample_shape;
    for (std::size_t r = 0; r < data.samples.size(); ++r) {
        Tensor<float> batch({1, s[0], s[1], s[2]}, data.samples[r].vec());
        net.forward(batch, Mode::Infer);
        const Tensor<float>& emb = net.last_embedding();
        f << data.labels[r];
        for (std::size_t i = 0; i < len; ++i) f << "," << format_num(emb[i]);
        f << "\n";
    }
}

void EfficiencyReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot write efficiency report '" + path.string() + "'");
    f << "head,gamma,trainable_params,total_params,head_params_closed,head_params_counted,"
         "total_flops,head_flops,bilinear_length,median_latency_ms\n";
    for (const auto& r : rows) {
        f << r.head << "," << r.gamma << "," << r.trainable_params << "," << r.total_params << ","
          << r.head_params_closed << "," << r.head_params_counted << "," << r.total_flops << ","
          << r.head_flops << "," << r.bilinear_length << "," << format_num(r.median_latency_ms)
          << "\n";
    }
}

std::string EfficiencyReport::to_text() const {
    std::ostringstream os;
    os << "host: " << host << "\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-10s %-5s %12s %12s %12s %12s %14s %12s %10s %12s\n",
                  "head", "gamma", "train-params", "total-params", "head-closed", "head-counted",
                  "total-flops", "head-flops", "bilinear", "median-ms");
    os << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf),
                      "%-10s %-5s %12zu %12zu %12zu %12zu %14llu %12llu %10zu %12.4f\n",
                      r.head.c_str(), r.gamma.c_str(), r.trainable_params, r.total_params,
                      r.head_params_closed, r.head_params_counted,
                      static_cast<unsigned long long>(r.total_flops),
                      static_cast<unsigned long long>(r.head_flops), r.bilinear_length,
                      r.median_latency_ms);
        os << buf;
    }
    return os.str();
}

EfficiencyReport efficiency_report(const BackboneSpec& backbone, std::size_t num_classes,
                                   const std::vector<std::size_t>& gammas,
                                   std::size_t latency_reps, std::uint64_t seed) {
    EfficiencyReport report;
    const std::size_t channels = backbone.out_channels();
    const std::vector<std::size_t> input_shape = {1, backbone.input_h, backbone.input_w,
                                                  backbone.input_c};

    auto add = [&](HeadVariant variant, std::size_t gamma) {
        HeadConfig head;
        head.variant = variant;
        head.gamma = gamma ? gamma : 1;
        head.num_classes = num_classes;
        Network<float> net(backbone, head, seed);

        EfficiencyRow row;
        row.head = head_variant_name(variant);
        row.gamma = gamma ? std::to_string(gamma) : "N/A";

        const ParamCountReport pc = count_params(net);
        row.trainable_params = pc.trainable_total;
        row.total_params = pc.total();
        for (const auto& lr : pc.per_layer) {
            if (lr.name.rfind("head.", 0) == 0) {
                row.head_params_counted += lr.trainable + lr.running;
            }
        }
        row.head_params_closed =
            head_param_count(variant, channels, head.gamma, num_classes).total();

        const FlopReport fr = estimate_flops(net, input_shape);
        row.total_flops = fr.total;
        row.head_flops = fr.head_total;
        row.bilinear_length = net.bilinear_length();

        if (latency_reps > 0) {
            LatencyStats lat = benchmark_latency(net, latency_reps);
            row.median_latency_ms = lat.median_ms;
            if (report.host.empty()) report.host = lat.host;
        }
        report.rows.push_back(std::move(row));
    };

    add(HeadVariant::BaselineGAP, 0);
    add(HeadVariant::FastBCNN, 0);
    for (std::size_t g : gammas) add(HeadVariant::LiteFBCN, g);

    if (report.host.empty()) report.host = host_descriptor();
    return report;
}

}  // namespace lfb
