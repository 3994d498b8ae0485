// Command-line front end: dataset generation, cross-validated training,
// method comparison, efficiency benchmarking, gradient checking, and
// bilinear-feature export. One binary, one --seed, deterministic outputs.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "litefbcn/anova.hpp"
#include "litefbcn/config.hpp"
#include "litefbcn/dataset.hpp"
#include "litefbcn/kfold.hpp"
#include "litefbcn/metrics.hpp"
#include "litefbcn/report.hpp"
#include "litefbcn/rng.hpp"
#include "litefbcn/train.hpp"

namespace fs = std::filesystem;
using namespace lfb;

namespace {

struct GenDataArgs {
    std::string spec_path;
    std::string out_dir;
    std::uint64_t seed = 0;
};

struct CrossvalArgs {
    std::string config_path;
    std::string out_dir;
    std::string head;
    int gamma = -1;
    int folds = -1;
    long long seed = -1;
    bool group_aware = false;
};

struct CompareArgs {
    std::vector<std::string> runs;
    std::string metric = "accuracy";
};

struct BenchArgs {
    std::string config_path;
    std::string heads = "all";
    std::size_t reps = 200;
    std::string out_csv;
};

struct GradCheckArgs {
    std::string config_path;
    std::size_t samples = 3;
    std::uint64_t seed = 1;
    bool corrupt = false;
};

struct ExportArgs {
    std::string checkpoint_dir;
    std::string data_manifest;
    std::string out_csv;
};

RunConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return RunConfig::load(path);
}

void write_resolved_config(const RunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream f(out_dir / "config.resolved.json");
    if (!f) throw Error("cannot write config.resolved.json in '" + out_dir.string() + "'");
    f << cfg.to_json().dump(2) << "\n";
}

int cmd_gen_data(const GenDataArgs& args) {
    std::ifstream f(args.spec_path);
    if (!f) throw ConfigError("cannot open dataset spec '" + args.spec_path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("dataset spec is not valid JSON: " + std::string(e.what()));
    }
    check_keys(j, {"height", "width", "channels", "samples_per_class", "classes"}, "spec");
    CovarianceClassSpec spec = CovarianceClassSpec::from_json(j);
    DatasetManifest manifest = gen_covariance_dataset(spec, args.seed, args.out_dir);

    std::vector<std::size_t> counts(spec.classes.size(), 0);
    for (const auto& r : manifest.rows) ++counts[r.label];
    for (std::size_t c = 0; c < counts.size(); ++c) {
        std::cout << "class " << c << " (" << spec.classes[c].name << "): " << counts[c]
                  << " samples\n";
    }
    std::cout << "manifest: " << (fs::path(args.out_dir) / "manifest.csv").string() << "\n";
    return 0;
}

std::string aggregate_cell(const std::vector<double>& values) {
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double sq = 0;
    for (double v : values) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / static_cast<double>(values.size()));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f ± %.4f", mean, sd);
    return buf;
}

int cmd_crossval(const CrossvalArgs& args) {
    RunConfig cfg = RunConfig::load(args.config_path);
    if (!args.head.empty()) cfg.head.variant = head_variant_from_name(args.head);
    if (args.gamma > 0) cfg.head.gamma = static_cast<std::size_t>(args.gamma);
    if (args.folds > 0) cfg.eval.folds = static_cast<std::size_t>(args.folds);
    if (args.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(args.seed);
    if (args.group_aware) cfg.eval.group_aware = true;
    if (cfg.data.manifest.empty()) {
        throw ConfigError("config.data.manifest is required for crossval");
    }

    const fs::path manifest_path = cfg.data.manifest;
    DatasetManifest manifest = DatasetManifest::read_csv(manifest_path);
    LoadedDataset ds = load_dataset(manifest, manifest_path.parent_path());
    if (ds.sample_shape.size() != 3) throw ConfigError("dataset samples must be (H,W,C)");

    // An identity backbone inherits the data geometry.
    if (cfg.backbone.blocks.empty()) {
        cfg.backbone.input_h = ds.sample_shape[0];
        cfg.backbone.input_w = ds.sample_shape[1];
        cfg.backbone.input_c = ds.sample_shape[2];
    }
    cfg.head.num_classes = std::max(cfg.head.num_classes, ds.num_classes);
    if (cfg.head.variant == HeadVariant::LiteFBCN) {
        resolve_reduction(cfg.backbone.out_channels(), cfg.head.gamma);  // fail fast
    }

    const fs::path out_dir = args.out_dir;
    write_resolved_config(cfg, out_dir);

    auto folds = stratified_kfold(manifest, cfg.eval.folds, cfg.train.seed, cfg.eval.group_aware);

    std::vector<MetricsReport> fold_reports;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const fs::path fold_dir = out_dir / ("fold" + std::to_string(f));
        fs::create_directories(fold_dir);

        Network<float> net(cfg.backbone, cfg.head, derive_seed(cfg.train.seed, 0xBA5Eull + f));
        TrainConfig tcfg = cfg.train;
        tcfg.seed = derive_seed(cfg.train.seed, 0x70ull + f);

        TrainResult result = train(net, ds, folds[f], tcfg);
        write_history_csv(fold_dir / "history.csv", result.history);

        restore_params(net, result.best_params);
        save_checkpoint(fold_dir / "checkpoint", net);

        EvalResult test = evaluate(net, ds, folds[f].test, tcfg.batch_size);
        std::vector<std::size_t> test_labels;
        for (std::size_t idx : folds[f].test) test_labels.push_back(ds.labels[idx]);
        ConfusionMatrix cm = confusion(test.predictions, test_labels, cfg.head.num_classes);
        MetricsReport report = metrics(cm);
        report.fold_id = f;

        nlohmann::json jm = report.to_json();
        jm["confusion"] = cm.to_json();
        jm["best_epoch"] = result.best_epoch;
        jm["best_val_acc"] = result.best_val_acc;
        std::ofstream mf(fold_dir / "metrics.json");
        mf << jm.dump(2) << "\n";

        std::cout << "fold " << f << ": test acc " << format_num(report.accuracy)
                  << " (best epoch " << result.best_epoch << ")\n";
        fold_reports.push_back(std::move(report));
    }

    std::ofstream sf(out_dir / "summary.csv");
    if (!sf) throw Error("cannot write summary.csv");
    sf << "fold,accuracy,precision,recall,f1\n";
    std::vector<double> acc, prec, rec, f1;
    for (const MetricsReport& r : fold_reports) {
        sf << r.fold_id << "," << format_num(r.accuracy) << "," << format_num(r.macro_precision)
           << "," << format_num(r.macro_recall) << "," << format_num(r.macro_f1) << "\n";
        acc.push_back(r.accuracy);
        prec.push_back(r.macro_precision);
        rec.push_back(r.macro_recall);
        f1.push_back(r.macro_f1);
    }
    sf << "mean±std," << aggregate_cell(acc) << "," << aggregate_cell(prec) << ","
       << aggregate_cell(rec) << "," << aggregate_cell(f1) << "\n";
    std::cout << "summary: " << (out_dir / "summary.csv").string() << "\n";
    return 0;
}

// Per-fold metric column from a crossval summary.csv (fold rows only).
std::vector<double> read_summary_column(const fs::path& run_dir, const std::string& metric) {
    std::ifstream f(run_dir / "summary.csv");
    if (!f) throw ConfigError("cannot open '" + (run_dir / "summary.csv").string() + "'");
    std::string header;
    if (!std::getline(f, header)) throw ConfigError("empty summary in '" + run_dir.string() + "'");
    std::vector<std::string> cols;
    {
        std::istringstream ss(header);
        std::string tok;
        while (std::getline(ss, tok, ',')) cols.push_back(tok);
    }
    std::size_t col = cols.size();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (cols[i] == metric) col = i;
    }
    if (col == cols.size()) {
        throw ConfigError("metric '" + metric + "' not present in summary header '" + header +
                          "'");
    }
    std::vector<double> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::vector<std::string> cells;
        std::string tok;
        while (std::getline(ss, tok, ',')) cells.push_back(tok);
        if (cells.empty()) continue;
        char* end = nullptr;
        std::strtoul(cells[0].c_str(), &end, 10);
        if (end == cells[0].c_str() || *end != '\0') continue;  // aggregate row
        if (col >= cells.size()) throw ConfigError("short row in summary of " + run_dir.string());
        out.push_back(std::stod(cells[col]));
    }
    return out;
}

int cmd_compare(const CompareArgs& args) {
    if (args.runs.size() < 2) throw ConfigError("compare needs at least two --runs directories");
    std::vector<std::vector<double>> per_method;
    for (const std::string& run : args.runs) {
        per_method.push_back(read_summary_column(run, args.metric));
    }
    const std::size_t folds = per_method[0].size();
    for (std::size_t i = 1; i < per_method.size(); ++i) {
        if (per_method[i].size() != folds) {
            throw ConfigError("fold counts differ: '" + args.runs[0] + "' has " +
                              std::to_string(folds) + ", '" + args.runs[i] + "' has " +
                              std::to_string(per_method[i].size()));
        }
    }

    std::vector<std::vector<double>> scores(folds, std::vector<double>(per_method.size()));
    for (std::size_t m = 0; m < per_method.size(); ++m) {
        for (std::size_t s = 0; s < folds; ++s) scores[s][m] = per_method[m][s];
    }
    AnovaResult r = rm_anova(scores);
    std::cout << "repeated-measures ANOVA on " << args.metric << " (" << per_method.size()
              << " methods x " << folds << " folds)\n";
    std::cout << "F(" << r.df_treatment << ", " << r.df_error
              << ") = " << format_num(r.f_statistic) << ", p = " << format_num(r.p_value)
              << (r.degenerate ? " (degenerate)" : "") << "\n";
    std::cout << (r.significant ? "significant at P < 0.05\n" : "not significant at P < 0.05\n");
    return 0;
}

int cmd_bench(const BenchArgs& args) {
    if (args.heads != "all") {
        throw ConfigError("--heads currently supports only 'all'");
    }
    RunConfig cfg = load_config_or_default(args.config_path);
    EfficiencyReport rep = efficiency_report(cfg.backbone, cfg.head.num_classes, {2, 4, 8},
                                             args.reps, cfg.train.seed);
    std::cout << rep.to_text();
    if (!args.out_csv.empty()) {
        rep.write_csv(args.out_csv);
        std::cout << "csv: " << args.out_csv << "\n";
    }
    return 0;
}

int cmd_grad_check(const GradCheckArgs& args) {
    RunConfig cfg;
    if (!args.config_path.empty()) {
        cfg = RunConfig::load(args.config_path);
    } else {
        // compact default covering every layer kind
        cfg.backbone = BackboneSpec::micro(12, 12, 2, {4, 6}, {1, 2});
    }
    const std::size_t n = std::max<std::size_t>(args.samples, 3);

    bool ok = true;
    for (HeadVariant v : {HeadVariant::BaselineGAP, HeadVariant::FastBCNN, HeadVariant::LiteFBCN,
                          HeadVariant::BCNNDual}) {
        HeadConfig head = cfg.head;
        head.variant = v;
        if (v != HeadVariant::LiteFBCN) head.gamma = 1;
        GradCheckReport r = conditioned_grad_check(cfg.backbone, head, args.seed, n, 200,
                                                   cfg.train.l2_strength, args.corrupt);
        std::cout << head_variant_name(v) << ": max relative error "
                  << format_num(r.max_rel_error) << " over " << r.params_checked
                  << " parameters\n";
        for (const auto& [kind, err] : r.per_kind) {
            std::cout << "  " << kind << ": " << format_num(err) << "\n";
        }
        if (!(r.max_rel_error < 1e-4)) ok = false;
    }
    std::cout << (ok ? "gradient check passed\n" : "gradient check FAILED\n");
    return ok ? 0 : 1;
}

int cmd_export(const ExportArgs& args) {
    Network<float> net = load_checkpoint<float>(args.checkpoint_dir);
    DatasetManifest manifest = DatasetManifest::read_csv(args.data_manifest);
    LoadedDataset ds = load_dataset(manifest, fs::path(args.data_manifest).parent_path());
    export_features(net, ds, args.out_csv);
    std::cout << "wrote " << ds.samples.size() << " rows to " << args.out_csv << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bilinear-pooling head family: training, evaluation, and efficiency tools"};
    app.require_subcommand(1);

    GenDataArgs gen;
    CLI::App* cgen = app.add_subcommand("gen-data", "generate a covariance-texture dataset");
    cgen->add_option("--spec", gen.spec_path, "dataset spec JSON")->required();
    cgen->add_option("--out", gen.out_dir, "output directory")->required();
    cgen->add_option("--seed", gen.seed, "generation seed");

    CrossvalArgs cv;
    CLI::App* ccv = app.add_subcommand("crossval", "stratified k-fold training and evaluation");
    ccv->add_option("--config", cv.config_path, "run config JSON")->required();
    ccv->add_option("--out", cv.out_dir, "output directory")->required();
    ccv->add_option("--folds", cv.folds, "fold count (default from config)");
    ccv->add_option("--head", cv.head, "baseline|bcnn|fbcnn|litefbcn");
    ccv->add_option("--gamma", cv.gamma, "channel reduction factor");
    ccv->add_option("--seed", cv.seed, "seed override");
    ccv->add_flag("--group-aware", cv.group_aware, "keep groups within one fold");

    CompareArgs cmp;
    CLI::App* ccmp = app.add_subcommand("compare", "repeated-measures ANOVA across runs");
    ccmp->add_option("--runs", cmp.runs, "crossval output directories")->required()->expected(-2);
    ccmp->add_option("--metric", cmp.metric, "accuracy|precision|recall|f1");

    BenchArgs bench;
    CLI::App* cbench = app.add_subcommand("bench", "parameter / FLOP / latency report");
    cbench->add_option("--config", bench.config_path, "run config JSON");
    cbench->add_option("--heads", bench.heads, "head set (all)");
    cbench->add_option("--reps", bench.reps, "latency repetitions");
    cbench->add_option("--out", bench.out_csv, "also write CSV here");

    GradCheckArgs gc;
    CLI::App* cgc = app.add_subcommand("grad-check", "finite-difference gradient verification");
    cgc->add_option("--config", gc.config_path, "run config JSON");
    cgc->add_option("--samples", gc.samples, "input batch size");
    cgc->add_option("--seed", gc.seed, "input seed");
    cgc->add_flag("--corrupt", gc.corrupt, "negative control: corrupt one gradient")->group("");

    ExportArgs ex;
    CLI::App* cex = app.add_subcommand("export-features", "dump post-chain bilinear vectors");
    cex->add_option("--checkpoint", ex.checkpoint_dir, "checkpoint directory")->required();
    cex->add_option("--data", ex.data_manifest, "dataset manifest CSV")->required();
    cex->add_option("--out", ex.out_csv, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*cgen) return cmd_gen_data(gen);
        if (*ccv) return cmd_crossval(cv);
        if (*ccmp) return cmd_compare(cmp);
        if (*cbench) return cmd_bench(bench);
        if (*cgc) return cmd_grad_check(gc);
        if (*cex) return cmd_export(ex);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
