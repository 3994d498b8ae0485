#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

std::string cli_path() {
    const char* env = std::getenv("LITEFBCN_CLI");
    REQUIRE_MESSAGE(env != nullptr, "LITEFBCN_CLI must point at the binary");
    return env;
}

RunResult run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    std::array<char, 512> buf;
    while (fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path temp_dir(const char* tag) {
    static int counter = 0;
    fs::path dir =
        fs::temp_directory_path() / ("lfb_cli_" + std::string(tag) + std::to_string(counter++));
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::trunc);
    f << content;
}

const char* kDatasetSpec = R"({
  "height": 6, "width": 6, "channels": 2, "samples_per_class": 12,
  "classes": [
    {"name": "iso",  "covariance": [[1, 0], [0, 1]]},
    {"name": "corr", "covariance": [[1, 0.9], [0.9, 1]]}
  ]
})";

// Deterministic hash of every regular file under a directory.
std::size_t dir_digest(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::size_t h = 1469598103934665603ull;
    for (const auto& f : files) {
        const std::string rel = fs::relative(f, dir).string();
        for (char c : rel + "\x01" + slurp(f) + "\x02") {
            h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
        }
    }
    return h;
}

}  // namespace

TEST_CASE("gen-data: counts, determinism, invalid spec") {
    fs::path dir = temp_dir("gen");
    write_file(dir / "spec.json", kDatasetSpec);

    RunResult r = run("gen-data --spec " + (dir / "spec.json").string() + " --out " +
                      (dir / "d1").string() + " --seed 9");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("class 0 (iso): 12 samples") != std::string::npos);
    CHECK(r.output.find("class 1 (corr): 12 samples") != std::string::npos);

    RunResult r2 = run("gen-data --spec " + (dir / "spec.json").string() + " --out " +
                       (dir / "d2").string() + " --seed 9");
    CHECK(r2.exit_code == 0);
    CHECK(dir_digest(dir / "d1") == dir_digest(dir / "d2"));

    write_file(dir / "bad.json", R"({
      "height": 4, "width": 4, "channels": 2, "samples_per_class": 3,
      "classes": [{"name": "broken", "covariance": [[1, 2], [2, 1]]}]
    })");
    RunResult rb = run("gen-data --spec " + (dir / "bad.json").string() + " --out " +
                       (dir / "d3").string() + " --seed 1");
    CHECK(rb.exit_code == 2);
    CHECK(rb.output.find("broken") != std::string::npos);

    fs::remove_all(dir);
}

TEST_CASE("crossval: summary shape, determinism, config failures") {
    fs::path dir = temp_dir("cv");
    write_file(dir / "spec.json", kDatasetSpec);
    REQUIRE(run("gen-data --spec " + (dir / "spec.json").string() + " --out " +
                (dir / "data").string() + " --seed 3")
                .exit_code == 0);

    write_file(dir / "run.json", R"({
      "backbone": {"widths": [], "strides": []},
      "head": {"variant": "litefbcn", "gamma": 2, "num_classes": 2},
      "train": {"epochs": 4, "batch_size": 8, "seed": 5},
      "data": {"manifest": ")" +
                                     (dir / "data" / "manifest.csv").string() + R"("},
      "eval": {"folds": 3}
    })");

    RunResult r = run("crossval --config " + (dir / "run.json").string() + " --out " +
                      (dir / "out1").string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);

    // summary: header + 3 fold rows + 1 aggregate row
    std::string summary = slurp(dir / "out1" / "summary.csv");
    std::size_t lines = 0;
    for (char c : summary) lines += c == '\n';
    CHECK(lines == 5);
    CHECK(summary.rfind("fold,accuracy,precision,recall,f1\n", 0) == 0);
    CHECK(summary.find("mean±std,") != std::string::npos);
    CHECK(fs::exists(dir / "out1" / "config.resolved.json"));
    CHECK(fs::exists(dir / "out1" / "fold0" / "history.csv"));
    CHECK(fs::exists(dir / "out1" / "fold0" / "metrics.json"));
    CHECK(fs::exists(dir / "out1" / "fold0" / "checkpoint" / "manifest.json"));
    CHECK(fs::exists(dir / "out1" / "fold2" / "checkpoint" / "manifest.json"));

    // identical rerun is bitwise identical
    RunResult r2 = run("crossval --config " + (dir / "run.json").string() + " --out " +
                       (dir / "out2").string());
    REQUIRE(r2.exit_code == 0);
    CHECK(dir_digest(dir / "out1") == dir_digest(dir / "out2"));

    // gamma that does not divide the channel count
    RunResult rg = run("crossval --config " + (dir / "run.json").string() + " --out " +
                       (dir / "outg").string() + " --gamma 3");
    CHECK(rg.exit_code == 2);
    CHECK(rg.output.find("divisible") != std::string::npos);

    // unknown config key
    write_file(dir / "bad.json", R"({"trian": {"epochs": 1}})");
    RunResult rb =
        run("crossval --config " + (dir / "bad.json").string() + " --out " + (dir / "outb").string());
    CHECK(rb.exit_code == 2);

    // malformed JSON never crashes raw
    write_file(dir / "broken.json", "{ not json");
    RunResult rj = run("crossval --config " + (dir / "broken.json").string() + " --out " +
                       (dir / "outj").string());
    CHECK(rj.exit_code == 2);

    // diverging training aborts with a runtime failure, not a crash
    write_file(dir / "diverge.json", R"({
      "backbone": {"widths": [], "strides": []},
      "head": {"variant": "litefbcn", "gamma": 2, "num_classes": 2},
      "train": {"epochs": 6, "batch_size": 8, "seed": 5, "lr0": 1e25, "lr_floor": 1e-4},
      "data": {"manifest": ")" +
                                         (dir / "data" / "manifest.csv").string() + R"("},
      "eval": {"folds": 3}
    })");
    RunResult rd = run("crossval --config " + (dir / "diverge.json").string() + " --out " +
                       (dir / "outd").string());
    CHECK(rd.exit_code == 1);
    CHECK(rd.output.find("diverged") != std::string::npos);

    fs::remove_all(dir);
}

TEST_CASE("compare: self-comparison, worked example, mismatched folds") {
    fs::path dir = temp_dir("cmp");

    auto write_summary = [&dir](const char* name, const std::vector<double>& accs) {
        std::string s = "fold,accuracy,precision,recall,f1\n";
        for (std::size_t i = 0; i < accs.size(); ++i) {
            const std::string a = std::to_string(accs[i]);
            s += std::to_string(i) + "," + a + "," + a + "," + a + "," + a + "\n";
        }
        s += "mean±std,x,x,x,x\n";
        write_file(dir / name / "summary.csv", s);
    };

    write_summary("a", {1, 2, 3});
    write_summary("b", {2, 4, 3});
    write_summary("short", {1, 2});

    SUBCASE("a run against itself is not significant") {
        RunResult r = run("compare --runs " + (dir / "a").string() + " " + (dir / "a").string());
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("F(1, 2) = 0") != std::string::npos);
        CHECK(r.output.find("p = 1") != std::string::npos);
        CHECK(r.output.find("not significant") != std::string::npos);
    }
    SUBCASE("worked 3-fold example reproduces F = 3") {
        RunResult r = run("compare --runs " + (dir / "a").string() + " " + (dir / "b").string());
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("F(1, 2) = 3") != std::string::npos);
        CHECK(r.output.find("p = 0.2254") != std::string::npos);
    }
    SUBCASE("five-fold pair reports df (1, 4)") {
        write_summary("c5", {0.9, 0.8, 0.85, 0.95, 0.9});
        write_summary("d5", {0.7, 0.75, 0.8, 0.85, 0.8});
        RunResult r = run("compare --runs " + (dir / "c5").string() + " " + (dir / "d5").string());
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("F(1, 4)") != std::string::npos);
    }
    SUBCASE("mismatched fold counts exit 2") {
        RunResult r = run("compare --runs " + (dir / "a").string() + " " + (dir / "short").string());
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("fold counts differ") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("bench: one row per head/gamma, N/A markers, params cross-check") {
    fs::path dir = temp_dir("bench");
    write_file(dir / "cfg.json", R"({
      "backbone": {"input": [8, 8, 1], "widths": [4, 8], "strides": [1, 2]},
      "head": {"num_classes": 3}
    })");
    RunResult r = run("bench --config " + (dir / "cfg.json").string() + " --reps 2 --out " +
                      (dir / "eff.csv").string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);

    std::ifstream f(dir / "eff.csv");
    std::string header;
    std::getline(f, header);
    std::vector<std::string> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty()) rows.push_back(line);
    }
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].rfind("baseline,N/A,", 0) == 0);
    CHECK(rows[1].rfind("fbcnn,N/A,", 0) == 0);
    CHECK(rows[2].rfind("litefbcn,2,", 0) == 0);
    CHECK(rows[3].rfind("litefbcn,4,", 0) == 0);
    CHECK(rows[4].rfind("litefbcn,8,", 0) == 0);

    // closed-form == counted head params in every row
    for (const std::string& row : rows) {
        std::istringstream ss(row);
        std::vector<std::string> cells;
        std::string tok;
        while (std::getline(ss, tok, ',')) cells.push_back(tok);
        REQUIRE(cells.size() == 10);
        CHECK(cells[4] == cells[5]);
    }
    fs::remove_all(dir);
}

TEST_CASE("grad-check: passes by default, corrupt control fails, kinds listed") {
    RunResult ok = run("grad-check --samples 3 --seed 2");
    CHECK_MESSAGE(ok.exit_code == 0, ok.output);
    CHECK(ok.output.find("gradient check passed") != std::string::npos);
    for (const char* kind : {"Conv2D", "DepthwiseConv2D", "BatchNorm", "ReLU", "Dense",
                             "GlobalAvgPool", "BilinearPoolSelf", "BilinearPoolDual",
                             "SignedSqrtL2"}) {
        CHECK_MESSAGE(ok.output.find(kind) != std::string::npos, kind);
    }

    RunResult bad = run("grad-check --samples 3 --seed 2 --corrupt");
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("FAILED") != std::string::npos);
}

TEST_CASE("export-features: row count matches the manifest") {
    fs::path dir = temp_dir("exp");
    write_file(dir / "spec.json", kDatasetSpec);
    REQUIRE(run("gen-data --spec " + (dir / "spec.json").string() + " --out " +
                (dir / "data").string() + " --seed 4")
                .exit_code == 0);
    write_file(dir / "run.json", R"({
      "backbone": {"widths": [], "strides": []},
      "head": {"variant": "fbcnn", "num_classes": 2},
      "train": {"epochs": 2, "batch_size": 8, "seed": 1},
      "data": {"manifest": ")" +
                                     (dir / "data" / "manifest.csv").string() + R"("},
      "eval": {"folds": 3}
    })");
    REQUIRE(run("crossval --config " + (dir / "run.json").string() + " --out " +
                (dir / "out").string())
                .exit_code == 0);

    RunResult r = run("export-features --checkpoint " + (dir / "out" / "fold0" / "checkpoint").string() +
                      " --data " + (dir / "data" / "manifest.csv").string() + " --out " +
                      (dir / "feats.csv").string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);

    std::string csv = slurp(dir / "feats.csv");
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    CHECK(lines == 1 + 24);  // header + one row per sample
    fs::remove_all(dir);
}

TEST_CASE("usage errors exit 2") {
    CHECK(run("no-such-command").exit_code == 2);
    CHECK(run("crossval").exit_code == 2);  // missing required options
    CHECK(run("--help").exit_code == 0);
}
