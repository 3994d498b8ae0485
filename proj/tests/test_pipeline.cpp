#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "litefbcn/config.hpp"
#include "litefbcn/dataset.hpp"
#include "litefbcn/kfold.hpp"
#include "litefbcn/optim.hpp"
#include "litefbcn/train.hpp"

using namespace lfb;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
    static int counter = 0;
    fs::path dir =
        fs::temp_directory_path() / ("lfb_pipe_" + std::string(tag) + std::to_string(counter++));
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

CovarianceClassSpec small_spec() {
    CovarianceClassSpec spec;
    spec.height = 6;
    spec.width = 6;
    spec.channels = 2;
    spec.samples_per_class = 12;
    spec.classes.push_back({"iso", {1, 0, 0, 1}});
    spec.classes.push_back({"corr", {1, 0.9, 0.9, 1}});
    return spec;
}

// First-order toy data: class signal lives in the channel means, so a pooled
// first-order classifier separates it immediately.
LoadedDataset first_order_toy(std::size_t per_class, std::uint64_t seed) {
    LoadedDataset ds;
    ds.sample_shape = {4, 4, 2};
    ds.num_classes = 2;
    CounterRng rng(seed);
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t s = 0; s < per_class; ++s) {
            Tensor<float> t({4, 4, 2});
            const float mu = c == 0 ? -0.5f : 0.5f;
            for (std::size_t i = 0; i < t.size(); ++i) {
                t[i] = mu + static_cast<float>(0.3 * rng.normal());
            }
            ds.samples.push_back(std::move(t));
            ds.labels.push_back(c);
            ds.groups.push_back("");
        }
    }
    return ds;
}

FoldSplit whole_set_fold(std::size_t n) {
    FoldSplit f;
    for (std::size_t i = 0; i < n; ++i) {
        f.train.push_back(i);
        f.val.push_back(i);
        f.test.push_back(i);
    }
    return f;
}

}  // namespace

TEST_CASE("gen_covariance_dataset") {
    SUBCASE("deterministic: identical files for identical (spec, seed)") {
        fs::path d1 = temp_dir("gen"), d2 = temp_dir("gen");
        CovarianceClassSpec spec = small_spec();
        DatasetManifest m1 = gen_covariance_dataset(spec, 42, d1);
        DatasetManifest m2 = gen_covariance_dataset(spec, 42, d2);
        REQUIRE(m1.rows.size() == m2.rows.size());
        for (std::size_t i = 0; i < m1.rows.size(); ++i) {
            CHECK(m1.rows[i].path == m2.rows[i].path);
            CHECK(slurp(d1 / m1.rows[i].path) == slurp(d2 / m2.rows[i].path));
        }
        CHECK(slurp(d1 / "manifest.csv") == slurp(d2 / "manifest.csv"));
        fs::remove_all(d1);
        fs::remove_all(d2);
    }
    SUBCASE("identity covariance: empirical channel variance near 1") {
        fs::path dir = temp_dir("var");
        CovarianceClassSpec spec;
        spec.height = 50;
        spec.width = 50;
        spec.channels = 4;
        spec.samples_per_class = 4;  // 10^4 pixels
        spec.classes.push_back({"id", {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}});
        DatasetManifest m = gen_covariance_dataset(spec, 7, dir);
        LoadedDataset ds = load_dataset(m, dir);
        for (std::size_t c = 0; c < 4; ++c) {
            double sum = 0, sq = 0;
            std::size_t n = 0;
            for (const auto& s : ds.samples) {
                for (std::size_t p = 0; p < 2500; ++p) {
                    const double v = s[p * 4 + c];
                    sum += v;
                    sq += v * v;
                    ++n;
                }
            }
            const double mean = sum / n;
            const double var = sq / n - mean * mean;
            CHECK(var > 0.94);
            CHECK(var < 1.06);
            CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
        }
        fs::remove_all(dir);
    }
    SUBCASE("pooled features carry no first-order signal") {
        fs::path dir = temp_dir("gap");
        CovarianceClassSpec spec = small_spec();
        spec.samples_per_class = 50;
        DatasetManifest m = gen_covariance_dataset(spec, 3, dir);
        LoadedDataset ds = load_dataset(m, dir);
        for (std::size_t cls = 0; cls < 2; ++cls) {
            for (std::size_t c = 0; c < 2; ++c) {
                double sum = 0;
                std::size_t n = 0;
                for (std::size_t i = 0; i < ds.samples.size(); ++i) {
                    if (ds.labels[i] != cls) continue;
                    for (std::size_t p = 0; p < 36; ++p) {
                        sum += ds.samples[i][p * 2 + c];
                        ++n;
                    }
                }
                // zero-mean construction: 3 sigma / sqrt(n) bound
                CHECK(std::abs(sum / n) < 3.0 / std::sqrt(static_cast<double>(n)));
            }
        }
        fs::remove_all(dir);
    }
    SUBCASE("non-SPD covariance is rejected, naming the class") {
        fs::path dir = temp_dir("bad");
        CovarianceClassSpec spec = small_spec();
        spec.classes[1] = {"broken", {1, 2, 2, 1}};  // eigenvalues 3, -1
        try {
            gen_covariance_dataset(spec, 1, dir);
            FAIL("expected NotPositiveDefinite");
        } catch (const NotPositiveDefinite& e) {
            CHECK(std::string(e.what()).find("broken") != std::string::npos);
        }
        fs::remove_all(dir);
    }
}

TEST_CASE("manifest round-trip") {
    fs::path dir = temp_dir("mani");
    DatasetManifest m;
    m.class_names = {"a", "b"};
    m.rows = {{"x0.rtf-tensor", 0, "s1"}, {"x1.rtf-tensor", 1, "s2"}, {"x2.rtf-tensor", 0, ""}};
    m.write_csv(dir / "manifest.csv");
    DatasetManifest back = DatasetManifest::read_csv(dir / "manifest.csv");
    REQUIRE(back.rows.size() == 3);
    CHECK(back.rows[0].group == "s1");
    CHECK(back.rows[2].group == "");
    CHECK(back.rows[1].label == 1);
    CHECK(back.class_names == m.class_names);
    CHECK(back.num_classes() == 2);
    fs::remove_all(dir);
}

TEST_CASE("stratified_kfold") {
    SUBCASE("5+5 labels, k=5: one of each class per fold") {
        DatasetManifest m;
        for (int i = 0; i < 5; ++i) m.rows.push_back({"a", 0, ""});
        for (int i = 0; i < 5; ++i) m.rows.push_back({"b", 1, ""});
        auto folds = stratified_kfold(m, 5, 9, false);
        REQUIRE(folds.size() == 5);
        for (const auto& f : folds) {
            REQUIRE(f.test.size() == 2);
            std::size_t c0 = 0, c1 = 0;
            for (std::size_t idx : f.test) (m.rows[idx].label == 0 ? c0 : c1)++;
            CHECK(c0 == 1);
            CHECK(c1 == 1);
        }
    }
    SUBCASE("group-aware: 10 groups of 3, k=5 gives 2 whole groups per fold") {
        DatasetManifest m;
        for (int g = 0; g < 10; ++g) {
            for (int i = 0; i < 3; ++i) {
                m.rows.push_back({"x", static_cast<std::size_t>(g % 2), "g" + std::to_string(g)});
            }
        }
        auto folds = stratified_kfold(m, 5, 4, true);
        for (const auto& f : folds) {
            CHECK(f.test.size() == 6);
            std::set<std::string> groups;
            for (std::size_t idx : f.test) groups.insert(m.rows[idx].group);
            CHECK(groups.size() == 2);
        }
        // no group spans two folds
        for (std::size_t a = 0; a < folds.size(); ++a) {
            std::set<std::string> ga;
            for (std::size_t idx : folds[a].test) ga.insert(m.rows[idx].group);
            for (std::size_t b = a + 1; b < folds.size(); ++b) {
                for (std::size_t idx : folds[b].test) CHECK(ga.count(m.rows[idx].group) == 0);
            }
        }
    }
    SUBCASE("partition laws over random label vectors, k in 2..10") {
        CounterRng rng(77);
        for (std::size_t k = 2; k <= 10; ++k) {
            DatasetManifest m;
            const std::size_t n_classes = 2 + rng.uniform_below(3);
            // at least k per class
            for (std::size_t c = 0; c < n_classes; ++c) {
                const std::size_t extra = rng.uniform_below(2 * k);
                for (std::size_t i = 0; i < k + extra; ++i) {
                    m.rows.push_back({"x", c, ""});
                }
            }
            auto folds = stratified_kfold(m, k, 1234 + k, false);
            // fold f validates on the next fold's test set
            for (std::size_t f = 0; f < k; ++f) {
                CHECK(folds[f].val == folds[(f + 1) % k].test);
            }
            std::vector<std::size_t> seen(m.rows.size(), 0);
            for (const auto& f : folds) {
                for (std::size_t idx : f.test) ++seen[idx];
                // val and train are disjoint from test and from each other
                std::set<std::size_t> test_set(f.test.begin(), f.test.end());
                std::set<std::size_t> val_set(f.val.begin(), f.val.end());
                for (std::size_t idx : f.val) CHECK(test_set.count(idx) == 0);
                for (std::size_t idx : f.train) {
                    CHECK(test_set.count(idx) == 0);
                    CHECK(val_set.count(idx) == 0);
                }
                CHECK(f.train.size() + f.val.size() + f.test.size() == m.rows.size());
            }
            for (std::size_t s : seen) CHECK(s == 1);  // coverage and disjointness

            // stratification: per-fold class counts within 1 of an even split
            for (std::size_t c = 0; c < n_classes; ++c) {
                std::size_t class_total = 0;
                for (const auto& r : m.rows) class_total += (r.label == c);
                for (const auto& f : folds) {
                    std::size_t got = 0;
                    for (std::size_t idx : f.test) got += (m.rows[idx].label == c);
                    const double even = static_cast<double>(class_total) / k;
                    CHECK(std::abs(static_cast<double>(got) - even) <= 1.0);
                }
            }
        }
    }
    SUBCASE("too few samples in a class") {
        DatasetManifest m;
        m.rows = {{"a", 0, ""}, {"b", 0, ""}, {"c", 1, ""}};
        CHECK_THROWS_AS(stratified_kfold(m, 2, 1, false), TooFewSamples);
    }
}

TEST_CASE("sgd_step convention") {
    Param<float> w(Tensor<float>({1}, {1.0f}));
    w.grad = Tensor<float>({1}, {1.0f});
    std::vector<ParamRef<float>> refs = {
        {"w", &w.value, &w.grad, true, false, false, "Dense"}};
    SgdState<float> state;

    SUBCASE("hand-computed nesterov step") {
        sgd_step(refs, state, 0.1f, 0.5f, true);
        CHECK(state.velocity[0][0] == doctest::Approx(-0.1f));
        CHECK(w.value[0] == doctest::Approx(0.85f));
    }
    SUBCASE("zero gradient and zero velocity is a fixed point") {
        w.grad[0] = 0.0f;
        sgd_step(refs, state, 0.1f, 0.5f, true);
        CHECK(w.value[0] == 1.0f);
    }
    SUBCASE("zero momentum reduces to vanilla sgd") {
        sgd_step(refs, state, 0.1f, 0.0f, true);
        CHECK(w.value[0] == doctest::Approx(0.9f));
        sgd_step(refs, state, 0.1f, 0.0f, false);
        CHECK(w.value[0] == doctest::Approx(0.8f));
    }
}

TEST_CASE("plateau schedule") {
    SUBCASE("50 non-improving epochs divide the rate by 10, floor at 1e-4") {
        PlateauSchedule s(0.01, 50, 10.0, 0.0001);
        s.step(1.0);  // sets the best
        for (int i = 0; i < 49; ++i) {
            s.step(1.0);
            CHECK(s.lr() == doctest::Approx(0.01));
        }
        s.step(1.0);
        CHECK(s.lr() == doctest::Approx(0.001));
        for (int i = 0; i < 50; ++i) s.step(1.0);
        CHECK(s.lr() == doctest::Approx(0.0001));
        for (int i = 0; i < 50; ++i) s.step(1.0);
        CHECK(s.lr() == doctest::Approx(0.0001));  // stays at the floor
    }
    SUBCASE("monotonically decreasing loss never reduces the rate") {
        PlateauSchedule s(0.01, 50, 10.0, 0.0001);
        double loss = 10.0;
        for (int i = 0; i < 500; ++i) {
            s.step(loss);
            loss -= 0.01;
        }
        CHECK(s.lr() == doctest::Approx(0.01));
    }
    SUBCASE("improvement must be strict") {
        PlateauSchedule s(0.01, 2, 10.0, 0.0001);
        s.step(1.0);
        s.step(1.0);  // equal, not an improvement
        s.step(1.0);
        CHECK(s.lr() == doctest::Approx(0.001));
    }
}

TEST_CASE("cross_entropy_loss") {
    SUBCASE("perfect prediction has zero loss") {
        Tensor<float> p({1, 3}, {0, 1, 0});
        LossResult<float> r = cross_entropy_loss(p, {1});
        CHECK(r.loss == doctest::Approx(0.0f));
    }
    SUBCASE("uniform over 5 classes is ln 5") {
        Tensor<float> p = Tensor<float>::full({2, 5}, 0.2f);
        LossResult<float> r = cross_entropy_loss(p, {0, 3});
        CHECK(r.loss == doctest::Approx(std::log(5.0f)).epsilon(1e-5));
    }
    SUBCASE("combined softmax gradient matches finite differences on logits") {
        CounterRng rng(5);
        Tensor<double> logits({3, 4});
        for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = rng.uniform_symmetric(2.0);
        std::vector<std::size_t> labels = {1, 0, 3};

        auto loss_of = [&](const Tensor<double>& lg) {
            return cross_entropy_loss(softmax_rows(lg), labels).loss;
        };
        LossResult<double> r = cross_entropy_loss(softmax_rows(logits), labels);
        const double h = 1e-6;
        for (std::size_t i = 0; i < logits.size(); ++i) {
            const double saved = logits[i];
            logits[i] = saved + h;
            const double fp = loss_of(logits);
            logits[i] = saved - h;
            const double fm = loss_of(logits);
            logits[i] = saved;
            const double num = (fp - fm) / (2 * h);
            CHECK(r.dlogits[i] == doctest::Approx(num).epsilon(1e-4));
        }
    }
}

TEST_CASE("augmentation") {
    CounterRng rng(1);
    Tensor<float> sample({10, 10, 2});
    for (std::size_t i = 0; i < sample.size(); ++i) {
        sample[i] = static_cast<float>(rng.uniform_symmetric(1.0));
    }
    SUBCASE("flip is an involution") {
        Tensor<float> twice = hflip(hflip(sample));
        for (std::size_t i = 0; i < sample.size(); ++i) CHECK(twice[i] == sample[i]);
    }
    SUBCASE("zero shift is the identity") {
        Tensor<float> same = circular_shift(sample, 0, 0);
        for (std::size_t i = 0; i < sample.size(); ++i) CHECK(same[i] == sample[i]);
    }
    SUBCASE("circular shift preserves per-channel sums") {
        Tensor<float> shifted = circular_shift(sample, 3, -2);
        for (std::size_t c = 0; c < 2; ++c) {
            double a = 0, b = 0;
            for (std::size_t p = 0; p < 100; ++p) {
                a += sample[p * 2 + c];
                b += shifted[p * 2 + c];
            }
            CHECK(a == doctest::Approx(b).epsilon(1e-6));
        }
    }
    SUBCASE("augment keeps channel sums under no-flip draws too") {
        CounterRng arng(9);
        Tensor<float> out = augment(sample, arng);
        for (std::size_t c = 0; c < 2; ++c) {
            double a = 0, b = 0;
            for (std::size_t p = 0; p < 100; ++p) {
                a += sample[p * 2 + c];
                b += out[p * 2 + c];
            }
            CHECK(a == doctest::Approx(b).epsilon(1e-6));
        }
    }
}

TEST_CASE("training loop") {
    SUBCASE("single-class dataset reaches training accuracy 1 within 5 epochs") {
        LoadedDataset ds = first_order_toy(16, 3);
        // restrict to class 0 only, but keep a two-way classifier
        LoadedDataset single;
        single.sample_shape = ds.sample_shape;
        single.num_classes = 2;
        for (std::size_t i = 0; i < ds.samples.size(); ++i) {
            if (ds.labels[i] == 0) {
                single.samples.push_back(ds.samples[i]);
                single.labels.push_back(0);
                single.groups.push_back("");
            }
        }
        BackboneSpec spec;
        spec.input_h = 4;
        spec.input_w = 4;
        spec.input_c = 2;
        HeadConfig head;
        head.variant = HeadVariant::BaselineGAP;
        head.num_classes = 2;
        Network<float> net(spec, head, 21);

        TrainConfig cfg;
        cfg.epochs = 5;
        cfg.batch_size = 8;
        cfg.seed = 100;
        TrainResult r = train(net, single, whole_set_fold(single.samples.size()), cfg);
        CHECK(r.history.back().train_acc == doctest::Approx(1.0));
    }
    SUBCASE("identical seeds give bitwise-identical history files") {
        LoadedDataset ds = first_order_toy(12, 4);
        FoldSplit fold = whole_set_fold(ds.samples.size());
        BackboneSpec spec;
        spec.input_h = 4;
        spec.input_w = 4;
        spec.input_c = 2;
        HeadConfig head;
        head.variant = HeadVariant::LiteFBCN;
        head.gamma = 2;
        head.num_classes = 2;
        TrainConfig cfg;
        cfg.epochs = 6;
        cfg.batch_size = 4;
        cfg.seed = 7;

        fs::path dir = temp_dir("hist");
        Network<float> n1(spec, head, 55);
        TrainResult r1 = train(n1, ds, fold, cfg);
        write_history_csv(dir / "h1.csv", r1.history);
        Network<float> n2(spec, head, 55);
        TrainResult r2 = train(n2, ds, fold, cfg);
        write_history_csv(dir / "h2.csv", r2.history);
        CHECK(slurp(dir / "h1.csv") == slurp(dir / "h2.csv"));
        CHECK(slurp(dir / "h1.csv").rfind("epoch,lr,train_loss,train_acc,val_loss,val_acc\n", 0) ==
              0);
        fs::remove_all(dir);
    }
    SUBCASE("augmentation keeps training deterministic per seed") {
        LoadedDataset ds = first_order_toy(12, 9);
        FoldSplit fold = whole_set_fold(ds.samples.size());
        BackboneSpec spec;
        spec.input_h = 4;
        spec.input_w = 4;
        spec.input_c = 2;
        HeadConfig head;
        head.variant = HeadVariant::BaselineGAP;
        head.num_classes = 2;
        TrainConfig cfg;
        cfg.epochs = 4;
        cfg.batch_size = 4;
        cfg.seed = 17;
        cfg.augment = true;

        fs::path dir = temp_dir("aug");
        Network<float> n1(spec, head, 8);
        write_history_csv(dir / "a.csv", train(n1, ds, fold, cfg).history);
        Network<float> n2(spec, head, 8);
        write_history_csv(dir / "b.csv", train(n2, ds, fold, cfg).history);
        CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));

        // augmentation actually changes the trajectory
        cfg.augment = false;
        Network<float> n3(spec, head, 8);
        write_history_csv(dir / "c.csv", train(n3, ds, fold, cfg).history);
        CHECK(slurp(dir / "a.csv") != slurp(dir / "c.csv"));
        fs::remove_all(dir);
    }
    SUBCASE("linearly separable first-order data: baseline head >= 0.95 within 50 epochs") {
        LoadedDataset ds = first_order_toy(40, 5);
        DatasetManifest m;
        for (std::size_t i = 0; i < ds.samples.size(); ++i) {
            m.rows.push_back({"", ds.labels[i], ""});
        }
        auto folds = stratified_kfold(m, 4, 11, false);
        BackboneSpec spec;
        spec.input_h = 4;
        spec.input_w = 4;
        spec.input_c = 2;
        HeadConfig head;
        head.variant = HeadVariant::BaselineGAP;
        head.num_classes = 2;
        Network<float> net(spec, head, 31);
        TrainConfig cfg;
        cfg.epochs = 50;
        cfg.batch_size = 8;
        cfg.seed = 13;
        TrainResult r = train(net, ds, folds[0], cfg);
        CHECK(r.best_val_acc >= 0.95);
    }
    SUBCASE("loss decreases over the first 5 epochs on covariance data, median of 5 seeds") {
        fs::path dir = temp_dir("cov5");
        CovarianceClassSpec spec = small_spec();
        spec.samples_per_class = 24;
        DatasetManifest m = gen_covariance_dataset(spec, 42, dir);
        LoadedDataset ds = load_dataset(m, dir);
        auto folds = stratified_kfold(m, 4, 2, false);

        BackboneSpec bspec;
        bspec.input_h = 6;
        bspec.input_w = 6;
        bspec.input_c = 2;
        HeadConfig head;
        head.variant = HeadVariant::LiteFBCN;
        head.gamma = 2;
        head.num_classes = 2;

        int decreased = 0;
        for (std::uint64_t s = 1; s <= 5; ++s) {
            Network<float> net(bspec, head, 1000 + s);
            TrainConfig cfg;
            cfg.epochs = 5;
            cfg.batch_size = 8;
            cfg.seed = s;
            TrainResult r = train(net, ds, folds[0], cfg);
            if (r.history.back().train_loss < r.history.front().train_loss) ++decreased;
        }
        CHECK(decreased >= 3);
        fs::remove_all(dir);
    }
    SUBCASE("l2 penalty touches only classifier-kernel gradients") {
        LoadedDataset ds = first_order_toy(8, 6);
        BackboneSpec spec = BackboneSpec::micro(4, 4, 2, {4}, {1});
        HeadConfig head;
        head.variant = HeadVariant::FastBCNN;
        head.num_classes = 2;

        // gradients of one batch with and without the penalty
        auto grads_with_lambda = [&](double lambda) {
            Network<float> net(spec, head, 77);
            Tensor<float> batch({ds.samples.size(), 4, 4, 2});
            const std::size_t stride = 32;
            for (std::size_t i = 0; i < ds.samples.size(); ++i) {
                std::copy(ds.samples[i].data(), ds.samples[i].data() + stride,
                          batch.data() + i * stride);
            }
            net.zero_grad();
            Tensor<float> probs = net.predict_proba(batch, Mode::Train);
            LossResult<float> lr = cross_entropy_loss(probs, ds.labels);
            net.backward(lr.dlogits);
            std::vector<std::pair<std::string, std::vector<float>>> out;
            for (ParamRef<float>& p : net.params()) {
                if (!p.trainable) continue;
                std::vector<float> g = p.grad->vec();
                if (p.classifier_weight) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        g[i] += static_cast<float>(2.0 * lambda) * (*p.value)[i];
                    }
                }
                out.emplace_back(p.name, std::move(g));
            }
            return out;
        };
        auto with = grads_with_lambda(0.01);
        auto without = grads_with_lambda(0.0);
        REQUIRE(with.size() == without.size());
        bool classifier_differs = false;
        for (std::size_t i = 0; i < with.size(); ++i) {
            REQUIRE(with[i].first == without[i].first);
            const bool is_cls_weight = with[i].first == "head.classifier.weight";
            for (std::size_t j = 0; j < with[i].second.size(); ++j) {
                if (is_cls_weight) {
                    if (with[i].second[j] != without[i].second[j]) classifier_differs = true;
                } else {
                    CHECK(with[i].second[j] == without[i].second[j]);
                }
            }
        }
        CHECK(classifier_differs);
    }
    SUBCASE("diverged loss aborts with the epoch index") {
        LoadedDataset ds = first_order_toy(8, 8);
        for (auto& s : ds.samples) {
            for (std::size_t i = 0; i < s.size(); ++i) s[i] *= 1e30f;
        }
        BackboneSpec spec;
        spec.input_h = 4;
        spec.input_w = 4;
        spec.input_c = 2;
        HeadConfig head;
        head.variant = HeadVariant::BaselineGAP;
        head.num_classes = 2;
        Network<float> net(spec, head, 2);
        TrainConfig cfg;
        cfg.epochs = 10;
        cfg.batch_size = 4;
        cfg.seed = 3;
        cfg.lr0 = 1e20;
        try {
            train(net, ds, whole_set_fold(ds.samples.size()), cfg);
            FAIL("expected DivergedLoss");
        } catch (const DivergedLoss& e) {
            CHECK(std::string(e.what()).find("epoch") != std::string::npos);
        }
    }
}

TEST_CASE("run config validation") {
    SUBCASE("defaults match the training protocol") {
        TrainConfig cfg;
        CHECK(cfg.lr0 == 0.01);
        CHECK(cfg.momentum == 0.5);
        CHECK(cfg.nesterov);
        CHECK(cfg.plateau_patience == 50);
        CHECK(cfg.lr_factor == 10.0);
        CHECK(cfg.lr_floor == 0.0001);
        CHECK(cfg.epochs == 500);
        CHECK(cfg.l2_strength == 0.01);
    }
    SUBCASE("unknown keys are rejected at every level") {
        CHECK_THROWS_AS(RunConfig::from_json({{"trian", {{"lr0", 0.1}}}}), ConfigError);
        CHECK_THROWS_AS(RunConfig::from_json({{"train", {{"lr", 0.1}}}}), ConfigError);
        CHECK_THROWS_AS(RunConfig::from_json({{"head", {{"variante", "l"}}}}), ConfigError);
    }
    SUBCASE("round-trip through json") {
        RunConfig cfg;
        cfg.head.variant = HeadVariant::FastBCNN;
        cfg.train.epochs = 7;
        cfg.eval.folds = 3;
        RunConfig back = RunConfig::from_json(cfg.to_json());
        CHECK(back.head.variant == HeadVariant::FastBCNN);
        CHECK(back.train.epochs == 7);
        CHECK(back.eval.folds == 3);
        CHECK(back.backbone.blocks.size() == cfg.backbone.blocks.size());
    }
}
