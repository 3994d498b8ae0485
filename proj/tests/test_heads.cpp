#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "litefbcn/network.hpp"
#include "litefbcn/rng.hpp"

using namespace lfb;

namespace {

template <typename T>
Tensor<T> random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double bound = 1.0) {
    Tensor<T> t(std::move(shape));
    CounterRng rng(seed);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<T>(rng.uniform_symmetric(bound));
    }
    return t;
}

// Independent oracle: explicit per-location outer products, accumulated into
// a plain double buffer.
Tensor<double> bilinear_self_oracle(const Tensor<double>& f) {
    const std::size_t n = f.dim(0), h = f.dim(1), w = f.dim(2), k = f.dim(3);
    Tensor<double> out({n, k, k});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t c = 0; c < k; ++c) {
                double acc = 0;
                for (std::size_t i = 0; i < h; ++i)
                    for (std::size_t j = 0; j < w; ++j)
                        acc += f.at4(b, i, j, a) * f.at4(b, i, j, c);
                out.at3(b, a, c) = acc;
            }
    return out;
}

Tensor<double> bilinear_dual_oracle(const Tensor<double>& fa, const Tensor<double>& fb) {
    const std::size_t n = fa.dim(0), h = fa.dim(1), w = fa.dim(2);
    const std::size_t ka = fa.dim(3), kb = fb.dim(3);
    Tensor<double> out({n, ka, kb});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t a = 0; a < ka; ++a)
            for (std::size_t c = 0; c < kb; ++c) {
                double acc = 0;
                for (std::size_t i = 0; i < h; ++i)
                    for (std::size_t j = 0; j < w; ++j)
                        acc += fa.at4(b, i, j, a) * fb.at4(b, i, j, c);
                out.at3(b, a, c) = acc;
            }
    return out;
}

}  // namespace

TEST_CASE("resolve_reduction") {
    CHECK(resolve_reduction(1024, 4) == 256);
    CHECK(resolve_reduction(1280, 8) == 160);
    CHECK(resolve_reduction(64, 1) == 64);
    CHECK_THROWS_AS(resolve_reduction(10, 3), NonDivisible);
}

TEST_CASE("channel_reduce") {
    SUBCASE("averaging weights on a constant channel pair") {
        Tensor<double> f({1, 3, 3, 2});
        for (std::size_t i = 0; i < 9; ++i) {
            f[2 * i] = 2.0;
            f[2 * i + 1] = 4.0;
        }
        Tensor<double> w({1, 1, 2, 1}, {0.5, 0.5});
        Tensor<double> out = channel_reduce(f, w);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(3.0));
    }
    SUBCASE("identity weights with K = C pass the map through") {
        auto f = random_tensor<double>({2, 3, 3, 3}, 11);
        Tensor<double> w({1, 1, 3, 3});
        for (std::size_t c = 0; c < 3; ++c) w[c * 3 + c] = 1.0;
        Tensor<double> out = channel_reduce(f, w);
        for (std::size_t i = 0; i < f.size(); ++i) CHECK(out[i] == doctest::Approx(f[i]));
    }
    SUBCASE("random case equals a 1x1 Conv2D") {
        auto f = random_tensor<double>({2, 4, 5, 6}, 12);
        auto w = random_tensor<double>({1, 1, 6, 2}, 13);
        auto b = random_tensor<double>({2}, 14);
        Tensor<double> got = channel_reduce(f, w, &b);

        Conv2D<double> conv(1, 1, 6, 2, 1, Padding::Valid, true);
        conv.weight().value = w;
        conv.bias()->value = b;
        Tensor<double> want = conv.forward(f, Mode::Infer);
        REQUIRE(got.shape() == want.shape());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
        }
    }
    SUBCASE("channel mismatch") {
        auto f = random_tensor<double>({1, 2, 2, 3}, 15);
        auto w = random_tensor<double>({1, 1, 4, 2}, 16);
        CHECK_THROWS_AS(channel_reduce(f, w), ShapeMismatch);
    }
}

TEST_CASE("bilinear_pool_self") {
    SUBCASE("single location is one outer product") {
        Tensor<double> f({1, 1, 1, 2}, {1, 2});
        Tensor<double> b = bilinear_pool_self(f);
        CHECK(b.at3(0, 0, 0) == 1);
        CHECK(b.at3(0, 0, 1) == 2);
        CHECK(b.at3(0, 1, 0) == 2);
        CHECK(b.at3(0, 1, 1) == 4);
    }
    SUBCASE("orthogonal locations sum to the identity") {
        Tensor<double> f({1, 2, 1, 2}, {1, 0, 0, 1});
        Tensor<double> b = bilinear_pool_self(f);
        CHECK(b.at3(0, 0, 0) == 1);
        CHECK(b.at3(0, 0, 1) == 0);
        CHECK(b.at3(0, 1, 0) == 0);
        CHECK(b.at3(0, 1, 1) == 1);
    }
    SUBCASE("random map: symmetric, trace = energy, matches the loop oracle") {
        auto f = random_tensor<double>({1, 4, 4, 3}, 21);
        Tensor<double> b = bilinear_pool_self(f);
        Tensor<double> want = bilinear_self_oracle(f);

        double energy = 0;
        for (std::size_t i = 0; i < f.size(); ++i) energy += f[i] * f[i];
        double trace = b.at3(0, 0, 0) + b.at3(0, 1, 1) + b.at3(0, 2, 2);
        CHECK(std::abs(trace - energy) <= 1e-5 * std::abs(energy));

        for (std::size_t a = 0; a < 3; ++a) {
            for (std::size_t c = 0; c < 3; ++c) {
                CHECK(std::abs(b.at3(0, a, c) - b.at3(0, c, a)) <=
                      1e-6 * std::max(1.0, std::abs(b.at3(0, a, c))));
                CHECK(std::abs(b.at3(0, a, c) - want.at3(0, a, c)) <=
                      1e-5 * std::max(1.0, std::abs(want.at3(0, a, c))));
            }
        }
    }
    SUBCASE("symmetry and positive semidefiniteness, many trials") {
        for (std::uint64_t trial = 0; trial < 200; ++trial) {
            auto f = random_tensor<double>({1, 3, 3, 4}, 1000 + trial, 2.0);
            Tensor<double> b = bilinear_pool_self(f);
            double binf = 0;
            for (std::size_t i = 0; i < b.size(); ++i) binf = std::max(binf, std::abs(b[i]));
            CounterRng vr(2000 + trial);
            for (int rep = 0; rep < 5; ++rep) {
                double v[4], vbv = 0, vnorm = 0;
                for (auto& x : v) x = vr.uniform_symmetric(1.0);
                for (std::size_t a = 0; a < 4; ++a) {
                    for (std::size_t c = 0; c < 4; ++c) vbv += v[a] * b.at3(0, a, c) * v[c];
                }
                for (auto x : v) vnorm += x * x;
                CHECK(vbv >= -1e-9 * vnorm * binf);
            }
        }
    }
}

TEST_CASE("bilinear_pool_dual") {
    SUBCASE("single location") {
        Tensor<double> fa({1, 1, 1, 2}, {1, 2});
        Tensor<double> fb({1, 1, 1, 1}, {3});
        Tensor<double> b = bilinear_pool_dual(fa, fb);
        CHECK(b.at3(0, 0, 0) == 3);
        CHECK(b.at3(0, 1, 0) == 6);
    }
    SUBCASE("equal inputs reduce to the self case") {
        auto f = random_tensor<double>({2, 3, 3, 3}, 31);
        Tensor<double> dual = bilinear_pool_dual(f, f);
        Tensor<double> self = bilinear_pool_self(f);
        for (std::size_t i = 0; i < dual.size(); ++i) {
            CHECK(dual[i] == doctest::Approx(self[i]).epsilon(1e-12));
        }
    }
    SUBCASE("random case matches the loop oracle") {
        auto fa = random_tensor<double>({2, 3, 4, 3}, 32);
        auto fb = random_tensor<double>({2, 3, 4, 2}, 33);
        Tensor<double> got = bilinear_pool_dual(fa, fb);
        Tensor<double> want = bilinear_dual_oracle(fa, fb);
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(std::abs(got[i] - want[i]) <= 1e-5 * std::max(1.0, std::abs(want[i])));
        }
    }
    SUBCASE("mismatched spatial dims are rejected") {
        auto fa = random_tensor<double>({1, 3, 3, 2}, 34);
        auto fb = random_tensor<double>({1, 4, 3, 2}, 35);
        CHECK_THROWS_AS(bilinear_pool_dual(fa, fb), SpatialMismatch);
    }
}

TEST_CASE("normalize_bilinear") {
    SUBCASE("closed form for [[1,2],[2,4]]") {
        Tensor<double> b({1, 2, 2}, {1, 2, 2, 4});
        Tensor<double> v = normalize_bilinear(b);
        REQUIRE(v.shape() == std::vector<std::size_t>{1, 4});
        const double s2 = std::sqrt(2.0);
        CHECK(v[0] == doctest::Approx(1.0 / 3.0));
        CHECK(v[1] == doctest::Approx(s2 / 3.0));
        CHECK(v[2] == doctest::Approx(s2 / 3.0));
        CHECK(v[3] == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("zero input maps to zero, no NaN") {
        Tensor<double> b({2, 3, 3});
        Tensor<double> v = normalize_bilinear(b);
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(v[i] == 0.0);
            CHECK(std::isfinite(v[i]));
        }
    }
    SUBCASE("positive scaling leaves the output invariant") {
        auto b = random_tensor<double>({3, 2, 2}, 41, 5.0);
        Tensor<double> base = normalize_bilinear(b);
        for (double c : {0.25, 3.0, 1e4}) {
            Tensor<double> scaled = normalize_bilinear(scale(b, c));
            for (std::size_t i = 0; i < base.size(); ++i) {
                CHECK(scaled[i] == doctest::Approx(base[i]).epsilon(1e-6));
            }
        }
    }
    SUBCASE("unit norm on nonzero input") {
        auto b = random_tensor<double>({4, 3, 3}, 42, 2.0);
        Tensor<double> v = normalize_bilinear(b);
        for (std::size_t r = 0; r < 4; ++r) {
            double sq = 0;
            for (std::size_t i = 0; i < 9; ++i) sq += v.at2(r, i) * v.at2(r, i);
            CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("head_forward behaviors") {
    BackboneSpec spec;  // identity backbone: the head sees the raw map
    spec.input_h = 3;
    spec.input_w = 3;
    spec.input_c = 4;

    SUBCASE("zero classifier gives uniform probabilities") {
        HeadConfig head;
        head.variant = HeadVariant::LiteFBCN;
        head.gamma = 2;
        head.num_classes = 5;
        Network<double> net(spec, head, 3);
        for (ParamRef<double>& p : net.params()) {
            if (p.name == "head.classifier.weight" || p.name == "head.classifier.bias") {
                for (std::size_t i = 0; i < p.value->size(); ++i) (*p.value)[i] = 0.0;
            }
        }
        auto x = random_tensor<double>({2, 3, 3, 4}, 51);
        Tensor<double> probs = net.predict_proba(x, Mode::Infer);
        for (std::size_t i = 0; i < probs.size(); ++i) {
            CHECK(probs[i] == doctest::Approx(0.2).epsilon(1e-9));
        }
    }
    SUBCASE("two equal logits split evenly") {
        Tensor<double> logits({1, 2}, {0.0, 0.0});
        Tensor<double> p = softmax_rows(logits);
        CHECK(p[0] == doctest::Approx(0.5));
        CHECK(p[1] == doctest::Approx(0.5));
    }
    SUBCASE("rows sum to one, entries in (0,1), argmax shift-invariant") {
        auto logits = random_tensor<double>({6, 4}, 52, 3.0);
        Tensor<double> p = softmax_rows(logits);
        Tensor<double> shifted = logits;
        for (std::size_t r = 0; r < 6; ++r) {
            double sum = 0;
            std::size_t amax_p = 0, amax_q = 0;
            for (std::size_t c = 0; c < 4; ++c) {
                sum += p.at2(r, c);
                CHECK(p.at2(r, c) > 0.0);
                CHECK(p.at2(r, c) < 1.0);
                shifted.at2(r, c) += 13.75;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
            Tensor<double> q = softmax_rows(shifted);
            for (std::size_t c = 0; c < 4; ++c) {
                if (p.at2(r, c) > p.at2(r, amax_p)) amax_p = c;
                if (q.at2(r, c) > q.at2(r, amax_q)) amax_q = c;
            }
            CHECK(amax_p == amax_q);
        }
    }
    SUBCASE("gamma=1 with an identity reducer reproduces the single-trunk bilinear head") {
        HeadConfig lite;
        lite.variant = HeadVariant::LiteFBCN;
        lite.gamma = 1;
        lite.num_classes = 3;
        HeadConfig fast;
        fast.variant = HeadVariant::FastBCNN;
        fast.num_classes = 3;

        Network<double> lnet(spec, lite, 7);
        Network<double> fnet(spec, fast, 7);

        // identity reducer
        auto lrefs = lnet.params();
        for (ParamRef<double>& p : lrefs) {
            if (p.name == "head.reducer.weight") {
                for (std::size_t i = 0; i < p.value->size(); ++i) (*p.value)[i] = 0.0;
                for (std::size_t c = 0; c < 4; ++c) (*p.value)[c * 4 + c] = 1.0;
            }
            if (p.name == "head.reducer.bias") {
                for (std::size_t i = 0; i < p.value->size(); ++i) (*p.value)[i] = 0.0;
            }
        }
        // align the shared head parameters
        auto frefs = fnet.params();
        for (ParamRef<double>& pf : frefs) {
            for (ParamRef<double>& pl : lrefs) {
                if (pl.name == pf.name) *pl.value = *pf.value;
            }
        }

        auto x = random_tensor<double>({2, 3, 3, 4}, 53);
        Tensor<double> pl = lnet.predict_proba(x, Mode::Infer);
        Tensor<double> pf = fnet.predict_proba(x, Mode::Infer);
        for (std::size_t i = 0; i < pl.size(); ++i) {
            CHECK(pl[i] == doctest::Approx(pf[i]).epsilon(1e-9));
        }
    }
    SUBCASE("dual head rejects one-map entry and non-dual rejects pairs") {
        HeadConfig dual;
        dual.variant = HeadVariant::BCNNDual;
        dual.num_classes = 2;
        Network<double> dnet(spec, dual, 1);
        auto x = random_tensor<double>({1, 3, 3, 4}, 54);
        CHECK_NOTHROW(dnet.forward_pair(x, x, Mode::Infer));

        HeadConfig lite;
        lite.variant = HeadVariant::LiteFBCN;
        lite.gamma = 2;
        lite.num_classes = 2;
        Network<double> lnet(spec, lite, 1);
        CHECK_THROWS_AS(lnet.forward_pair(x, x, Mode::Infer), VariantShapeMismatch);

        auto bad = random_tensor<double>({1, 5, 5, 4}, 55);
        CHECK_THROWS_AS(lnet.forward(bad, Mode::Infer), VariantShapeMismatch);
    }
}

TEST_CASE("head_param_count closed forms") {
    SUBCASE("worked examples") {
        HeadParamCount lite = head_param_count(HeadVariant::LiteFBCN, 1024, 4, 5);
        CHECK(lite.reducer == 262400);
        CHECK(lite.batchnorm_trainable + lite.batchnorm_running == 262144);
        CHECK(lite.classifier == 327685);
        CHECK(lite.total() == 852229);

        HeadParamCount fast = head_param_count(HeadVariant::FastBCNN, 1024, 1, 5);
        CHECK(fast.batchnorm_trainable + fast.batchnorm_running == 4194304);
        CHECK(fast.classifier == 5242885);
        CHECK(fast.total() == 9437189);

        HeadParamCount base = head_param_count(HeadVariant::BaselineGAP, 1024, 1, 5);
        CHECK(base.total() == 5125);

        CHECK_THROWS_AS(head_param_count(HeadVariant::LiteFBCN, 10, 3, 2), NonDivisible);
    }
    SUBCASE("closed form equals counted parameters on constructed heads") {
        BackboneSpec spec;
        spec.input_h = 2;
        spec.input_w = 2;
        spec.input_c = 16;
        for (HeadVariant v : {HeadVariant::BaselineGAP, HeadVariant::FastBCNN,
                              HeadVariant::LiteFBCN, HeadVariant::BCNNDual}) {
            HeadConfig head;
            head.variant = v;
            head.gamma = 4;
            head.num_classes = 3;
            Network<float> net(spec, head, 1);
            ParamCountReport counted = count_params(net);
            HeadParamCount closed = head_param_count(v, 16, 4, 3);
            CHECK(counted.total() == closed.total());
            CHECK(counted.trainable_total == closed.trainable());
        }
    }
    SUBCASE("parameter count drops monotonically with gamma, below the unreduced head") {
        for (std::size_t c : {16u, 64u, 256u}) {
            for (std::size_t ncls : {2u, 5u}) {
                const std::size_t g8 = head_param_count(HeadVariant::LiteFBCN, c, 8, ncls).total();
                const std::size_t g4 = head_param_count(HeadVariant::LiteFBCN, c, 4, ncls).total();
                const std::size_t g2 = head_param_count(HeadVariant::LiteFBCN, c, 2, ncls).total();
                const std::size_t fast = head_param_count(HeadVariant::FastBCNN, c, 1, ncls).total();
                CHECK(g8 < g4);
                CHECK(g4 < g2);
                CHECK(g2 < fast);
            }
        }
    }
    SUBCASE("bilinear vector shrinks by exactly gamma^2") {
        for (std::size_t gamma : {2u, 4u, 8u}) {
            HeadParamCount lite = head_param_count(HeadVariant::LiteFBCN, 64, gamma, 3);
            HeadParamCount fast = head_param_count(HeadVariant::FastBCNN, 64, 1, 3);
            CHECK(fast.bilinear_length == lite.bilinear_length * gamma * gamma);
        }
    }
}
