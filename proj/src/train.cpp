#include "litefbcn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "litefbcn/optim.hpp"

namespace lfb {

nlohmann::json TrainConfig::to_json() const {
    return {{"lr0", lr0},
            {"momentum", momentum},
            {"nesterov", nesterov},
            {"plateau_patience", plateau_patience},
            {"lr_factor", lr_factor},
            {"lr_floor", lr_floor},
            {"epochs", epochs},
            {"l2_strength", l2_strength},
            {"batch_size", batch_size},
            {"seed", seed},
            {"augment", augment}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    if (j.contains("lr0")) c.lr0 = j.at("lr0").get<double>();
    if (j.contains("momentum")) c.momentum = j.at("momentum").get<double>();
    if (j.contains("nesterov")) c.nesterov = j.at("nesterov").get<bool>();
    if (j.contains("plateau_patience")) {
        c.plateau_patience = j.at("plateau_patience").get<std::size_t>();
    }
    if (j.contains("lr_factor")) c.lr_factor = j.at("lr_factor").get<double>();
    if (j.contains("lr_floor")) c.lr_floor = j.at("lr_floor").get<double>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("l2_strength")) c.l2_strength = j.at("l2_strength").get<double>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("augment")) c.augment = j.at("augment").get<bool>();
    if (c.lr_floor > c.lr0) throw ConfigError("train: lr_floor must not exceed lr0");
    if (c.plateau_patience < 1) throw ConfigError("train: plateau_patience must be >= 1");
    if (c.batch_size == 0) throw ConfigError("train: batch_size must be positive");
    if (c.epochs == 0) throw ConfigError("train: epochs must be positive");
    return c;
}

std::string format_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

Tensor<float> hflip(const Tensor<float>& sample) {
    const std::size_t h = sample.dim(0), w = sample.dim(1), c = sample.dim(2);
    Tensor<float> out(sample.shape());
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const float* src = &sample.at3(i, w - 1 - j, 0);
            std::copy(src, src + c, &out.at3(i, j, 0));
        }
    }
    return out;
}

Tensor<float> circular_shift(const Tensor<float>& sample, std::ptrdiff_t dh, std::ptrdiff_t dw) {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(sample.dim(0));
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(sample.dim(1));
    const std::size_t c = sample.dim(2);
    Tensor<float> out(sample.shape());
    for (std::ptrdiff_t i = 0; i < h; ++i) {
        const std::size_t si = static_cast<std::size_t>((((i - dh) % h) + h) % h);
        for (std::ptrdiff_t j = 0; j < w; ++j) {
            const std::size_t sj = static_cast<std::size_t>((((j - dw) % w) + w) % w);
            const float* src = &sample.at3(si, sj, 0);
            std::copy(src, src + c, &out.at3(static_cast<std::size_t>(i),
                                             static_cast<std::size_t>(j), 0));
        }
    }
    return out;
}

Tensor<float> augment(const Tensor<float>& sample, CounterRng& rng) {
    const std::size_t h = sample.dim(0), w = sample.dim(1);
    const bool flip = rng.uniform() < 0.5;
    const std::ptrdiff_t max_dh = static_cast<std::ptrdiff_t>(h / 10);
    const std::ptrdiff_t max_dw = static_cast<std::ptrdiff_t>(w / 10);
    const std::ptrdiff_t dh =
        static_cast<std::ptrdiff_t>(rng.uniform_below(2 * max_dh + 1)) - max_dh;
    const std::ptrdiff_t dw =
        static_cast<std::ptrdiff_t>(rng.uniform_below(2 * max_dw + 1)) - max_dw;
    Tensor<float> out = circular_shift(sample, dh, dw);
    return flip ? hflip(out) : out;
}

std::vector<Tensor<float>> snapshot_params(Network<float>& net) {
    std::vector<Tensor<float>> snap;
    for (ParamRef<float>& p : net.params()) snap.push_back(*p.value);
    return snap;
}

void restore_params(Network<float>& net, const std::vector<Tensor<float>>& snapshot) {
    auto refs = net.params();
    if (refs.size() != snapshot.size()) {
        throw ShapeMismatch("restore_params: snapshot does not match the model");
    }
    for (std::size_t i = 0; i < refs.size(); ++i) *refs[i].value = snapshot[i];
}

namespace {

// Stacks dataset samples (optionally augmented) into an (B,H,W,C) batch.
Tensor<float> make_batch(const LoadedDataset& data, const std::vector<std::size_t>& indices,
                         std::size_t begin, std::size_t end, CounterRng* aug_rng) {
    const auto& s = data.sample_shape;
    Tensor<float> batch({end - begin, s[0], s[1], s[2]});
    const std::size_t stride = s[0] * s[1] * s[2];
    for (std::size_t b = begin; b < end; ++b) {
        const Tensor<float>& sample = data.samples[indices[b]];
        if (aug_rng) {
            Tensor<float> aug = augment(sample, *aug_rng);
            std::copy(aug.data(), aug.data() + stride, batch.data() + (b - begin) * stride);
        } else {
            std::copy(sample.data(), sample.data() + stride, batch.data() + (b - begin) * stride);
        }
    }
    return batch;
}

std::vector<std::size_t> gather_labels(const LoadedDataset& data,
                                       const std::vector<std::size_t>& indices, std::size_t begin,
                                       std::size_t end) {
    std::vector<std::size_t> out;
    out.reserve(end - begin);
    for (std::size_t b = begin; b < end; ++b) out.push_back(data.labels[indices[b]]);
    return out;
}

std::size_t argmax_row(const Tensor<float>& probs, std::size_t row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < probs.dim(1); ++j) {
        if (probs.at2(row, j) > probs.at2(row, best)) best = j;
    }
    return best;
}

double classifier_penalty(Network<float>& net, double lambda) {
    std::vector<const Tensor<float>*> cls;
    for (ParamRef<float>& p : net.params()) {
        if (p.classifier_weight) cls.push_back(p.value);
    }
    return l2_penalty(cls, static_cast<float>(lambda));
}

}  // namespace

EvalResult evaluate(Network<float>& net, const LoadedDataset& data,
                    const std::vector<std::size_t>& indices, std::size_t batch_size) {
    EvalResult r;
    if (indices.empty()) return r;
    double ce_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < indices.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, indices.size());
        Tensor<float> batch = make_batch(data, indices, begin, end, nullptr);
        std::vector<std::size_t> labels = gather_labels(data, indices, begin, end);
        Tensor<float> probs = net.predict_proba(batch, Mode::Infer);
        LossResult<float> lr = cross_entropy_loss(probs, labels);
        ce_sum += static_cast<double>(lr.loss) * static_cast<double>(end - begin);
        for (std::size_t b = 0; b < end - begin; ++b) {
            const std::size_t pred = argmax_row(probs, b);
            r.predictions.push_back(pred);
            if (pred == labels[b]) ++correct;
        }
    }
    r.mean_ce = ce_sum / static_cast<double>(indices.size());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(indices.size());
    return r;
}

TrainResult train(Network<float>& net, const LoadedDataset& data, const FoldSplit& fold,
                  const TrainConfig& cfg) {
    for (std::size_t idx : fold.train) {
        if (idx >= data.samples.size()) throw ConfigError("train: fold index out of range");
    }

    CounterRng shuffle_rng(derive_seed(cfg.seed, 0x5FuLL));
    CounterRng aug_rng(derive_seed(cfg.seed, 0xA6uLL));
    SgdState<float> velocity;
    PlateauSchedule sched(cfg.lr0, cfg.plateau_patience, cfg.lr_factor, cfg.lr_floor);
    CheckpointSelector selector;

    TrainResult result;
    std::vector<std::size_t> order = fold.train;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr_epoch = sched.lr();
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, order.size());
            Tensor<float> batch =
                make_batch(data, order, begin, end, cfg.augment ? &aug_rng : nullptr);
            std::vector<std::size_t> labels = gather_labels(data, order, begin, end);

            net.zero_grad();
            Tensor<float> probs = net.predict_proba(batch, Mode::Train);
            LossResult<float> lr = cross_entropy_loss(probs, labels);
            const double penalty = classifier_penalty(net, cfg.l2_strength);
            const double batch_loss = static_cast<double>(lr.loss) + penalty;
            if (!std::isfinite(batch_loss)) {
                throw DivergedLoss("training loss diverged at epoch " + std::to_string(epoch));
            }
            net.backward(lr.dlogits);

            auto refs = net.params();
            for (ParamRef<float>& p : refs) {
                if (!p.classifier_weight) continue;
                const float two_lambda = static_cast<float>(2.0 * cfg.l2_strength);
                for (std::size_t i = 0; i < p.value->size(); ++i) {
                    (*p.grad)[i] += two_lambda * (*p.value)[i];
                }
            }
            sgd_step(refs, velocity, static_cast<float>(lr_epoch),
                     static_cast<float>(cfg.momentum), cfg.nesterov);

            loss_sum += batch_loss * static_cast<double>(end - begin);
            for (std::size_t b = 0; b < end - begin; ++b) {
                if (argmax_row(probs, b) == labels[b]) ++correct;
            }
        }

        EvalResult val = evaluate(net, data, fold.val, cfg.batch_size);
        const double val_loss = val.mean_ce + classifier_penalty(net, cfg.l2_strength);
        if (!std::isfinite(val_loss)) {
            throw DivergedLoss("validation loss diverged at epoch " + std::to_string(epoch));
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr_epoch;
        stats.train_loss = order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size());
        stats.train_acc =
            order.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(order.size());
        stats.val_loss = val_loss;
        stats.val_acc = val.accuracy;
        result.history.push_back(stats);

        if (selector.consider(epoch, val.accuracy, val_loss)) {
            result.best_val_acc = val.accuracy;
            result.best_val_loss = val_loss;
            result.best_epoch = epoch;
            result.best_params = snapshot_params(net);
        }

        sched.step(val_loss);
    }
    return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot write history '" + path.string() + "'");
    f << "epoch,lr,train_loss,train_acc,val_loss,val_acc\n";
    for (const EpochStats& e : history) {
        f << e.epoch << "," << format_num(e.lr) << "," << format_num(e.train_loss) << ","
          << format_num(e.train_acc) << "," << format_num(e.val_loss) << ","
          << format_num(e.val_acc) << "\n";
    }
}

}  // namespace lfb
