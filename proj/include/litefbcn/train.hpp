#pragma once

#include <limits>

#include "litefbcn/dataset.hpp"
#include "litefbcn/kfold.hpp"
#include "litefbcn/loss.hpp"
#include "litefbcn/network.hpp"
#include "litefbcn/rng.hpp"

namespace lfb {

struct TrainConfig {
    double lr0 = 0.01;
    double momentum = 0.5;
    bool nesterov = true;
    std::size_t plateau_patience = 50;
    double lr_factor = 10.0;
    double lr_floor = 0.0001;
    std::size_t epochs = 500;
    double l2_strength = 0.01;  // classifier kernel penalty
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    bool augment = false;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

// Mirrors the W axis of an (H,W,C) sample.
Tensor<float> hflip(const Tensor<float>& sample);
// Circular (wrap-around) shift by dh rows and dw columns.
Tensor<float> circular_shift(const Tensor<float>& sample, std::ptrdiff_t dh, std::ptrdiff_t dw);

// 50% horizontal flip plus an independent circular shift of up to +-10% per
// spatial axis. Consumes a fixed number of draws per call.
Tensor<float> augment(const Tensor<float>& sample, CounterRng& rng);

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;
    double best_val_acc = -1.0;
    double best_val_loss = 0.0;
    std::vector<Tensor<float>> best_params;  // snapshot in params() order
};

// Best-checkpoint rule: highest validation accuracy, ties broken by lower
// validation loss. consider() returns true when the epoch becomes the new
// best.
class CheckpointSelector {
public:
    bool consider(std::size_t epoch, double val_acc, double val_loss) {
        if (val_acc > best_acc_ || (val_acc == best_acc_ && val_loss < best_loss_)) {
            best_acc_ = val_acc;
            best_loss_ = val_loss;
            best_epoch_ = epoch;
            return true;
        }
        return false;
    }
    std::size_t best_epoch() const { return best_epoch_; }
    double best_acc() const { return best_acc_; }
    double best_loss() const { return best_loss_; }

private:
    double best_acc_ = -1.0;
    double best_loss_ = std::numeric_limits<double>::infinity();
    std::size_t best_epoch_ = 0;
};

// Param snapshot helpers (values only, running statistics included).
std::vector<Tensor<float>> snapshot_params(Network<float>& net);
void restore_params(Network<float>& net, const std::vector<Tensor<float>>& snapshot);

// One fold of training: seeded shuffled mini-batches, train-mode batch norm,
// cross-entropy plus classifier l2 penalty, Nesterov SGD, plateau schedule on
// the validation loss, best-validation-accuracy checkpointing (ties broken by
// lower validation loss). Throws DivergedLoss at the first non-finite loss.
TrainResult train(Network<float>& net, const LoadedDataset& data, const FoldSplit& fold,
                  const TrainConfig& cfg);

// Batched inference pass; returns predictions and the mean cross-entropy.
struct EvalResult {
    std::vector<std::size_t> predictions;
    double mean_ce = 0.0;
    double accuracy = 0.0;
};
EvalResult evaluate(Network<float>& net, const LoadedDataset& data,
                    const std::vector<std::size_t>& indices, std::size_t batch_size);

// History CSV with header `epoch,lr,train_loss,train_acc,val_loss,val_acc`.
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history);

// Shared numeric formatting for CSV artifacts (shortest round-trippable-ish
// form, stable across runs).
std::string format_num(double v);

}  // namespace lfb
