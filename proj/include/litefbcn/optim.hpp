#pragma once

#include <limits>

#include "litefbcn/layer.hpp"

namespace lfb {

// Momentum buffers aligned with the trainable-parameter enumeration order.
template <typename T>
struct SgdState {
    std::vector<Tensor<T>> velocity;
};

// Update convention, fixed:
//   v <- mu * v - lr * g
//   w <- w + mu * v - lr * g   (Nesterov)
//   w <- w + v                 (plain momentum)
// Gradients must already include any weight penalty.
template <typename T>
void sgd_step(std::vector<ParamRef<T>>& params, SgdState<T>& state, T lr, T momentum,
              bool nesterov);

// Learning-rate schedule: when the monitored loss has not strictly improved
// its best for `patience` consecutive epochs, divide the rate by `factor`
// (clamped at `floor`) and reset the patience counter.
class PlateauSchedule {
public:
    PlateauSchedule(double lr0, std::size_t patience, double factor, double floor)
        : lr_(lr0), floor_(floor), factor_(factor), patience_(patience) {}

    double step(double epoch_val_loss) {
        if (epoch_val_loss < best_) {
            best_ = epoch_val_loss;
            wait_ = 0;
        } else if (++wait_ >= patience_) {
            lr_ = std::max(lr_ / factor_, floor_);
            wait_ = 0;
        }
        return lr_;
    }

    double lr() const { return lr_; }

private:
    double lr_;
    double floor_;
    double factor_;
    std::size_t patience_;
    std::size_t wait_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

}  // namespace lfb
