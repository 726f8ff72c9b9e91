#pragma once

#include "allocnas/params.hpp"

#include <map>
#include <string>
#include <vector>

namespace allocnas {

/// Step-decay SGD schedule with linear warmup.
struct TrainSchedule {
    std::size_t epochs = 1;
    double base_lr = 0.01;
    std::vector<std::size_t> lr_drop_epochs;
    /// The learning rate is divided by this at every drop epoch.
    double lr_drop_factor = 10.0;
    double weight_decay = 1e-4;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    std::size_t warmup_epochs = 0;
    double label_smoothing = 0.0;

    /// Throws ContractError on an inconsistent schedule.
    void validate() const;

    /// Learning rate for iteration `iter` (0-based) of epoch `epoch`
    /// (0-based). Warmup ramps linearly up to base_lr over warmup_epochs.
    double lr_at(std::size_t epoch, std::size_t iter, std::size_t iters_per_epoch) const;
};

/// SGD with momentum and L2 weight decay:
///   buf = momentum * buf + (grad + weight_decay * p)
///   p   = p - lr * buf
/// Momentum buffers persist across calls, keyed by parameter name.
class Sgd {
public:
    Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}
    explicit Sgd(const TrainSchedule& schedule) : Sgd(schedule.momentum, schedule.weight_decay) {}

    void step(ParameterStore& params, double lr);
    void reset() { buffers_.clear(); }

private:
    double momentum_;
    double weight_decay_;
    std::map<std::string, Tensor> buffers_;
};

} // namespace allocnas
