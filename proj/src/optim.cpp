#include "allocnas/optim.hpp"

#include "allocnas/errors.hpp"

#include <cmath>

namespace allocnas {

void TrainSchedule::validate() const
{
    // lr == 0 is allowed: it freezes the weights, which the tests rely on
    if (!(base_lr >= 0.0) || !std::isfinite(base_lr))
        throw ContractError("schedule: base_lr must be >= 0");
    for (std::size_t i = 0; i < lr_drop_epochs.size(); ++i) {
        if (i > 0 && lr_drop_epochs[i] <= lr_drop_epochs[i - 1])
            throw ContractError("schedule: lr drop epochs must be strictly increasing");
        if (lr_drop_epochs[i] >= epochs)
            throw ContractError("schedule: lr drop epoch " + std::to_string(lr_drop_epochs[i]) + " not below epochs");
    }
    if (!(lr_drop_factor > 0.0))
        throw ContractError("schedule: lr_drop_factor must be > 0");
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
        throw ContractError("schedule: label_smoothing must lie in [0, 1)");
    if (weight_decay < 0.0 || momentum < 0.0 || momentum >= 1.0)
        throw ContractError("schedule: need weight_decay >= 0 and 0 <= momentum < 1");
    if (batch_size == 0)
        throw ContractError("schedule: batch_size must be >= 1");
}

double TrainSchedule::lr_at(std::size_t epoch, std::size_t iter, std::size_t iters_per_epoch) const
{
    if (epoch < warmup_epochs && iters_per_epoch > 0) {
        const double done = static_cast<double>(epoch * iters_per_epoch + iter + 1);
        return base_lr * done / static_cast<double>(warmup_epochs * iters_per_epoch);
    }
    double lr = base_lr;
    for (auto drop : lr_drop_epochs)
        if (epoch >= drop)
            lr /= lr_drop_factor;
    return lr;
}

void Sgd::step(ParameterStore& params, double lr)
{
    if (!(lr >= 0.0))
        throw ContractError("sgd: learning rate must be >= 0");
    for (auto& [name, var] : params) {
        Tensor& p = var.mutable_value();
        const Tensor& g = var.grad();
        if (g.empty())
            continue;
        auto [it, inserted] = buffers_.try_emplace(name, Tensor::zeros_like(p));
        Tensor& buf = it->second;
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double d = static_cast<double>(g[i]) + weight_decay_ * p[i];
            const double b = momentum_ * buf[i] + d;
            buf[i] = static_cast<float>(b);
            p[i] = static_cast<float>(p[i] - lr * b);
        }
    }
}

} // namespace allocnas
