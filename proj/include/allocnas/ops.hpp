#pragma once

#include "allocnas/autograd.hpp"

#include <span>

namespace allocnas {

struct Conv2dOptions {
    std::size_t stride = 1;
    std::size_t pad = 0;
    std::size_t groups = 1;
};

/// 2-d cross-correlation. input NCHW, kernel [O, C/groups, k, k].
/// Output extent is floor((H + 2*pad - k) / stride) + 1.
Var conv2d(const Var& input, const Var& kernel, Conv2dOptions opts = {});

inline Var conv2d(const Var& input, const Var& kernel, std::size_t stride, std::size_t pad)
{
    return conv2d(input, kernel, Conv2dOptions{stride, pad, 1});
}

struct GroupNormOptions {
    std::size_t groups = 1;
    float eps = 1e-5f;
    /// Treat the per-group mean and scale as constants in the backward pass.
    /// The op then acts as a fixed per-channel affine map for gradients.
    bool detach_stats = false;
};

/// Group normalization over (C/groups, H, W) per sample, with per-channel
/// affine gamma/beta. Statistics accumulate in double.
Var group_norm(const Var& input, const Var& gamma, const Var& beta, GroupNormOptions opts);

Var relu(const Var& x);
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, float factor);
/// Sum of all elements as a [1] tensor (double accumulation).
Var sum(const Var& x);
/// [N, C, H, W] -> [N, C].
Var global_avg_pool(const Var& x);
/// x [N, F], weight [O, F], bias [O] -> [N, O].
Var linear(const Var& x, const Var& weight, const Var& bias);

/// Mean softmax cross-entropy over the batch. Label smoothing mixes the
/// one-hot target with the uniform distribution:
/// q = (1 - smoothing) * onehot + smoothing / K.
Var cross_entropy(const Var& logits, std::span<const int> labels, float label_smoothing = 0.0f);

} // namespace allocnas
