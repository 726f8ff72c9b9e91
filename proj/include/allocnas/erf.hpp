#pragma once

#include "allocnas/supernet.hpp"

#include <functional>

namespace allocnas {

struct ErfResult {
    /// [extent, extent] map of |d center / d input|, summed over input channels.
    Tensor heatmap;
    /// Heatmap mass outside the central box of half the input extent.
    double outer_response = 0.0;
    /// Number of nonzero heatmap entries.
    std::size_t support = 0;
};

using FeatureFn = std::function<Var(const Var&)>;

/// Effective receptive field of the center neuron of `features(input)`.
/// The input is all ones of shape [1, in_channels, extent, extent]. The
/// seed gradient is 1 at the spatial center (h/2, w/2) of every output
/// channel.
ErfResult compute_erf(const FeatureFn& features, std::size_t in_channels, std::size_t extent);

/// ERF of the last pre-head feature map of `net` (full allocation) with
/// rectifiers bypassed and normalization statistics held constant.
ErfResult compute_erf(const SuperNet& net, std::size_t input_extent);

/// Inclusive [lo, hi] bounds of the central box used for outer_response.
std::pair<std::size_t, std::size_t> erf_central_box(std::size_t extent);

} // namespace allocnas
