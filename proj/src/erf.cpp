#include "allocnas/erf.hpp"

#include "allocnas/errors.hpp"

#include <cmath>

namespace allocnas {

std::pair<std::size_t, std::size_t> erf_central_box(std::size_t extent)
{
    const std::size_t lo = extent / 4;
    const std::size_t len = std::max<std::size_t>(1, extent / 2);
    return {lo, lo + len - 1};
}

ErfResult compute_erf(const FeatureFn& features, std::size_t in_channels, std::size_t extent)
{
    if (extent == 0 || in_channels == 0)
        throw ContractError("compute_erf: empty input");
    Var input(Tensor({1, in_channels, extent, extent}, 1.0f), true);
    Var out = features(input);
    const auto& shape = out.shape();
    if (shape.size() != 4 || shape[0] != 1)
        throw DimensionError("compute_erf: feature map must be [1,C,H,W], got " + shape_to_string(shape));
    Tensor seed(shape, 0.0f);
    const std::size_t ch = shape[2] / 2, cw = shape[3] / 2;
    for (std::size_t c = 0; c < shape[1]; ++c)
        seed.at(0, c, ch, cw) = 1.0f;
    backward(out, seed);

    ErfResult result;
    result.heatmap = Tensor({extent, extent}, 0.0f);
    const Tensor& g = input.grad();
    if (!g.empty()) {
        for (std::size_t c = 0; c < in_channels; ++c)
            for (std::size_t i = 0; i < extent * extent; ++i)
                result.heatmap[i] += std::abs(g[c * extent * extent + i]);
    }
    const auto [lo, hi] = erf_central_box(extent);
    for (std::size_t y = 0; y < extent; ++y)
        for (std::size_t x = 0; x < extent; ++x) {
            const float v = result.heatmap[y * extent + x];
            if (v != 0.0f)
                ++result.support;
            const bool inside = y >= lo && y <= hi && x >= lo && x <= hi;
            if (!inside)
                result.outer_response += v;
        }
    return result;
}

ErfResult compute_erf(const SuperNet& net, std::size_t input_extent)
{
    // private copy so parameter gradients of `net` are never touched
    SuperNet probe = net;
    probe.params().set_requires_grad(false);
    const auto active = ActiveSet::full(probe.alloc());
    return compute_erf([&](const Var& x) { return probe.features(x, active, ForwardMode::receptive_field()); },
                       static_cast<std::size_t>(probe.geometry().in_channels), input_extent);
}

} // namespace allocnas
