#include "allocnas/supernet.hpp"

#include "allocnas/errors.hpp"
#include "allocnas/ops.hpp"

#include <cmath>
#include <cstdio>

namespace allocnas {

std::string to_string(BlockFamily family)
{
    return family == BlockFamily::BottleneckResidual ? "bottleneck-residual" : "inverted-residual";
}

BlockFamily parse_block_family(const std::string& text)
{
    if (text == "bottleneck" || text == "bottleneck-residual")
        return BlockFamily::BottleneckResidual;
    if (text == "inverted" || text == "inverted-residual" || text == "mobilenetv2")
        return BlockFamily::InvertedResidual;
    throw ContractError("unknown block family '" + text + "'");
}

void BlockKind::validate() const
{
    if (base_width < 4)
        throw ContractError("block kind: base_width must be >= 4");
    if (!(expansion > 0.0))
        throw ContractError("block kind: expansion must be > 0");
}

std::size_t norm_groups(int channels)
{
    if (channels % 4 == 0)
        return 4;
    if (channels % 2 == 0)
        return 2;
    return 1;
}

namespace {

Tensor kaiming(Shape shape, std::size_t fan_in, std::uint64_t seed)
{
    Tensor t(std::move(shape));
    Rng rng(seed);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t.data())
        v = static_cast<float>(rng.normal() * std_dev);
    return t;
}

} // namespace

SuperNet::SuperNet(Allocation alloc, BlockKind kind, int num_classes, std::uint64_t seed, NetGeometry geometry)
    : alloc_(std::move(alloc)), kind_(kind), geometry_(geometry), num_classes_(num_classes)
{
    kind_.validate();
    if (num_classes_ < 2)
        throw ContractError("supernet: need at least 2 classes");
    if (geometry_.in_channels < 1)
        throw ContractError("supernet: need at least one input channel");
    if ((geometry_.input_extent >> alloc_.stages()) < 1)
        throw ContractError("supernet: input extent " + std::to_string(geometry_.input_extent) + " too small for " +
                            std::to_string(alloc_.stages()) + " downsampling stages");

    add_conv_norm("stem", kind_.base_width, geometry_.in_channels, 3, 1.0f, seed);
    for (std::size_t s = 0; s < stages(); ++s) {
        const int width = stage_width(s);
        const int prev = s == 0 ? kind_.base_width : stage_width(s - 1);
        add_conv_norm(transition_prefix(s), width, prev, 2, 1.0f, seed);
        const int hidden = block_hidden_width(s);
        for (int b = 0; b < alloc_[s]; ++b) {
            const auto prefix = block_prefix(s, static_cast<std::size_t>(b));
            if (kind_.family == BlockFamily::BottleneckResidual) {
                add_conv_norm(prefix + ".a", hidden, width, 1, 1.0f, seed);
                add_conv_norm(prefix + ".b", hidden, hidden, 3, 1.0f, seed);
            } else {
                add_conv_norm(prefix + ".a", hidden, width, 1, 1.0f, seed);
                add_conv_norm(prefix + ".b", hidden, 1, 3, 1.0f, seed);
            }
            // residual branch starts as the identity map
            add_conv_norm(prefix + ".c", width, hidden, 1, 0.0f, seed);
        }
    }
    reset_head(num_classes_, seed);
}

int SuperNet::stage_width(std::size_t stage) const { return kind_.base_width << (stage + 1); }

int SuperNet::stage_extent(std::size_t stage) const { return geometry_.input_extent >> (stage + 1); }

int SuperNet::block_hidden_width(std::size_t stage) const
{
    const double w = stage_width(stage);
    const double h = kind_.family == BlockFamily::BottleneckResidual ? w / kind_.expansion : w * kind_.expansion;
    return std::max(1, static_cast<int>(std::lround(h)));
}

std::string SuperNet::block_prefix(std::size_t stage, std::size_t block)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "stage%zu.block%03zu", stage + 1, block);
    return buf;
}

std::string SuperNet::transition_prefix(std::size_t stage) { return "stage" + std::to_string(stage + 1) + ".transition"; }

void SuperNet::add_conv_norm(const std::string& prefix, int out_ch, int in_ch_per_group, int k, float gamma, std::uint64_t seed)
{
    const auto o = static_cast<std::size_t>(out_ch), c = static_cast<std::size_t>(in_ch_per_group), kk = static_cast<std::size_t>(k);
    params_.add(prefix + ".w", kaiming({o, c, kk, kk}, c * kk * kk, derive_seed(seed, prefix + ".w")));
    params_.add(prefix + ".gamma", Tensor({o}, gamma));
    params_.add(prefix + ".beta", Tensor({o}, 0.0f));
}

void SuperNet::reset_head(int num_classes, std::uint64_t seed)
{
    if (num_classes < 2)
        throw ContractError("supernet: need at least 2 classes");
    num_classes_ = num_classes;
    params_.erase("head.fc.w");
    params_.erase("head.fc.b");
    const auto features = static_cast<std::size_t>(stage_width(stages() - 1));
    const auto k = static_cast<std::size_t>(num_classes);
    Tensor w({k, features});
    Rng rng(derive_seed(seed, "head.fc.w"));
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(features));
    for (auto& v : w.data())
        v = static_cast<float>(rng.normal() * std_dev);
    params_.add("head.fc.w", std::move(w));
    params_.add("head.fc.b", Tensor({k}, 0.0f));
}

Var SuperNet::conv_norm(const Var& x, const std::string& prefix, std::size_t stride, std::size_t pad, std::size_t groups,
                        ForwardMode mode) const
{
    const Var& w = params_.at(prefix + ".w");
    auto y = conv2d(x, w, Conv2dOptions{stride, pad, groups});
    const auto channels = static_cast<int>(w.value().dim(0));
    return group_norm(y, params_.at(prefix + ".gamma"), params_.at(prefix + ".beta"),
                      GroupNormOptions{norm_groups(channels), 1e-5f, mode.detach_norm_stats});
}

namespace {
Var rectify(const Var& x, ForwardMode mode) { return mode.bypass_relu ? x : relu(x); }
} // namespace

Var SuperNet::block(const Var& x, std::size_t stage, std::size_t index, ForwardMode mode) const
{
    const auto prefix = block_prefix(stage, index);
    if (kind_.family == BlockFamily::BottleneckResidual) {
        auto h = rectify(conv_norm(x, prefix + ".a", 1, 0, 1, mode), mode);
        h = rectify(conv_norm(h, prefix + ".b", 1, 1, 1, mode), mode);
        h = conv_norm(h, prefix + ".c", 1, 0, 1, mode);
        return rectify(add(x, h), mode);
    }
    const auto hidden = static_cast<std::size_t>(block_hidden_width(stage));
    auto h = rectify(conv_norm(x, prefix + ".a", 1, 0, 1, mode), mode);
    h = rectify(conv_norm(h, prefix + ".b", 1, 1, hidden, mode), mode);
    h = conv_norm(h, prefix + ".c", 1, 0, 1, mode);
    return add(x, h);
}

Var SuperNet::features(const Var& input, const ActiveSet& active, ForwardMode mode) const
{
    active.validate_against(alloc_);
    const auto& shape = input.shape();
    if (shape.size() != 4 || shape[1] != static_cast<std::size_t>(geometry_.in_channels))
        throw DimensionError("supernet: expected input [N," + std::to_string(geometry_.in_channels) + ",H,W], got " +
                             shape_to_string(shape));
    auto x = rectify(conv_norm(input, "stem", 1, 1, 1, mode), mode);
    for (std::size_t s = 0; s < stages(); ++s) {
        x = rectify(conv_norm(x, transition_prefix(s), 2, 0, 1, mode), mode);
        for (int b = 0; b < active.keep[s]; ++b)
            x = block(x, s, static_cast<std::size_t>(b), mode);
    }
    return x;
}

Var SuperNet::classify(const Var& features) const
{
    return linear(global_avg_pool(features), params_.at("head.fc.w"), params_.at("head.fc.b"));
}

Var SuperNet::forward(const Var& input, const ActiveSet& active, ForwardMode mode) const
{
    return classify(features(input, active, mode));
}

SuperNet build_supernet(const Allocation& alloc, const BlockKind& kind, int num_classes, std::uint64_t seed, NetGeometry geometry)
{
    return SuperNet(alloc, kind, num_classes, seed, geometry);
}

ActiveSet sample_active_set(const Allocation& alloc, Rng& rng)
{
    ActiveSet active;
    active.keep.reserve(alloc.stages());
    for (std::size_t i = 0; i < alloc.stages(); ++i)
        active.keep.push_back(static_cast<int>(rng.uniform_int(1, alloc[i])));
    return active;
}

Var forward_masked(const SuperNet& net, const ActiveSet& active, const Var& batch) { return net.forward(batch, active); }

SuperNet inherit_weights(const SuperNet& net, const Allocation& child_alloc)
{
    if (!child_alloc.fits_within(net.alloc()))
        throw ContractError("child allocation " + child_alloc.to_string() + " exceeds super-network " + net.alloc().to_string());
    SuperNet child(child_alloc, net.kind(), net.num_classes(), 0, net.geometry());
    for (auto& [name, var] : child.params()) {
        const Var& src = net.params().at(name);
        if (src.shape() != var.shape())
            throw DimensionError("inherit_weights: shape mismatch for " + name);
        var.mutable_value() = src.value();
    }
    return child;
}

} // namespace allocnas
