#include "allocnas/cost_model.hpp"

#include "allocnas/errors.hpp"

#include <algorithm>
#include <cmath>

namespace allocnas {

namespace {

double conv_macs(double out_extent, double in_ch, double out_ch, double k, double groups = 1.0)
{
    return out_extent * out_extent * (in_ch / groups) * out_ch * k * k;
}

int conv_out(int extent, int k, int stride, int pad) { return (extent + 2 * pad - k) / stride + 1; }

// expand 1x1 at the input extent, 3x3 depthwise (may stride), project 1x1
double inverted_block(int in_extent, int out_extent, double in_ch, double out_ch, double t)
{
    const double hidden = in_ch * t;
    double macs = 0.0;
    if (t != 1.0)
        macs += conv_macs(in_extent, in_ch, hidden, 1);
    macs += conv_macs(out_extent, hidden, hidden, 3, hidden);
    macs += conv_macs(out_extent, hidden, out_ch, 1);
    return macs;
}

} // namespace

void CostSpec::validate() const
{
    if (block.empty() || transition.size() != block.size())
        throw ContractError("cost spec '" + name + "' has mismatched stage tables");
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(stem) || !positive(head) || !std::all_of(block.begin(), block.end(), positive) ||
        !std::all_of(transition.begin(), transition.end(), positive))
        throw ContractError("cost spec '" + name + "' has a non-positive cost");
}

CostSpec resnet_bottleneck_spec(int input_extent, int num_classes)
{
    CostSpec spec;
    spec.name = "resnet-bottleneck";
    spec.family = BlockFamily::BottleneckResidual;
    spec.input_extent = input_extent;
    const int e1 = conv_out(input_extent, 7, 2, 3);
    spec.stem = conv_macs(e1, 3, 64, 7);
    int extent = conv_out(e1, 3, 2, 1); // max pool
    double in_ch = 64;
    for (int s = 0; s < 4; ++s) {
        const double w = 64 << s;
        const int stride = s == 0 ? 1 : 2;
        const int out = conv_out(extent, 3, stride, 1);
        double t = conv_macs(extent, in_ch, w, 1) + conv_macs(out, w, w, 3) + conv_macs(out, w, 4 * w, 1);
        t += conv_macs(out, in_ch, 4 * w, 1); // projection shortcut
        spec.transition.push_back(t);
        spec.block.push_back(conv_macs(out, 4 * w, w, 1) + conv_macs(out, w, w, 3) + conv_macs(out, w, 4 * w, 1));
        extent = out;
        in_ch = 4 * w;
    }
    spec.head = in_ch * num_classes;
    return spec;
}

CostSpec mobilenetv2_spec(int input_extent, int num_classes)
{
    CostSpec spec;
    spec.name = "mobilenetv2";
    spec.family = BlockFamily::InvertedResidual;
    spec.input_extent = input_extent;
    int extent = conv_out(input_extent, 3, 2, 1);
    spec.stem = conv_macs(extent, 3, 32, 3) + inverted_block(extent, extent, 32, 16, 1.0);
    const double widths[5] = {24, 32, 64, 96, 160};
    const int strides[5] = {2, 2, 2, 1, 2};
    double in_ch = 16;
    for (int s = 0; s < 5; ++s) {
        const int out = conv_out(extent, 3, strides[s], 1);
        spec.transition.push_back(inverted_block(extent, out, in_ch, widths[s], 6.0));
        spec.block.push_back(inverted_block(out, out, widths[s], widths[s], 6.0));
        extent = out;
        in_ch = widths[s];
    }
    spec.head = inverted_block(extent, extent, in_ch, 320, 6.0) + conv_macs(extent, 320, 1280, 1) + 1280.0 * num_classes;
    return spec;
}

CostSpec desk_spec(const BlockKind& kind, const NetGeometry& geometry, std::size_t stages, int num_classes)
{
    kind.validate();
    // A throwaway single-block network supplies the exact widths and extents.
    const SuperNet probe(Allocation::minimal(stages), kind, std::max(num_classes, 2), 0, geometry);
    CostSpec spec;
    spec.name = "desk-" + to_string(kind.family);
    spec.family = kind.family;
    spec.input_extent = geometry.input_extent;
    const double base = kind.base_width;
    spec.stem = conv_macs(geometry.input_extent, geometry.in_channels, base, 3);
    double in_ch = base;
    for (std::size_t s = 0; s < stages; ++s) {
        const double w = probe.stage_width(s);
        const double e = probe.stage_extent(s);
        const double h = probe.block_hidden_width(s);
        double block = 0.0;
        if (kind.family == BlockFamily::BottleneckResidual)
            block = conv_macs(e, w, h, 1) + conv_macs(e, h, h, 3) + conv_macs(e, h, w, 1);
        else
            block = conv_macs(e, w, h, 1) + conv_macs(e, h, h, 3, h) + conv_macs(e, h, w, 1);
        spec.block.push_back(block);
        spec.transition.push_back(conv_macs(e, in_ch, w, 2) + block);
        in_ch = w;
    }
    spec.head = in_ch * num_classes;
    return spec;
}

CostSpec spec_for_family(const std::string& family, int input_extent)
{
    if (family == "bottleneck" || family == "bottleneck-residual" || family == "resnet")
        return resnet_bottleneck_spec(input_extent);
    if (family == "inverted" || family == "inverted-residual" || family == "mobilenetv2")
        return mobilenetv2_spec(input_extent);
    throw ConfigError("unknown block family '" + family + "'");
}

double block_flops(const CostSpec& spec, std::size_t stage_index)
{
    if (stage_index < 1 || stage_index > spec.stages())
        throw ContractError("block_flops: stage " + std::to_string(stage_index) + " out of range 1.." +
                            std::to_string(spec.stages()));
    return spec.block[stage_index - 1];
}

FlopsBreakdown flops_breakdown(const Allocation& alloc, const CostSpec& spec)
{
    spec.validate();
    if (alloc.stages() != spec.stages())
        throw ContractError("allocation " + alloc.to_string() + " does not match the " + std::to_string(spec.stages()) +
                            "-stage cost spec '" + spec.name + "'");
    FlopsBreakdown out;
    out.stem = spec.stem;
    out.head = spec.head;
    out.total = spec.stem;
    for (std::size_t i = 0; i < alloc.stages(); ++i) {
        const double stage = spec.transition[i] + (alloc[i] - 1) * spec.block[i];
        out.stages.push_back(stage);
        out.total += stage;
    }
    out.total += spec.head;
    return out;
}

double model_flops(const Allocation& alloc, const CostSpec& spec) { return flops_breakdown(alloc, spec).total; }

std::vector<double> derive_weights(const CostSpec& spec)
{
    spec.validate();
    const double lo = *std::min_element(spec.block.begin(), spec.block.end());
    std::vector<double> w;
    for (double b : spec.block)
        w.push_back(b / lo);
    return w;
}

} // namespace allocnas
