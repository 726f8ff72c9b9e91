#pragma once

#include "allocnas/allocation.hpp"
#include "allocnas/supernet.hpp"

#include <string>
#include <vector>

namespace allocnas {

/// Static multiply-accumulate counts for one network family.
///
/// Convention: 1 FLOP = 1 MAC; only convolutions and fully connected layers
/// are counted. The allocation of a stage counts its first (downsampling)
/// block, so
///   model = stem + head + sum_i [transition_i + (N_i - 1) * block_i].
struct CostSpec {
    std::string name;
    BlockFamily family = BlockFamily::BottleneckResidual;
    int input_extent = 224;
    double stem = 0.0;
    /// First block of each stage.
    std::vector<double> transition;
    /// Every further, shape-preserving block of each stage.
    std::vector<double> block;
    double head = 0.0;

    std::size_t stages() const noexcept { return block.size(); }
    void validate() const;
};

/// ResNet bottleneck family (v1.5: stride on the 3x3), stages [64,128,256,512]
/// wide at extents input/4 .. input/32, 1000-way classifier.
CostSpec resnet_bottleneck_spec(int input_extent = 224, int num_classes = 1000);

/// MobileNetV2 blocks (expansion 6) for the five searchable stages with
/// 24, 32, 64, 96, 160 channels. The stem holds the first convolution and
/// the t=1 block; the head holds the 320-channel block, the 1x1 conv to
/// 1280 and the classifier.
CostSpec mobilenetv2_spec(int input_extent = 224, int num_classes = 1000);

/// Closed-form cost of the in-repo super-network for a given layout; the
/// stage transition counts as the first block of its stage.
CostSpec desk_spec(const BlockKind& kind, const NetGeometry& geometry, std::size_t stages, int num_classes);

/// Looks up "bottleneck"/"resnet" or "inverted"/"mobilenetv2".
CostSpec spec_for_family(const std::string& family, int input_extent);

/// MACs of one searchable block of stage `stage_index` (1-based).
double block_flops(const CostSpec& spec, std::size_t stage_index);

double model_flops(const Allocation& alloc, const CostSpec& spec);

struct FlopsBreakdown {
    double stem = 0.0;
    std::vector<double> stages;
    double head = 0.0;
    double total = 0.0;
};

FlopsBreakdown flops_breakdown(const Allocation& alloc, const CostSpec& spec);

/// w_i = block_flops(i) / min_j block_flops(j).
std::vector<double> derive_weights(const CostSpec& spec);

} // namespace allocnas
