#pragma once

#include "allocnas/allocation.hpp"
#include "allocnas/params.hpp"
#include "allocnas/rng.hpp"

#include <cstdint>
#include <string>

namespace allocnas {

enum class BlockFamily { BottleneckResidual, InvertedResidual };

std::string to_string(BlockFamily family);
/// Accepts "bottleneck", "bottleneck-residual", "inverted", "inverted-residual".
BlockFamily parse_block_family(const std::string& text);

/// Block design for the searchable blocks.
///  - bottleneck-residual: 1x1 reduce to width/expansion, 3x3, 1x1 expand, identity add, ReLU.
///  - inverted-residual: 1x1 expand to width*expansion, 3x3 depthwise, 1x1 project, identity add.
struct BlockKind {
    BlockFamily family = BlockFamily::BottleneckResidual;
    int base_width = 16; // stem width; stage i has base_width * 2^i channels (1-based i)
    double expansion = 4.0;

    void validate() const;
    friend bool operator==(const BlockKind&, const BlockKind&) = default;
};

struct NetGeometry {
    int in_channels = 1;
    int input_extent = 32;
    friend bool operator==(const NetGeometry&, const NetGeometry&) = default;
};

struct ForwardMode {
    /// Rectifiers act as identity.
    bool bypass_relu = false;
    /// Normalization statistics are constants for the backward pass.
    bool detach_norm_stats = false;

    static ForwardMode receptive_field() { return {true, true}; }
};

/// Single-path super-network: stem, then per stage a downsampling transition
/// (2x2 stride-2 conv, channels doubled) followed by N_i shape-preserving
/// blocks, then global pooling and a linear head. Any per-stage prefix of
/// blocks is a valid network.
class SuperNet {
public:
    SuperNet(Allocation alloc, BlockKind kind, int num_classes, std::uint64_t seed, NetGeometry geometry = {});

    const Allocation& alloc() const noexcept { return alloc_; }
    const BlockKind& kind() const noexcept { return kind_; }
    const NetGeometry& geometry() const noexcept { return geometry_; }
    int num_classes() const noexcept { return num_classes_; }
    std::size_t stages() const noexcept { return alloc_.stages(); }

    ParameterStore& params() noexcept { return params_; }
    const ParameterStore& params() const noexcept { return params_; }

    /// Channels and spatial extent inside stage `stage` (0-based).
    int stage_width(std::size_t stage) const;
    int stage_extent(std::size_t stage) const;
    int block_hidden_width(std::size_t stage) const;

    /// Parameter-name prefix of block `block` (0-based) in stage `stage`.
    static std::string block_prefix(std::size_t stage, std::size_t block);
    static std::string transition_prefix(std::size_t stage);

    /// Last feature map before pooling, using only the first keep_i blocks of
    /// every stage. Throws ContractError if `active` does not fit.
    Var features(const Var& input, const ActiveSet& active, ForwardMode mode = {}) const;
    /// Logits for the masked network.
    Var forward(const Var& input, const ActiveSet& active, ForwardMode mode = {}) const;
    /// Logits for the full allocation.
    Var forward(const Var& input) const { return forward(input, ActiveSet::full(alloc_)); }
    Var classify(const Var& features) const;

    /// Fresh classifier head for a new label space.
    void reset_head(int num_classes, std::uint64_t seed);

private:
    Var block(const Var& x, std::size_t stage, std::size_t index, ForwardMode mode) const;
    Var conv_norm(const Var& x, const std::string& prefix, std::size_t stride, std::size_t pad, std::size_t groups, ForwardMode mode) const;
    void add_conv_norm(const std::string& prefix, int out_ch, int in_ch_per_group, int k, float gamma, std::uint64_t seed);

    Allocation alloc_;
    BlockKind kind_;
    NetGeometry geometry_;
    int num_classes_;
    ParameterStore params_;
};

SuperNet build_supernet(const Allocation& alloc, const BlockKind& kind, int num_classes, std::uint64_t seed,
                        NetGeometry geometry = {});

/// keep_i drawn independently and uniformly from {1..N_i}.
ActiveSet sample_active_set(const Allocation& alloc, Rng& rng);

Var forward_masked(const SuperNet& net, const ActiveSet& active, const Var& batch);

/// Child network holding copies of the stem, transitions, head and the
/// first child_i blocks of every stage. Throws ContractError if the child
/// exceeds the super-network in any stage.
SuperNet inherit_weights(const SuperNet& net, const Allocation& child_alloc);

/// Group count used by every normalization over `channels` channels.
std::size_t norm_groups(int channels);

} // namespace allocnas
