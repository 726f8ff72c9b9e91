#include "allocnas/errors.hpp"
#include "allocnas/ops.hpp"
#include "allocnas/supernet.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace allocnas;
using allocnas::testing::random_tensor;

namespace {

const BlockKind kDesk{BlockFamily::BottleneckResidual, 8, 4.0};

/// Independent forward of a bottleneck network restricted to `keep`, written
/// directly against the parameter names.
Var reference_forward(const ParameterStore& p, const std::vector<int>& keep, const Var& x)
{
    auto conv_norm = [&](const Var& in, const std::string& prefix, std::size_t stride, std::size_t pad) {
        const Var& w = p.at(prefix + ".w");
        auto y = conv2d(in, w, Conv2dOptions{stride, pad, 1});
        return group_norm(y, p.at(prefix + ".gamma"), p.at(prefix + ".beta"),
                          {.groups = norm_groups(static_cast<int>(w.value().dim(0)))});
    };
    auto h = relu(conv_norm(x, "stem", 1, 1));
    for (std::size_t s = 0; s < keep.size(); ++s) {
        h = relu(conv_norm(h, "stage" + std::to_string(s + 1) + ".transition", 2, 0));
        for (int b = 0; b < keep[s]; ++b) {
            const auto prefix = SuperNet::block_prefix(s, static_cast<std::size_t>(b));
            auto r = relu(conv_norm(h, prefix + ".a", 1, 0));
            r = relu(conv_norm(r, prefix + ".b", 1, 1));
            r = conv_norm(r, prefix + ".c", 1, 0);
            h = relu(add(h, r));
        }
    }
    return linear(global_avg_pool(h), p.at("head.fc.w"), p.at("head.fc.b"));
}

/// Residual gammas start at zero; give them values so every block matters.
void perturb(SuperNet& net, std::uint64_t seed)
{
    Rng rng(seed);
    for (auto& [name, var] : net.params())
        for (auto& v : var.mutable_value().data())
            v += static_cast<float>(rng.uniform(-0.2, 0.2));
}

} // namespace

TEST(SuperNet, DeepAllocationHasSixtyEightBlocks)
{
    Allocation a({8, 10, 36, 14});
    EXPECT_EQ(a.total(), 68);
    SuperNet net(a, BlockKind{BlockFamily::BottleneckResidual, 4, 4.0}, 10, 1, {1, 16});
    std::set<std::string> blocks;
    for (const auto& name : net.params().names())
        if (name.find(".block") != std::string::npos)
            blocks.insert(name.substr(0, name.find('.', name.find(".block") + 1)));
    EXPECT_EQ(blocks.size(), 68u);
}

TEST(SuperNet, MinimalNetworkRuns)
{
    auto net = build_supernet(Allocation::minimal(4), kDesk, 5, 3, {1, 16});
    auto y = net.forward(Var(Tensor({2, 1, 16, 16}, 0.5f)));
    EXPECT_EQ(y.shape(), Shape({2, 5}));
    EXPECT_TRUE(y.value().all_finite());
}

TEST(SuperNet, StageGeometry)
{
    auto net = build_supernet(Allocation({1, 1, 1, 1}), kDesk, 5, 3, {1, 32});
    for (std::size_t s = 0; s < 4; ++s) {
        EXPECT_EQ(net.stage_width(s), 16 << s);
        EXPECT_EQ(net.stage_extent(s), 16 >> s);
    }
    auto f = net.features(Var(Tensor({1, 1, 32, 32}, 0.1f)), ActiveSet::full(net.alloc()));
    EXPECT_EQ(f.shape(), Shape({1, 128, 2, 2}));
}

TEST(SuperNet, SameSeedSameParameters)
{
    auto a = build_supernet(Allocation({2, 2}), kDesk, 3, 42, {1, 8});
    auto b = build_supernet(Allocation({2, 2}), kDesk, 3, 42, {1, 8});
    auto c = build_supernet(Allocation({2, 2}), kDesk, 3, 43, {1, 8});
    EXPECT_EQ(a.params().checksum(), b.params().checksum());
    EXPECT_NE(a.params().checksum(), c.params().checksum());
}

TEST(SuperNet, InvalidConstruction)
{
    EXPECT_THROW(build_supernet(Allocation({1, 1}), kDesk, 1, 1, {1, 8}), ContractError);
    EXPECT_THROW(build_supernet(Allocation({1, 1, 1, 1}), kDesk, 2, 1, {1, 8}), ContractError);
    EXPECT_THROW(build_supernet(Allocation({1}), BlockKind{BlockFamily::BottleneckResidual, 2, 4.0}, 2, 1, {1, 8}),
                 ContractError);
}

TEST(SampleActiveSet, ChiSquareAndMean)
{
    const Allocation alloc({4, 3, 6, 2});
    Rng rng(2024);
    std::vector<std::vector<int>> counts(4);
    for (std::size_t s = 0; s < 4; ++s)
        counts[s].assign(static_cast<std::size_t>(alloc[s]), 0);
    constexpr int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        auto a = sample_active_set(alloc, rng);
        a.validate_against(alloc);
        for (std::size_t s = 0; s < 4; ++s)
            ++counts[s][static_cast<std::size_t>(a.keep[s] - 1)];
    }
    // chi-square critical values at significance 0.001 for 1, 2, 3, 5 dof
    const std::map<int, double> critical = {{1, 10.828}, {2, 13.816}, {3, 16.266}, {5, 20.515}};
    for (std::size_t s = 0; s < 4; ++s) {
        const int n = alloc[s];
        const double expected = static_cast<double>(draws) / n;
        double chi = 0.0, mean = 0.0;
        for (int k = 0; k < n; ++k) {
            chi += std::pow(counts[s][static_cast<std::size_t>(k)] - expected, 2) / expected;
            mean += (k + 1.0) * counts[s][static_cast<std::size_t>(k)];
        }
        mean /= draws;
        EXPECT_LT(chi, critical.at(n - 1)) << "stage " << s;
        EXPECT_NEAR(mean, (n + 1) / 2.0, 0.02 * (n + 1) / 2.0) << "stage " << s;
    }
}

TEST(SampleActiveSet, BlockCoverageMatchesBinomial)
{
    const Allocation alloc({4, 5});
    Rng rng(7);
    constexpr int T = 10000;
    std::vector<std::vector<int>> active(2, std::vector<int>(5, 0));
    for (int t = 0; t < T; ++t) {
        auto a = sample_active_set(alloc, rng);
        for (std::size_t s = 0; s < 2; ++s)
            for (int j = 0; j < a.keep[s]; ++j)
                ++active[s][static_cast<std::size_t>(j)];
    }
    for (std::size_t s = 0; s < 2; ++s) {
        const int n = alloc[s];
        for (int j = 1; j <= n; ++j) {
            const double p = static_cast<double>(n - j + 1) / n;
            const double sigma = std::sqrt(T * p * (1 - p));
            EXPECT_LE(std::fabs(active[s][static_cast<std::size_t>(j - 1)] - T * p), 3 * sigma + 1e-9);
        }
    }
}

TEST(ForwardMasked, FullSetEqualsUnmasked)
{
    auto net = build_supernet(Allocation({2, 3, 1, 2}), kDesk, 4, 5, {1, 16});
    perturb(net, 1);
    Rng rng(8);
    Var x(random_tensor({3, 1, 16, 16}, rng, 0.0, 1.0));
    EXPECT_EQ(forward_masked(net, ActiveSet::full(net.alloc()), x).value(), net.forward(x).value());
}

TEST(ForwardMasked, MatchesIndependentRebuild)
{
    auto net = build_supernet(Allocation({3, 2, 3, 2}), kDesk, 4, 11, {1, 16});
    perturb(net, 2);
    Rng rng(12);
    Var x(random_tensor({2, 1, 16, 16}, rng, 0.0, 1.0));
    for (int t = 0; t < 10; ++t) {
        auto active = sample_active_set(net.alloc(), rng);
        auto got = forward_masked(net, active, x).value();
        auto want = reference_forward(net.params(), active.keep, x).value();
        EXPECT_LE(max_abs_diff(got, want), 1e-6);
    }
}

TEST(ForwardMasked, DroppedBlocksGetZeroGradient)
{
    auto net = build_supernet(Allocation({3, 2, 2, 3}), kDesk, 4, 5, {1, 16});
    perturb(net, 3);
    Rng rng(4);
    Var x(random_tensor({2, 1, 16, 16}, rng, 0.0, 1.0));
    std::vector<int> labels = {0, 3};
    backward(cross_entropy(forward_masked(net, ActiveSet{{1, 1, 1, 1}}, x), labels), net.params());
    for (auto& [name, var] : net.params()) {
        const bool dropped = name.find(".block000") == std::string::npos && name.find(".block") != std::string::npos;
        double norm = 0.0;
        for (float g : var.grad().data())
            norm += std::fabs(g);
        if (dropped) {
            EXPECT_EQ(norm, 0.0) << name;
        } else if (name.find(".w") != std::string::npos) {
            EXPECT_GT(norm, 0.0) << name;
        }
    }
}

TEST(ForwardMasked, OversizedActiveSet)
{
    auto net = build_supernet(Allocation({2, 2}), kDesk, 3, 1, {1, 8});
    EXPECT_THROW(forward_masked(net, ActiveSet{{3, 1}}, Var(Tensor({1, 1, 8, 8}))), ContractError);
}

TEST(Inherit, PrefixSubsetOfParameters)
{
    auto net = build_supernet(Allocation({3, 3}), kDesk, 3, 1, {1, 8});
    auto small = inherit_weights(net, Allocation({1, 2})).params().names();
    auto large = inherit_weights(net, Allocation({2, 3})).params().names();
    for (const auto& n : small)
        EXPECT_NE(std::find(large.begin(), large.end(), n), large.end()) << n;
}

TEST(Inherit, FullChildIsBitIdentical)
{
    auto net = build_supernet(Allocation({2, 2, 2, 2}), kDesk, 4, 9, {1, 16});
    perturb(net, 4);
    auto child = inherit_weights(net, net.alloc());
    Rng rng(1);
    Var x(random_tensor({2, 1, 16, 16}, rng, 0.0, 1.0));
    EXPECT_EQ(child.forward(x).value(), net.forward(x).value());
    EXPECT_EQ(child.params().checksum(), net.params().checksum());
}

TEST(Inherit, ChildEqualsMaskedSupernet)
{
    auto net = build_supernet(Allocation({8, 10, 36, 14}), BlockKind{BlockFamily::BottleneckResidual, 4, 4.0}, 6, 21, {1, 16});
    perturb(net, 5);
    Rng rng(2);
    Var x(random_tensor({2, 1, 16, 16}, rng, 0.0, 1.0));
    const Allocation child_alloc({1, 3, 7, 5});
    auto child = inherit_weights(net, child_alloc);
    EXPECT_EQ(max_abs_diff(child.forward(x).value(), forward_masked(net, ActiveSet{child_alloc.counts()}, x).value()), 0.0);
    EXPECT_THROW(inherit_weights(net, Allocation({9, 1, 1, 1})), ContractError);
}

TEST(Inherit, InvertedFamily)
{
    auto net = build_supernet(Allocation({3, 2, 2}), BlockKind{BlockFamily::InvertedResidual, 8, 2.0}, 4, 2, {1, 16});
    perturb(net, 6);
    Rng rng(3);
    Var x(random_tensor({2, 1, 16, 16}, rng, 0.0, 1.0));
    auto child = inherit_weights(net, Allocation({2, 1, 2}));
    EXPECT_LE(max_abs_diff(child.forward(x).value(), forward_masked(net, ActiveSet{{2, 1, 2}}, x).value()), 1e-6);
}

TEST(SuperNet, CopyDoesNotAlias)
{
    auto net = build_supernet(Allocation({1, 1}), kDesk, 3, 1, {1, 8});
    auto copy = net;
    copy.params().at("stem.w").mutable_value()[0] += 1.0f;
    EXPECT_NE(copy.params().checksum(), net.params().checksum());
}

TEST(SuperNet, ResetHead)
{
    auto net = build_supernet(Allocation({1, 1}), kDesk, 3, 1, {1, 8});
    net.reset_head(7, 2);
    EXPECT_EQ(net.num_classes(), 7);
    EXPECT_EQ(net.params().at("head.fc.w").shape(), Shape({7, 32}));
    EXPECT_THROW(net.reset_head(1, 2), ContractError);
}
