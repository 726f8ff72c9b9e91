#include "allocnas/errors.hpp"
#include "allocnas/ops.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace allocnas;
using allocnas::testing::random_tensor;

TEST(Conv2d, AllOnesCenterIsNine)
{
    Var x(Tensor({1, 1, 3, 3}, 1.0f));
    Var k(Tensor({1, 1, 3, 3}, 1.0f));
    auto y = conv2d(x, k, 1, 1);
    EXPECT_EQ(y.shape(), Shape({1, 1, 3, 3}));
    EXPECT_EQ(y.value().at(0, 0, 1, 1), 9.0f);
    EXPECT_EQ(y.value().at(0, 0, 0, 0), 4.0f);
}

TEST(Conv2d, IdentityPointwiseKernel)
{
    Rng rng(1);
    auto x = random_tensor({2, 1, 5, 5}, rng);
    auto y = conv2d(Var(x), Var(Tensor({1, 1, 1, 1}, 1.0f)));
    EXPECT_EQ(y.value(), x);
}

TEST(Conv2d, OutputExtent)
{
    Var x(Tensor({1, 2, 7, 9}, 1.0f));
    Var k(Tensor({4, 2, 3, 3}, 1.0f));
    auto y = conv2d(x, k, 2, 1);
    // floor((7 + 2 - 3) / 2) + 1 = 4, floor((9 + 2 - 3) / 2) + 1 = 5
    EXPECT_EQ(y.shape(), Shape({1, 4, 4, 5}));
}

TEST(Conv2d, MatchesDirectLoops)
{
    Rng rng(5);
    auto x = random_tensor({2, 4, 6, 6}, rng);
    auto w = random_tensor({6, 2, 3, 3}, rng);
    const std::size_t stride = 2, pad = 1, groups = 2;
    auto y = conv2d(Var(x), Var(w), Conv2dOptions{stride, pad, groups}).value();
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t o = 0; o < 6; ++o)
            for (std::size_t oh = 0; oh < 3; ++oh)
                for (std::size_t ow = 0; ow < 3; ++ow) {
                    const std::size_t g = o / 3;
                    double acc = 0.0;
                    for (std::size_t c = 0; c < 2; ++c)
                        for (std::size_t kh = 0; kh < 3; ++kh)
                            for (std::size_t kw = 0; kw < 3; ++kw) {
                                const long ih = static_cast<long>(oh * stride + kh) - static_cast<long>(pad);
                                const long iw = static_cast<long>(ow * stride + kw) - static_cast<long>(pad);
                                if (ih < 0 || iw < 0 || ih >= 6 || iw >= 6)
                                    continue;
                                acc += static_cast<double>(w.at(o, c, kh, kw)) * x.at(n, g * 2 + c, ih, iw);
                            }
                    EXPECT_NEAR(y.at(n, o, oh, ow), acc, 1e-5);
                }
}

TEST(Conv2d, ChannelMismatchIsDimensionError)
{
    Var x(Tensor({1, 3, 5, 5}, 1.0f));
    Var k(Tensor({2, 2, 3, 3}, 1.0f));
    EXPECT_THROW(conv2d(x, k, 1, 1), DimensionError);
    EXPECT_THROW(conv2d(Var(Tensor({3, 5, 5})), k, 1, 1), DimensionError);
    EXPECT_THROW(conv2d(x, Var(Tensor({2, 3, 3, 3})), Conv2dOptions{0, 0, 1}), ContractError);
}

TEST(GroupNorm, NormalizesEachGroup)
{
    Rng rng(9);
    auto x = random_tensor({2, 4, 3, 3}, rng, -3.0, 5.0);
    auto y = group_norm(Var(x), Var(Tensor({4}, 1.0f)), Var(Tensor({4}, 0.0f)), {.groups = 2}).value();
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t g = 0; g < 2; ++g) {
            double mean = 0.0, sq = 0.0;
            for (std::size_t c = 2 * g; c < 2 * g + 2; ++c)
                for (std::size_t i = 0; i < 9; ++i)
                    mean += y[(n * 4 + c) * 9 + i];
            mean /= 18.0;
            for (std::size_t c = 2 * g; c < 2 * g + 2; ++c)
                for (std::size_t i = 0; i < 9; ++i)
                    sq += std::pow(y[(n * 4 + c) * 9 + i] - mean, 2);
            EXPECT_NEAR(mean, 0.0, 1e-6);
            EXPECT_NEAR(sq / 18.0, 1.0, 1e-3);
        }
}

TEST(GroupNorm, BadGroupCount)
{
    Var x(Tensor({1, 6, 2, 2}, 1.0f));
    Var g(Tensor({6}, 1.0f)), b(Tensor({6}, 0.0f));
    EXPECT_THROW(group_norm(x, g, b, {.groups = 4}), DimensionError);
    EXPECT_THROW(group_norm(x, Var(Tensor({5}, 1.0f)), b, {.groups = 3}), DimensionError);
}

TEST(CrossEntropy, UniformLogitsGiveLogK)
{
    for (std::size_t k : {2u, 5u, 10u, 1000u}) {
        Var logits(Tensor({3, k}, 0.25f));
        std::vector<int> labels = {0, 1, 0};
        EXPECT_NEAR(cross_entropy(logits, labels).value()[0], std::log(static_cast<double>(k)), 1e-6);
        EXPECT_NEAR(cross_entropy(logits, labels, 0.1f).value()[0], std::log(static_cast<double>(k)), 1e-6);
    }
}

TEST(CrossEntropy, SmoothingMixesWithUniform)
{
    // logits [0, ln 3]: p = [1/4, 3/4]
    Var logits(Tensor({1, 2}, std::vector<float>{0.0f, static_cast<float>(std::log(3.0))}));
    std::vector<int> label = {1};
    const double plain = -std::log(0.75);
    const double smooth = -(0.95 * std::log(0.75) + 0.05 * std::log(0.25));
    EXPECT_NEAR(cross_entropy(logits, label).value()[0], plain, 1e-6);
    EXPECT_NEAR(cross_entropy(logits, label, 0.1f).value()[0], smooth, 1e-6);
}

TEST(CrossEntropy, LabelOutOfRange)
{
    Var logits(Tensor({1, 3}, 0.0f));
    std::vector<int> label = {3};
    EXPECT_THROW(cross_entropy(logits, label), ContractError);
}

TEST(Pool, GlobalAverage)
{
    Tensor x({1, 2, 2, 2}, std::vector<float>{1, 2, 3, 4, 10, 10, 10, 10});
    auto y = global_avg_pool(Var(x)).value();
    EXPECT_EQ(y.shape(), Shape({1, 2}));
    EXPECT_FLOAT_EQ(y[0], 2.5f);
    EXPECT_FLOAT_EQ(y[1], 10.0f);
}

TEST(Linear, HandComputed)
{
    Tensor x({1, 2}, std::vector<float>{1, 2});
    Tensor w({2, 2}, std::vector<float>{1, 0, 3, -1});
    Tensor b({2}, std::vector<float>{0.5f, 0});
    auto y = linear(Var(x), Var(w), Var(b)).value();
    EXPECT_FLOAT_EQ(y[0], 1.5f);
    EXPECT_FLOAT_EQ(y[1], 1.0f);
}

TEST(Ops, ForwardIsBitDeterministic)
{
    Rng rng(77);
    auto x = random_tensor({4, 3, 8, 8}, rng);
    auto w = random_tensor({5, 3, 3, 3}, rng);
    auto a = relu(conv2d(Var(x), Var(w), 1, 1)).value();
    auto b = relu(conv2d(Var(x), Var(w), 1, 1)).value();
    EXPECT_EQ(a, b);
}
