#include "allocnas/config.hpp"
#include "allocnas/errors.hpp"

#include <gtest/gtest.h>

using namespace allocnas;

TEST(Config, MinimalNeedsSeed)
{
    EXPECT_THROW(parse_config("[run]\nout = \"x\"\n"), ConfigError);
    auto c = parse_config("[run]\nseed = 7\n");
    EXPECT_EQ(c.transfer.seed, 7u);
}

TEST(Config, OverridesDefaults)
{
    auto c = parse_config(R"(
[run]
seed = 3
out = "runs/a"
preset = "stage-biased"
[source]
samples = 6000
rotation = [-10, 10]
[supernet]
alloc = "3,3,3,3"
family = "inverted"
expansion = 2.0
[search]
budget = 6
random_allocations = 2
baseline = false
[schedule.child_target]
epochs = 4
lr_drop_epochs = [2, 3]
[sweep]
allocations = ["2,2,1,1", "1,1,2,2"]
seeds = [1, 2]
)");
    EXPECT_EQ(c.out_dir, "runs/a");
    EXPECT_EQ(c.transfer.source.n_samples, 6000u);
    EXPECT_EQ(c.transfer.source.rotation_min, -10.0);
    EXPECT_EQ(c.transfer.super_alloc, Allocation({3, 3, 3, 3}));
    EXPECT_EQ(c.transfer.kind.family, BlockFamily::InvertedResidual);
    EXPECT_EQ(c.transfer.budget, 6.0);
    EXPECT_FALSE(c.transfer.run_baseline);
    EXPECT_EQ(c.transfer.child_target.epochs, 4u);
    EXPECT_EQ(c.transfer.child_target.lr_drop_epochs, (std::vector<std::size_t>{2, 3}));
    EXPECT_EQ(c.sweep_allocations.size(), 2u);
    EXPECT_EQ(c.sweep_seeds, (std::vector<std::uint64_t>{1, 2}));
}

TEST(Config, Rejections)
{
    EXPECT_THROW(parse_config("[run]\nseed = 1\nbogus = 2\n"), ConfigError);
    EXPECT_THROW(parse_config("[run]\nseed = 1\n[search]\nweights = \"cubic\"\n"), ConfigError);
    EXPECT_THROW(parse_config("[run]\nseed = 1\n[source]\nsamples = \"many\"\n"), ConfigError);
    EXPECT_THROW(parse_config("[run]\nseed = 1\n[supernet]\nalloc = \"3,x\"\n"), ConfigError);
    EXPECT_THROW(parse_config("[run]\nseed = 1\n[target]\nkind = \"idx-file\"\nimages = \"/nope/i\"\nlabels = \"/nope/l\"\n"),
                 ConfigError);
    EXPECT_THROW(parse_config("[run]\nseed = 1\npreset = \"unknown\"\n"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.toml"), ConfigError);
}

TEST(Config, HashIsStableAndSensitive)
{
    auto a = parse_config("[run]\nseed = 1\n");
    auto b = parse_config("# same settings\n[run]\nseed = 1\n");
    auto c = parse_config("[run]\nseed = 2\n");
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_NE(a.hash(), c.hash());
    EXPECT_EQ(a.hash().size(), 64u);
    EXPECT_EQ(default_config().canonical_json(), default_config().canonical_json());
}

TEST(Config, DeskSchedules)
{
    for (const char* phase : {"supernet_source", "supernet_target", "child_source", "child_target"})
        EXPECT_NO_THROW(desk_schedule(phase).validate()) << phase;
    EXPECT_THROW(desk_schedule("nope"), ConfigError);
}
