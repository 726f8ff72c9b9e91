#include "allocnas/errors.hpp"
#include "allocnas/toml.hpp"

#include <gtest/gtest.h>

using namespace allocnas;

TEST(Toml, ScalarsSectionsAndArrays)
{
    auto t = toml::parse(R"(
top = 1
[run]
seed = 42       # comment
name = "a # b"
ratio = 0.5
neg = -3
flag = true
[schedule.child_target]
epochs = 2
drops = [1, 2, 3]
words = ["x", "y"]
)");
    EXPECT_EQ(std::get<std::int64_t>(t.at("top").data), 1);
    EXPECT_EQ(std::get<std::int64_t>(t.at("run.seed").data), 42);
    EXPECT_EQ(std::get<std::string>(t.at("run.name").data), "a # b");
    EXPECT_DOUBLE_EQ(std::get<double>(t.at("run.ratio").data), 0.5);
    EXPECT_EQ(std::get<std::int64_t>(t.at("run.neg").data), -3);
    EXPECT_TRUE(std::get<bool>(t.at("run.flag").data));
    EXPECT_EQ(std::get<std::int64_t>(t.at("schedule.child_target.epochs").data), 2);
    const auto& drops = std::get<toml::Array>(t.at("schedule.child_target.drops").data);
    ASSERT_EQ(drops.size(), 3u);
    EXPECT_EQ(std::get<std::int64_t>(drops[2].data), 3);
    EXPECT_EQ(t.at("run.seed").line, 4);
    EXPECT_TRUE(t.at("schedule.child_target.words").is_array());
}

TEST(Toml, Errors)
{
    EXPECT_THROW(toml::parse("a = 1\na = 2\n"), ConfigError);
    EXPECT_THROW(toml::parse("[run\nseed = 1\n"), ConfigError);
    EXPECT_THROW(toml::parse("seed = \n"), ConfigError);
    EXPECT_THROW(toml::parse("s = \"open\n"), ConfigError);
    EXPECT_THROW(toml::parse("just words\n"), ConfigError);
    try {
        toml::parse("ok = 1\n\nbad = [1, 2\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find('3'), std::string::npos) << e.what();
    }
}
