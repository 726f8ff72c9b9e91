#include "allocnas/allocation.hpp"
#include "allocnas/errors.hpp"

#include <gtest/gtest.h>

using namespace allocnas;

TEST(Allocation, ParseAndPrint)
{
    EXPECT_EQ(Allocation::parse("3,4,6,3"), Allocation({3, 4, 6, 3}));
    EXPECT_EQ(Allocation::parse("1-3-7-5").to_string(), "1-3-7-5");
    EXPECT_EQ(Allocation::parse(" 2 , 2 ").total(), 4);
    EXPECT_THROW(Allocation::parse(""), ContractError);
    EXPECT_THROW(Allocation::parse("3,x"), ContractError);
    EXPECT_THROW(Allocation::parse("3,0,1"), ContractError);
}

TEST(Allocation, ZeroBlocksRejected)
{
    EXPECT_THROW(Allocation({2, 0}), ContractError);
    EXPECT_THROW(Allocation(std::vector<int>{}), ContractError);
}

TEST(Allocation, IncrementAndFit)
{
    Allocation a({1, 3, 6, 5});
    EXPECT_EQ(a.incremented(2), Allocation({1, 3, 7, 5}));
    EXPECT_TRUE(a.fits_within(Allocation({8, 10, 36, 14})));
    EXPECT_FALSE(Allocation({9, 1, 1, 1}).fits_within(Allocation({8, 10, 36, 14})));
    EXPECT_EQ(Allocation::minimal(5), Allocation({1, 1, 1, 1, 1}));
}

TEST(ActiveSet, Validation)
{
    Allocation a({2, 3});
    EXPECT_NO_THROW((ActiveSet{{2, 1}}.validate_against(a)));
    EXPECT_THROW((ActiveSet{{3, 1}}.validate_against(a)), ContractError);
    EXPECT_THROW((ActiveSet{{0, 1}}.validate_against(a)), ContractError);
    EXPECT_THROW((ActiveSet{{1}}.validate_against(a)), ContractError);
}

TEST(ProportionalAllocation, ScalesResNetShape)
{
    const Allocation ref({3, 4, 6, 3});
    const Allocation bound({4, 4, 4, 4});
    auto a = proportional_allocation(ref, 8, bound);
    EXPECT_EQ(a.total(), 8);
    // exact shares 1.5, 2, 3, 1.5; the tie between stages 1 and 4 goes to stage 1
    EXPECT_EQ(a, Allocation({2, 2, 3, 1}));
    EXPECT_EQ(proportional_allocation(ref, 16, Allocation({8, 10, 36, 14})), ref);
    EXPECT_EQ(proportional_allocation(ref, 4, bound), Allocation({1, 1, 1, 1}));
    EXPECT_THROW(proportional_allocation(ref, 17, bound), ContractError);
}
