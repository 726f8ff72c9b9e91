#include "allocnas/errors.hpp"
#include "allocnas/search.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

using namespace allocnas;

namespace {

/// Independent enumeration by nested counting over the box [1, S_i].
std::vector<Allocation> brute_force(const Allocation& sup, double budget, const std::vector<double>& w)
{
    const bool unit = std::all_of(w.begin(), w.end(), [](double v) { return v == 1.0; });
    const double wmax = *std::max_element(w.begin(), w.end());
    std::vector<Allocation> out;
    std::vector<int> cur(sup.stages(), 1);
    while (true) {
        double size = 0.0;
        for (std::size_t i = 0; i < cur.size(); ++i)
            size += w[i] * cur[i];
        const bool member = unit ? std::fabs(size - budget) < 1e-9 : (size <= budget + 1e-9 && size > budget - wmax + 1e-9);
        if (member)
            out.emplace_back(cur);
        std::size_t i = cur.size();
        while (i-- > 0) {
            if (cur[i] < sup[i]) {
                ++cur[i];
                break;
            }
            cur[i] = 1;
        }
        if (i == static_cast<std::size_t>(-1))
            break;
    }
    return out;
}

/// Separable score with decreasing marginal gains.
struct Concave {
    std::vector<std::vector<double>> gains;
    double operator()(const Allocation& a) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < a.stages(); ++i)
            for (int n = 1; n < a[i]; ++n)
                s += gains[i][static_cast<std::size_t>(n - 1)];
        return s;
    }
};

Concave random_concave(const Allocation& sup, Rng& rng)
{
    Concave c;
    for (std::size_t i = 0; i < sup.stages(); ++i) {
        std::vector<double> g;
        double v = rng.uniform(1.0, 10.0);
        for (int n = 1; n < sup[i]; ++n) {
            g.push_back(v);
            v *= rng.uniform(0.3, 0.95);
        }
        c.gains.push_back(g);
    }
    return c;
}

} // namespace

TEST(SearchSpace, EnumerationMatchesBruteForce)
{
    Rng rng(1);
    for (int t = 0; t < 30; ++t) {
        const std::size_t ns = 2 + static_cast<std::size_t>(t % 3);
        std::vector<int> caps;
        for (std::size_t i = 0; i < ns; ++i)
            caps.push_back(static_cast<int>(rng.uniform_int(1, 5)));
        Allocation sup(caps);
        std::vector<double> w(ns, 1.0);
        if (t % 2)
            for (auto& v : w)
                v = static_cast<double>(rng.uniform_int(1, 3));
        const double lo = reweighted_size(Allocation::minimal(ns), w);
        const double hi = reweighted_size(sup, w);
        const double budget = std::round(rng.uniform(lo, hi));
        SearchSpace space{sup, budget, t % 2 ? w : std::vector<double>{}};
        const auto expected = brute_force(sup, budget, w);
        const auto got = enumerate_space(space);
        EXPECT_FALSE(got.infeasible);
        EXPECT_EQ(got.members, expected) << sup.to_string() << " C=" << budget;
        EXPECT_EQ(count_space(space), expected.size());
        for (const auto& a : expected)
            EXPECT_TRUE(space.contains(a));
    }
}

TEST(SearchSpace, SmallCounts)
{
    EXPECT_EQ(count_space({Allocation({2, 2, 2}), 4.0, {}}), 3u);
    EXPECT_EQ(enumerate_space({Allocation({1, 1, 1, 1}), 4.0, {}}).members, std::vector<Allocation>{Allocation({1, 1, 1, 1})});
    EXPECT_TRUE(enumerate_space({Allocation({2, 2}), 5.0, {}}).infeasible);
    EXPECT_TRUE(enumerate_space({Allocation({2, 2}), 1.0, {}}).infeasible);
    EXPECT_EQ(count_space({Allocation({2, 2}), 5.0, {}}), 0u);
}

TEST(SearchSpace, ReweightedSize)
{
    EXPECT_DOUBLE_EQ(reweighted_size(Allocation({2, 1, 3}), {1, 2, 1}), 7.0);
    EXPECT_THROW(reweighted_size(Allocation({2, 1}), {1, 2, 1}), ContractError);
    EXPECT_THROW(reweighted_size(Allocation({2, 1}), {1, 0}), ContractError);
}

TEST(Successors, OnePerOpenStage)
{
    const Allocation sup({2, 3, 1});
    EXPECT_EQ(successor_candidates(Allocation({1, 1, 1}), sup),
              (std::vector<Allocation>{Allocation({2, 1, 1}), Allocation({1, 2, 1})}));
    EXPECT_EQ(successor_candidates(Allocation({2, 3, 1}), sup), std::vector<Allocation>{});
    EXPECT_THROW(successor_candidates(Allocation({3, 1, 1}), sup), ContractError);
}

TEST(Greedy, FollowsLookupTableChain)
{
    const std::vector<Allocation> chain = {Allocation({1, 3, 4, 4}), Allocation({1, 3, 5, 4}), Allocation({1, 3, 5, 5}),
                                           Allocation({1, 3, 6, 5}), Allocation({1, 3, 7, 5}), Allocation({1, 3, 7, 6})};
    const std::vector<double> map = {36.4, 36.7, 37.0, 37.4, 37.8, 38.0};
    std::map<Allocation, double> table;
    for (std::size_t i = 0; i < chain.size(); ++i)
        table[chain[i]] = map[i];
    EvalFn eval = [&](const Allocation& a) {
        auto it = table.find(a);
        return it == table.end() ? 30.0 : it->second;
    };
    GreedyOptions opts;
    opts.start = chain.front();
    auto trace = greedy_block_search({Allocation({8, 10, 36, 14}), 17.0, {}}, eval, opts);
    EXPECT_EQ(trace.chain, chain);
    for (std::size_t i = 1; i < chain.size(); ++i) {
        EXPECT_DOUBLE_EQ(trace.scores[i], map[i]);
        EXPECT_EQ(trace.budgets[i], 12.0 + static_cast<double>(i));
    }
    EXPECT_TRUE(std::isnan(trace.scores[0]));
    EXPECT_EQ(trace.eval_count, 5u * 4u);
}

TEST(Greedy, EqualsExhaustiveOnConcaveSeparableScores)
{
    Rng rng(7);
    for (int t = 0; t < 20; ++t) {
        std::vector<int> caps;
        for (int i = 0; i < 4; ++i)
            caps.push_back(static_cast<int>(rng.uniform_int(1, 6)));
        Allocation sup(caps);
        const int budget = static_cast<int>(rng.uniform_int(4, sup.total()));
        auto score = random_concave(sup, rng);
        SearchSpace space{sup, static_cast<double>(budget), {}};
        auto greedy = greedy_block_search(space, score, {});
        auto exhaustive = exhaustive_search(space, score);
        EXPECT_EQ(greedy.chain.back().total(), budget);
        EXPECT_NEAR(score(greedy.chain.back()), exhaustive.score, 1e-9) << sup.to_string() << " C=" << budget;
    }
}

TEST(Greedy, EvaluationCountBound)
{
    std::size_t calls = 0;
    EvalFn eval = [&](const Allocation& a) {
        ++calls;
        return static_cast<double>(a[2]);
    };
    auto trace = greedy_block_search({Allocation({8, 10, 36, 14}), 16.0, {}}, eval, {});
    EXPECT_EQ(trace.eval_count, calls);
    EXPECT_LE(trace.eval_count, 48u);
    EXPECT_EQ(trace.chain.size(), 13u);
    EXPECT_EQ(trace.chain.back(), Allocation({1, 1, 13, 1}));
    trace.check_nested();
}

TEST(Greedy, TiesGoToLowestStage)
{
    auto trace = greedy_block_search({Allocation({3, 3, 3}), 5.0, {}}, [](const Allocation&) { return 1.0; }, {});
    EXPECT_EQ(trace.chain.back(), Allocation({3, 1, 1}));
    EXPECT_EQ(trace.tie_breaks, 2u);
}

TEST(Greedy, WeightedStopsWhenNothingFits)
{
    SearchSpace space{Allocation({4, 4, 4}), 9.0, {1, 2, 1}};
    auto trace = greedy_block_search(space, [](const Allocation& a) { return static_cast<double>(a[1]); }, {});
    // [1,1,1]=4 -> [1,2,1]=6 -> [1,3,1]=8 -> [2,3,1]=9
    EXPECT_EQ(trace.chain.back(), Allocation({2, 3, 1}));
    EXPECT_TRUE(space.contains(trace.chain.back()));
}

TEST(Greedy, InfeasibleBudget)
{
    EXPECT_THROW(greedy_block_search({Allocation({2, 2}), 9.0, {}}, [](const Allocation&) { return 0.0; }, {}),
                 ContractError);
}

TEST(Greedy, ThreadedMatchesSerial)
{
    Rng rng(3);
    auto score = random_concave(Allocation({5, 5, 5, 5}), rng);
    GreedyOptions serial, threaded;
    serial.threads = 1;
    threaded.threads = 4;
    auto a = greedy_block_search({Allocation({5, 5, 5, 5}), 14.0, {}}, score, serial);
    auto b = greedy_block_search({Allocation({5, 5, 5, 5}), 14.0, {}}, score, threaded);
    EXPECT_EQ(a.chain, b.chain);
    EXPECT_EQ(a.eval_count, b.eval_count);
}

TEST(Greedy, FailureNamesAllocation)
{
    EvalFn eval = [](const Allocation& a) -> double {
        if (a == Allocation({1, 2, 1}))
            throw std::runtime_error("boom");
        return 0.0;
    };
    try {
        greedy_block_search({Allocation({2, 2, 2}), 4.0, {}}, eval, {});
        FAIL() << "expected EvaluationError";
    } catch (const EvaluationError& e) {
        EXPECT_EQ(e.allocation(), "1-2-1");
        EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
    }
}

TEST(Exhaustive, RefusesHugeSpaces)
{
    SearchSpace space{Allocation({20, 20, 20, 20, 20, 20}), 60.0, {}};
    EXPECT_GT(count_space(space), kExhaustiveLimit);
    EXPECT_THROW(exhaustive_search(space, [](const Allocation&) { return 0.0; }), ContractError);
}

TEST(Exhaustive, TieGoesToLexicographicallySmallest)
{
    auto r = exhaustive_search({Allocation({2, 2, 2}), 4.0, {}}, [](const Allocation&) { return 1.0; });
    EXPECT_EQ(r.best, Allocation({1, 1, 2}));
    EXPECT_EQ(r.eval_count, 3u);
}

TEST(RandomSearch, CoversWholeSpaceWhenTrialsSuffice)
{
    Rng rng(11);
    auto score = random_concave(Allocation({3, 4, 3}), rng);
    SearchSpace space{Allocation({3, 4, 3}), 6.0, {}};
    auto ex = exhaustive_search(space, score);
    auto rs = random_search(space, score, 1000, rng);
    EXPECT_EQ(rs.best, ex.best);
    EXPECT_EQ(rs.eval_count, count_space(space));
    EXPECT_THROW(random_search(space, score, 0, rng), ContractError);
}

TEST(RandomSearch, SampleIsDistinctAndUniform)
{
    SearchSpace space{Allocation({3, 3}), 4.0, {}};
    Rng rng(5);
    std::map<Allocation, int> hits;
    for (int t = 0; t < 3000; ++t) {
        auto s = sample_space(space, 1, rng);
        ++hits[s.at(0)];
    }
    ASSERT_EQ(hits.size(), 3u);
    for (auto& [a, n] : hits)
        EXPECT_NEAR(n, 1000, 120) << a.to_string();
    auto all = sample_space(space, 10, rng);
    EXPECT_EQ(std::set<Allocation>(all.begin(), all.end()).size(), 3u);
}

TEST(Trace, CsvAndNesting)
{
    auto trace = greedy_block_search({Allocation({2, 2}), 3.0, {}}, [](const Allocation& a) { return a[1] * 0.5; }, {});
    std::ostringstream os;
    trace.write_csv(os);
    EXPECT_EQ(os.str(), "step,budget,allocation,score,evals_so_far\n0,2,1-1,nan,0\n1,3,1-2,1,2\n");
    SearchTrace bad = trace;
    bad.chain[1] = Allocation({2, 2});
    EXPECT_THROW(bad.check_nested(), ContractError);
}
