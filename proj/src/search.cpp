#include "allocnas/search.hpp"

#include "allocnas/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>

namespace allocnas {

namespace {

constexpr double kSlack = 1e-9;

double max_weight(const std::vector<double>& w) { return *std::max_element(w.begin(), w.end()); }

bool in_band(double size, double budget, double wmax, bool unit)
{
    if (unit)
        return std::abs(size - budget) <= kSlack;
    return size <= budget + kSlack && size > budget - wmax + kSlack;
}

// Depth-first walk over stage counts with suffix bounds for pruning.
template <typename Visit>
void walk_space(const SearchSpace& space, Visit&& visit)
{
    const auto w = space.weights();
    const auto& sup = space.super_alloc.counts();
    const std::size_t ns = sup.size();
    const bool unit = space.unit_weights();
    const double wmax = max_weight(w);
    std::vector<double> suffix_min(ns + 1, 0.0), suffix_max(ns + 1, 0.0);
    for (std::size_t i = ns; i-- > 0;) {
        suffix_min[i] = suffix_min[i + 1] + w[i];
        suffix_max[i] = suffix_max[i + 1] + w[i] * sup[i];
    }
    const double lower = unit ? space.budget : space.budget - wmax;
    std::vector<int> cur(ns, 1);
    auto rec = [&](auto&& self, std::size_t i, double acc) -> void {
        if (i == ns) {
            if (in_band(acc, space.budget, wmax, unit))
                visit(cur);
            return;
        }
        for (int n = 1; n <= sup[i]; ++n) {
            const double here = acc + w[i] * n;
            if (here + suffix_min[i + 1] > space.budget + kSlack)
                break;
            if (here + suffix_max[i + 1] < lower - kSlack)
                continue;
            cur[i] = n;
            self(self, i + 1, here);
        }
    };
    rec(rec, 0, 0.0);
}

} // namespace

void SearchSpace::validate() const
{
    if (super_alloc.stages() == 0)
        throw ContractError("search space needs a super allocation");
    if (!cost_weights.empty()) {
        if (cost_weights.size() != super_alloc.stages())
            throw ContractError("search space: " + std::to_string(cost_weights.size()) + " cost weights for " +
                                std::to_string(super_alloc.stages()) + " stages");
        for (double v : cost_weights)
            if (!(v > 0.0) || !std::isfinite(v))
                throw ContractError("search space: cost weights must be positive");
    }
    if (!std::isfinite(budget))
        throw ContractError("search space: budget must be finite");
}

bool SearchSpace::unit_weights() const
{
    return std::all_of(cost_weights.begin(), cost_weights.end(), [](double v) { return v == 1.0; });
}

std::vector<double> SearchSpace::weights() const
{
    if (cost_weights.empty())
        return std::vector<double>(super_alloc.stages(), 1.0);
    return cost_weights;
}

double SearchSpace::min_size() const { return reweighted_size(Allocation::minimal(super_alloc.stages()), weights()); }

double SearchSpace::max_size() const { return reweighted_size(super_alloc, weights()); }

bool SearchSpace::feasible() const
{
    validate();
    return budget >= min_size() - kSlack && budget <= max_size() + kSlack;
}

bool SearchSpace::contains(const Allocation& alloc) const
{
    if (!alloc.fits_within(super_alloc))
        return false;
    const auto w = weights();
    return in_band(reweighted_size(alloc, w), budget, max_weight(w), unit_weights());
}

void SearchTrace::check_nested() const
{
    if (scores.size() != chain.size() || budgets.size() != chain.size() || evals_so_far.size() != chain.size())
        throw ContractError("search trace columns are misaligned");
    for (std::size_t k = 1; k < chain.size(); ++k) {
        const auto& a = chain[k - 1];
        const auto& b = chain[k];
        if (a.stages() != b.stages())
            throw ContractError("search trace changes stage count at step " + std::to_string(k));
        int grown = 0;
        bool ok = true;
        for (std::size_t i = 0; i < a.stages(); ++i) {
            const int d = b[i] - a[i];
            if (d == 1)
                ++grown;
            else if (d != 0)
                ok = false;
        }
        if (!ok || grown != 1)
            throw ContractError("search trace is not nested: " + a.to_string() + " -> " + b.to_string());
    }
}

void SearchTrace::write_csv(std::ostream& os) const
{
    os << "step,budget,allocation,score,evals_so_far\n";
    for (std::size_t k = 0; k < chain.size(); ++k) {
        char budget_text[32], score_text[32];
        std::snprintf(budget_text, sizeof budget_text, "%.6g", budgets[k]);
        std::snprintf(score_text, sizeof score_text, "%.9g", scores[k]);
        os << k << ',' << budget_text << ',' << chain[k].to_string() << ',' << score_text << ',' << evals_so_far[k] << '\n';
    }
}

SpaceEnumeration enumerate_space(const SearchSpace& space)
{
    SpaceEnumeration out;
    if (!space.feasible()) {
        out.infeasible = true;
        return out;
    }
    walk_space(space, [&](const std::vector<int>& counts) { out.members.emplace_back(counts); });
    return out;
}

std::uint64_t count_space(const SearchSpace& space)
{
    if (!space.feasible())
        return 0;
    if (space.unit_weights()) {
        const auto target = static_cast<std::size_t>(std::llround(space.budget));
        if (std::abs(space.budget - static_cast<double>(target)) > kSlack)
            return 0;
        std::vector<std::uint64_t> ways(target + 1, 0);
        ways[0] = 1;
        for (int cap : space.super_alloc.counts()) {
            std::vector<std::uint64_t> next(target + 1, 0);
            for (std::size_t s = 0; s <= target; ++s)
                if (ways[s])
                    for (int n = 1; n <= cap && s + n <= target; ++n)
                        next[s + n] += ways[s];
            ways = std::move(next);
        }
        return ways[target];
    }
    std::uint64_t n = 0;
    walk_space(space, [&](const std::vector<int>&) { ++n; });
    return n;
}

std::vector<Allocation> successor_candidates(const Allocation& phi, const Allocation& super_alloc)
{
    if (!phi.fits_within(super_alloc))
        throw ContractError("allocation " + phi.to_string() + " exceeds super-network " + super_alloc.to_string());
    std::vector<Allocation> out;
    for (std::size_t i = 0; i < phi.stages(); ++i)
        if (phi[i] < super_alloc[i])
            out.push_back(phi.incremented(i));
    return out;
}

double reweighted_size(const Allocation& alloc, const std::vector<double>& weights)
{
    if (weights.size() != alloc.stages())
        throw ContractError("reweighted_size: " + std::to_string(weights.size()) + " weights for " +
                            std::to_string(alloc.stages()) + " stages");
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] > 0.0))
            throw ContractError("reweighted_size: weights must be positive");
        s += weights[i] * alloc[i];
    }
    return s;
}

std::size_t env_thread_cap()
{
    const char* text = std::getenv("ALLOCNAS_THREADS");
    if (!text)
        return 1;
    char* end = nullptr;
    const long v = std::strtol(text, &end, 10);
    if (end == text || v < 1)
        return 1;
    return static_cast<std::size_t>(v);
}

namespace {

std::vector<double> evaluate_all(const std::vector<Allocation>& candidates, const EvalFn& eval_fn, std::size_t threads,
                                 std::atomic<std::size_t>& counter)
{
    std::vector<double> scores(candidates.size(), 0.0);
    std::vector<std::exception_ptr> failures(candidates.size());
    auto run = [&](std::size_t idx) {
        try {
            scores[idx] = eval_fn(candidates[idx]);
        } catch (...) {
            failures[idx] = std::current_exception();
        }
        counter.fetch_add(1, std::memory_order_relaxed);
    };
    const std::size_t workers = std::min(threads, candidates.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < candidates.size(); ++i)
            run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < workers; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < candidates.size(); i = next++)
                    run(i);
            });
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!failures[i])
            continue;
        try {
            std::rethrow_exception(failures[i]);
        } catch (const std::exception& e) {
            throw EvaluationError(candidates[i].to_string(), e.what());
        } catch (...) {
            throw EvaluationError(candidates[i].to_string(), "unknown exception");
        }
    }
    return scores;
}

} // namespace

SearchTrace greedy_block_search(const SearchSpace& space, const EvalFn& eval_fn, const GreedyOptions& options)
{
    if (!space.feasible())
        throw ContractError("greedy_block_search: budget " + std::to_string(space.budget) + " is infeasible for " +
                            space.super_alloc.to_string());
    const auto w = space.weights();
    const bool unit = space.unit_weights();
    const std::size_t threads = options.threads ? options.threads : env_thread_cap();

    Allocation phi = options.start.value_or(Allocation::minimal(space.super_alloc.stages()));
    if (!phi.fits_within(space.super_alloc))
        throw ContractError("greedy start " + phi.to_string() + " exceeds " + space.super_alloc.to_string());
    if (reweighted_size(phi, w) > space.budget + kSlack)
        throw ContractError("greedy start " + phi.to_string() + " already exceeds the budget");

    std::atomic<std::size_t> evals{0};
    SearchTrace trace;
    auto record = [&](const Allocation& a, double score) {
        trace.chain.push_back(a);
        trace.scores.push_back(score);
        trace.budgets.push_back(reweighted_size(a, w));
        trace.evals_so_far.push_back(evals.load());
    };
    record(phi, std::numeric_limits<double>::quiet_NaN());

    while (true) {
        const double size = reweighted_size(phi, w);
        if (unit && size >= space.budget - kSlack)
            break;
        auto candidates = successor_candidates(phi, space.super_alloc);
        std::erase_if(candidates, [&](const Allocation& c) { return reweighted_size(c, w) > space.budget + kSlack; });
        if (candidates.empty())
            break;
        const auto scores = evaluate_all(candidates, eval_fn, threads, evals);
        std::size_t best = 0;
        bool tied = false;
        for (std::size_t i = 1; i < candidates.size(); ++i) {
            if (scores[i] > scores[best]) {
                best = i;
                tied = false;
            } else if (scores[i] == scores[best]) {
                tied = true;
            }
        }
        if (tied)
            ++trace.tie_breaks;
        phi = candidates[best];
        record(phi, scores[best]);
    }
    trace.eval_count = evals.load();
    trace.check_nested();
    return trace;
}

SearchResult exhaustive_search(const SearchSpace& space, const EvalFn& eval_fn)
{
    const auto size = count_space(space);
    if (size > kExhaustiveLimit)
        throw ContractError("exhaustive search refused: space has " + std::to_string(size) + " members (limit " +
                            std::to_string(kExhaustiveLimit) + ")");
    const auto all = enumerate_space(space);
    if (all.members.empty())
        throw ContractError("exhaustive search: empty search space");
    SearchResult result;
    bool have = false;
    for (const auto& a : all.members) {
        double s = 0.0;
        try {
            s = eval_fn(a);
        } catch (const std::exception& e) {
            throw EvaluationError(a.to_string(), e.what());
        }
        ++result.eval_count;
        if (!have || s > result.score) {
            result.best = a;
            result.score = s;
            have = true;
        }
    }
    return result;
}

std::vector<Allocation> sample_space(const SearchSpace& space, std::size_t count, Rng& rng)
{
    const auto size = count_space(space);
    if (size > kExhaustiveLimit)
        throw ContractError("sample_space: space has " + std::to_string(size) + " members (limit " +
                            std::to_string(kExhaustiveLimit) + ")");
    auto members = enumerate_space(space).members;
    if (members.empty())
        throw ContractError("sample_space: empty search space");
    // partial Fisher-Yates: the first `count` slots become a uniform sample
    const std::size_t take = std::min(count, members.size());
    for (std::size_t i = 0; i < take; ++i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                                 static_cast<std::int64_t>(members.size()) - 1));
        std::swap(members[i], members[j]);
    }
    members.resize(take);
    return members;
}

SearchResult random_search(const SearchSpace& space, const EvalFn& eval_fn, std::size_t trials, Rng& rng)
{
    if (trials == 0)
        throw ContractError("random_search: trials must be >= 1");
    const auto picks = sample_space(space, trials, rng);
    SearchResult result;
    bool have = false;
    for (const auto& a : picks) {
        double s = 0.0;
        try {
            s = eval_fn(a);
        } catch (const std::exception& e) {
            throw EvaluationError(a.to_string(), e.what());
        }
        ++result.eval_count;
        if (!have || s > result.score || (s == result.score && a < result.best)) {
            result.best = a;
            result.score = s;
            have = true;
        }
    }
    return result;
}

} // namespace allocnas
