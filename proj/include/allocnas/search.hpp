#pragma once

#include "allocnas/allocation.hpp"
#include "allocnas/rng.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace allocnas {

/// Budget-constrained allocation space under a super-network.
///
/// With unit weights the members are exactly the allocations with
/// 1 <= N_i <= S_i and sum(N) == budget. With cost weights w the members
/// are those with budget - max(w) < sum(w_i * N_i) <= budget.
struct SearchSpace {
    Allocation super_alloc;
    double budget = 0.0;
    /// Empty means all ones.
    std::vector<double> cost_weights;

    void validate() const;
    bool unit_weights() const;
    std::vector<double> weights() const;
    /// Smallest and largest reweighted size inside the super-network.
    double min_size() const;
    double max_size() const;
    bool feasible() const;
    bool contains(const Allocation& alloc) const;
};

/// Validation score of an allocation; higher is better.
using EvalFn = std::function<double(const Allocation&)>;

struct SearchTrace {
    std::vector<Allocation> chain;
    std::vector<double> scores;
    /// Reweighted size of every chain entry (the step budget).
    std::vector<double> budgets;
    /// Cumulative evaluations after every step.
    std::vector<std::size_t> evals_so_far;
    std::size_t eval_count = 0;
    std::size_t tie_breaks = 0;

    /// Throws ContractError unless every step adds exactly one block.
    void check_nested() const;
    /// Columns: step,budget,allocation,score,evals_so_far
    void write_csv(std::ostream& os) const;
};

struct SpaceEnumeration {
    std::vector<Allocation> members; // lexicographic order
    bool infeasible = false;
};

SpaceEnumeration enumerate_space(const SearchSpace& space);
/// |space| without materializing it.
std::uint64_t count_space(const SearchSpace& space);

/// One candidate per non-saturated stage, in stage order.
std::vector<Allocation> successor_candidates(const Allocation& phi, const Allocation& super_alloc);

double reweighted_size(const Allocation& alloc, const std::vector<double>& weights);

struct GreedyOptions {
    /// Chain origin; defaults to [1, ..., 1]. Its score is not evaluated.
    std::optional<Allocation> start;
    /// Concurrent candidate evaluations; 0 reads ALLOCNAS_THREADS (default 1).
    std::size_t threads = 0;
};

/// Greedy block search: grow the allocation one block at a time, always
/// taking the best-scoring successor (ties go to the lowest stage index).
/// Unit weights stop at sum == budget; weighted spaces stop when no
/// successor fits under the budget.
SearchTrace greedy_block_search(const SearchSpace& space, const EvalFn& eval_fn, const GreedyOptions& options = {});

struct SearchResult {
    Allocation best;
    double score = 0.0;
    std::size_t eval_count = 0;
};

inline constexpr std::uint64_t kExhaustiveLimit = 100000;

/// Evaluates every member; ties go to the lexicographically smallest.
/// Refuses spaces larger than kExhaustiveLimit.
SearchResult exhaustive_search(const SearchSpace& space, const EvalFn& eval_fn);

/// Best of `trials` members drawn uniformly without replacement.
SearchResult random_search(const SearchSpace& space, const EvalFn& eval_fn, std::size_t trials, Rng& rng);

/// Uniform sample of `count` distinct members (all members if fewer).
std::vector<Allocation> sample_space(const SearchSpace& space, std::size_t count, Rng& rng);

/// Value of ALLOCNAS_THREADS, at least 1.
std::size_t env_thread_cap();

} // namespace allocnas
