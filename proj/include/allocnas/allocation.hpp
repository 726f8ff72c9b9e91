#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace allocnas {

/// Per-stage block counts [N_1..N_ns]. Every entry is >= 1.
class Allocation {
public:
    Allocation() = default;
    /// Throws ContractError if empty or any count is zero.
    explicit Allocation(std::vector<int> per_stage);

    /// Parses "3,4,6,3" or "3-4-6-3".
    static Allocation parse(std::string_view text);
    /// [1, ..., 1] with `stages` entries.
    static Allocation minimal(std::size_t stages);

    std::size_t stages() const noexcept { return counts_.size(); }
    int operator[](std::size_t i) const { return counts_[i]; }
    const std::vector<int>& counts() const noexcept { return counts_; }
    int total() const noexcept;

    /// Copy with stage `i` incremented by one.
    Allocation incremented(std::size_t i) const;

    /// Component-wise <= (same number of stages required).
    bool fits_within(const Allocation& bound) const;

    /// "1-3-7-5"
    std::string to_string() const;

    friend bool operator==(const Allocation&, const Allocation&) = default;
    friend auto operator<=>(const Allocation&, const Allocation&) = default;

private:
    std::vector<int> counts_;
};

/// Per-stage active prefix lengths used for masked forward/backward.
struct ActiveSet {
    std::vector<int> keep;

    /// Throws ContractError unless 1 <= keep_i <= alloc_i for every stage.
    void validate_against(const Allocation& alloc) const;
    static ActiveSet full(const Allocation& alloc) { return ActiveSet{alloc.counts()}; }

    friend bool operator==(const ActiveSet&, const ActiveSet&) = default;
};

/// Block allocation proportional to `reference` with exactly `budget` blocks,
/// each stage in [1, bound_i] (largest-remainder rounding).
Allocation proportional_allocation(const Allocation& reference, int budget, const Allocation& bound);

} // namespace allocnas
