#include "allocnas/allocation.hpp"

#include "allocnas/errors.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

namespace allocnas {

Allocation::Allocation(std::vector<int> per_stage) : counts_(std::move(per_stage))
{
    if (counts_.empty())
        throw ContractError("allocation needs at least one stage");
    for (int n : counts_)
        if (n < 1)
            throw ContractError("allocation " + to_string() + " has a stage with no blocks");
}

Allocation Allocation::parse(std::string_view text)
{
    std::vector<int> counts;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find_first_of(",-", pos);
        if (end == std::string_view::npos)
            end = text.size();
        auto token = text.substr(pos, end - pos);
        while (!token.empty() && token.front() == ' ')
            token.remove_prefix(1);
        while (!token.empty() && token.back() == ' ')
            token.remove_suffix(1);
        int value = 0;
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (token.empty() || ec != std::errc() || ptr != token.data() + token.size())
            throw ContractError("cannot parse allocation '" + std::string(text) + "'");
        counts.push_back(value);
        pos = end + 1;
    }
    return Allocation(std::move(counts));
}

Allocation Allocation::minimal(std::size_t stages) { return Allocation(std::vector<int>(stages, 1)); }

int Allocation::total() const noexcept { return std::accumulate(counts_.begin(), counts_.end(), 0); }

Allocation Allocation::incremented(std::size_t i) const
{
    auto next = counts_;
    ++next.at(i);
    return Allocation(std::move(next));
}

bool Allocation::fits_within(const Allocation& bound) const
{
    if (bound.stages() != stages())
        return false;
    for (std::size_t i = 0; i < stages(); ++i)
        if (counts_[i] > bound.counts_[i])
            return false;
    return true;
}

std::string Allocation::to_string() const
{
    std::string s;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        if (i)
            s += '-';
        s += std::to_string(counts_[i]);
    }
    return s;
}

void ActiveSet::validate_against(const Allocation& alloc) const
{
    if (keep.size() != alloc.stages())
        throw ContractError("active set has " + std::to_string(keep.size()) + " stages, network has " + std::to_string(alloc.stages()));
    for (std::size_t i = 0; i < keep.size(); ++i)
        if (keep[i] < 1 || keep[i] > alloc[i])
            throw ContractError("active set keeps " + std::to_string(keep[i]) + " blocks in stage " + std::to_string(i + 1) +
                                " of " + alloc.to_string());
}

Allocation proportional_allocation(const Allocation& reference, int budget, const Allocation& bound)
{
    const std::size_t ns = reference.stages();
    if (bound.stages() != ns)
        throw ContractError("proportional_allocation: stage count mismatch");
    if (budget < static_cast<int>(ns) || budget > bound.total())
        throw ContractError("proportional_allocation: budget " + std::to_string(budget) + " infeasible under " + bound.to_string());
    const double scale = static_cast<double>(budget) / reference.total();
    std::vector<int> counts(ns);
    std::vector<double> remainder(ns);
    for (std::size_t i = 0; i < ns; ++i) {
        const double exact = reference[i] * scale;
        counts[i] = std::clamp(static_cast<int>(exact), 1, bound[i]);
        remainder[i] = exact - counts[i];
    }
    int sum = std::accumulate(counts.begin(), counts.end(), 0);
    std::vector<std::size_t> order(ns);
    std::iota(order.begin(), order.end(), 0);
    while (sum != budget) {
        const bool grow = sum < budget;
        // largest remainder first when growing, smallest when shrinking; lowest index on ties
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return grow ? remainder[a] > remainder[b] : remainder[a] < remainder[b];
        });
        bool moved = false;
        for (auto i : order) {
            if (grow && counts[i] < bound[i]) {
                ++counts[i];
                remainder[i] -= 1.0;
                moved = true;
                break;
            }
            if (!grow && counts[i] > 1) {
                --counts[i];
                remainder[i] += 1.0;
                moved = true;
                break;
            }
        }
        if (!moved)
            throw ContractError("proportional_allocation: cannot meet budget");
        sum += grow ? 1 : -1;
    }
    return Allocation(std::move(counts));
}

} // namespace allocnas
