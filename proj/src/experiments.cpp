#include "allocnas/experiments.hpp"

#include "allocnas/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

namespace allocnas {

namespace {

std::vector<double> average_ranks(const std::vector<double>& v)
{
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]])
            ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

std::string fmt(double v)
{
    if (std::isnan(v))
        return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size() || a.size() < 2)
        throw ContractError("spearman: need two equally long series of length >= 2");
    const auto ra = average_ranks(a), rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0)
        return std::numeric_limits<double>::quiet_NaN();
    return sab / std::sqrt(saa * sbb);
}

bool SweepResult::any_inversion() const
{
    return std::any_of(seeds.begin(), seeds.end(), [](const SweepSeedSummary& s) { return s.inverted(); });
}

SweepResult motivation_sweep(const TransferConfig& config, const std::vector<Allocation>& allocations,
                             const std::vector<std::uint64_t>& seeds)
{
    if (allocations.size() < 2)
        throw ContractError("motivation_sweep: need at least two allocations");
    if (seeds.empty())
        throw ContractError("motivation_sweep: need at least one seed");
    for (const auto& a : allocations)
        if (a.total() != allocations.front().total() || a.stages() != allocations.front().stages())
            throw ContractError("motivation_sweep: allocations differ in size (" + allocations.front().to_string() +
                                " vs " + a.to_string() + ")");
    SweepResult result;
    for (const auto seed : seeds) {
        TransferConfig c = config;
        c.seed = seed;
        const auto [source, target] = make_tasks(c);
        std::vector<double> src_acc, tgt_acc;
        for (const auto& a : allocations) {
            const auto tag = "sweep." + a.to_string();
            SuperNet net = build_supernet(a, c.kind, source.label_space, derive_seed(seed, tag + ".init"), c.geometry());
            const auto src = train(net, source, c.supernet_source,
                                   {.random_drop = false, .reinit_head = true, .seed = derive_seed(seed, tag + ".source"), .phase = "sweep_source"});
            const auto tgt = train(net, target, c.child_target,
                                   {.random_drop = false, .reinit_head = true, .seed = derive_seed(seed, tag + ".target"), .phase = "sweep_target"});
            result.rows.push_back({seed, a, src.after.top1_accuracy, tgt.after.top1_accuracy});
            src_acc.push_back(src.after.top1_accuracy);
            tgt_acc.push_back(tgt.after.top1_accuracy);
        }
        auto argmax = [&](const std::vector<double>& v) {
            return allocations[static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin())];
        };
        result.seeds.push_back({seed, argmax(src_acc), argmax(tgt_acc), spearman(src_acc, tgt_acc)});
    }
    return result;
}

void write_sweep_csv(const SweepResult& result, std::ostream& os)
{
    os << "seed,allocation,source_val_acc,target_val_acc\n";
    for (const auto& r : result.rows)
        os << r.seed << ',' << r.alloc.to_string() << ',' << fmt(r.source_val_acc) << ',' << fmt(r.target_val_acc) << '\n';
}

void write_sweep_summary_csv(const SweepResult& result, std::ostream& os)
{
    os << "seed,source_argmax,target_argmax,rank_correlation,inverted\n";
    for (const auto& s : result.seeds)
        os << s.seed << ',' << s.source_argmax.to_string() << ',' << s.target_argmax.to_string() << ','
           << fmt(s.rank_correlation) << ',' << (s.inverted() ? 1 : 0) << '\n';
}

} // namespace allocnas
