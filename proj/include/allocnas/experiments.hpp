#pragma once

#include "allocnas/transfer.hpp"

#include <iosfwd>
#include <vector>

namespace allocnas {

struct SweepRow {
    std::uint64_t seed = 0;
    Allocation alloc;
    double source_val_acc = 0.0;
    double target_val_acc = 0.0;
};

struct SweepSeedSummary {
    std::uint64_t seed = 0;
    Allocation source_argmax;
    Allocation target_argmax;
    /// Spearman rank correlation of source vs target accuracy (average
    /// ranks for ties); NaN when either side is constant.
    double rank_correlation = 0.0;
    bool inverted() const { return source_argmax != target_argmax; }
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepSeedSummary> seeds;
    bool any_inversion() const;
};

/// For every seed and allocation: train from scratch on the source
/// (supernet_source schedule, no drop), record source validation accuracy,
/// fine-tune on the target (child_target schedule) and record target
/// validation accuracy. All allocations must have the same block count.
/// Ties in the argmax go to the earlier allocation in the list.
SweepResult motivation_sweep(const TransferConfig& config, const std::vector<Allocation>& allocations,
                             const std::vector<std::uint64_t>& seeds);

/// Columns: seed,allocation,source_val_acc,target_val_acc
void write_sweep_csv(const SweepResult& result, std::ostream& os);
/// Columns: seed,source_argmax,target_argmax,rank_correlation,inverted
void write_sweep_summary_csv(const SweepResult& result, std::ostream& os);

double spearman(const std::vector<double>& a, const std::vector<double>& b);

} // namespace allocnas
