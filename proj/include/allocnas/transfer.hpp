#pragma once

#include "allocnas/data.hpp"
#include "allocnas/optim.hpp"
#include "allocnas/search.hpp"
#include "allocnas/supernet.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace allocnas {

struct Metrics {
    double loss = 0.0;
    double top1_accuracy = 0.0;
    std::size_t n_examples = 0;

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

enum class SplitKind { Train, Val };

/// Any batch -> logits map.
using LogitsFn = std::function<Var(const Var&)>;

/// Mean cross-entropy (no smoothing) and top-1 accuracy over the samples.
Metrics evaluate(const LogitsFn& model, const Dataset& data, std::span<const std::size_t> indices,
                 std::size_t batch_size = 128);
Metrics evaluate(const SuperNet& model, const TaskSpec& task, SplitKind split = SplitKind::Val,
                 std::size_t batch_size = 128);
/// Masked super-network evaluation (equal to evaluating the inherited child).
Metrics evaluate(const SuperNet& model, const ActiveSet& active, const TaskSpec& task, SplitKind split = SplitKind::Val,
                 std::size_t batch_size = 128);

/// Record of one training phase.
struct PhaseLog {
    std::string phase;
    Metrics before;
    Metrics after;
    std::size_t iterations = 0;
    std::vector<double> epoch_losses;
    bool head_reinitialized = false;
    double seconds = 0.0;
};

struct TrainOptions {
    /// Sample a fresh ActiveSet every iteration (suffix drop).
    bool random_drop = false;
    /// Re-initialize the head when the label space differs from the model's.
    bool reinit_head = true;
    std::uint64_t seed = 0;
    std::string phase = "train";
};

/// Minibatch SGD on task.train; metrics before/after on task.val (or on
/// task.train when val is empty). Throws NumericError on a non-finite loss.
PhaseLog train(SuperNet& net, const TaskSpec& task, const TrainSchedule& schedule, const TrainOptions& options);

/// Source training of the super-network with random suffix drop.
PhaseLog train_supernet_source(SuperNet& net, const TaskSpec& source, const TrainSchedule& schedule, std::uint64_t seed);

/// Target fine-tuning of the super-network; suffix drop stays on. Throws
/// ContractError on a label-space mismatch when reinit_head is false.
PhaseLog finetune_supernet_target(SuperNet& net, const TaskSpec& target, const TrainSchedule& schedule,
                                  std::uint64_t seed, bool reinit_head = true);

struct WeightSearchResult {
    SuperNet model;
    PhaseLog source_phase;
    PhaseLog target_phase;
    Metrics final_metrics;
};

/// Source fine-tuning of an inherited child, then target fine-tuning with a
/// fresh head. Phases run in that order.
WeightSearchResult weight_search(SuperNet child, const TaskSpec& source, const TaskSpec& target,
                                 const TrainSchedule& source_schedule, const TrainSchedule& target_schedule,
                                 std::uint64_t seed);

struct BaselineSchedules {
    TrainSchedule source_scratch;
    TrainSchedule source_finetune;
    TrainSchedule target_finetune;
};

struct BaselineResult {
    Allocation alloc;
    PhaseLog scratch_phase;
    WeightSearchResult tuned;
};

/// Fixed architecture trained from scratch on the source, then fine-tuned on
/// the target. Throws ContractError if alloc.total() != expected_blocks.
BaselineResult fixed_arch_baseline(const Allocation& default_alloc, int expected_blocks, const BlockKind& kind,
                                   const NetGeometry& geometry, const TaskSpec& source, const TaskSpec& target,
                                   const BaselineSchedules& schedules, std::uint64_t seed);

struct TransferConfig {
    DomainSpec source;
    DomainSpec target;
    double source_val_fraction = 0.1;
    double target_val_fraction = 0.5;

    Allocation super_alloc{std::vector<int>{4, 4, 4, 4}};
    BlockKind kind{BlockFamily::BottleneckResidual, 8, 4.0};
    /// Total searchable blocks (unit weights) or reweighted budget.
    double budget = 8;
    bool weighted = false;
    /// The baseline is proportional to this reference, scaled to the budget.
    Allocation default_reference{std::vector<int>{3, 4, 6, 3}};

    TrainSchedule supernet_source;
    TrainSchedule supernet_target;
    TrainSchedule child_source;
    TrainSchedule child_target;

    std::size_t random_allocations = 5;
    /// Run weight search for every chain entry, not only the final one.
    bool weight_search_all_budgets = true;
    /// Train searched children from a fresh initialization.
    bool from_scratch = false;
    bool run_baseline = true;
    std::size_t threads = 0;
    std::uint64_t seed = 1;

    NetGeometry geometry() const { return {source.channels, source.image_extent}; }
    void validate() const;
};

struct BudgetResult {
    double budget = 0.0;
    Allocation alloc;
    double search_score = 0.0;
    Metrics inherited;
    WeightSearchResult tuned;
};

struct AllocationResult {
    Allocation alloc;
    Metrics inherited;
    Metrics final_metrics;
};

struct TransferReport {
    bool complete = false;
    std::string failed_phase;
    std::string failure;
    std::vector<std::string> phase_order;
    std::map<std::string, std::uint64_t> seeds;
    std::map<std::string, double> seconds;

    std::size_t source_train = 0, source_val = 0, target_train = 0, target_val = 0;
    std::optional<PhaseLog> supernet_source;
    std::optional<PhaseLog> supernet_target;
    std::optional<SearchTrace> trace;
    std::uint64_t checksum_before_search = 0;
    std::uint64_t checksum_after_search = 0;
    std::vector<double> cost_weights;
    std::vector<BudgetResult> per_budget;
    std::optional<BaselineResult> baseline;
    std::vector<AllocationResult> random;

    /// Final entry of per_budget, if any.
    const BudgetResult* searched() const { return per_budget.empty() ? nullptr : &per_budget.back(); }
};

struct TransferOutcome {
    TransferReport report;
    std::optional<SuperNet> source_supernet;
    std::optional<SuperNet> target_supernet;
};

/// Source/target tasks of a config, generated and split.
std::pair<TaskSpec, TaskSpec> make_tasks(const TransferConfig& config);

/// Default allocation used by the baseline for this config.
Allocation default_allocation(const TransferConfig& config);

/// Full pipeline: source super-network training, target fine-tuning, greedy
/// search on target validation accuracy, weight search per chain entry,
/// random equal-size allocations and the fixed baseline. A failing phase
/// yields a partial report instead of an exception.
TransferOutcome run_full_transfer(const TransferConfig& config);

} // namespace allocnas
