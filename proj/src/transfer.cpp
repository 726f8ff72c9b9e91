#include "allocnas/transfer.hpp"

#include "allocnas/cost_model.hpp"
#include "allocnas/errors.hpp"
#include "allocnas/ops.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace allocnas {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::span<const std::size_t> split_of(const TaskSpec& task, SplitKind kind)
{
    const auto& part = kind == SplitKind::Val ? task.val : task.train;
    return {part.data(), part.size()};
}

// Metrics on the validation split, or on the training split for tasks
// that were never split.
Metrics monitor(const SuperNet& net, const TaskSpec& task)
{
    return evaluate(net, task, task.val.empty() ? SplitKind::Train : SplitKind::Val);
}

} // namespace

Metrics evaluate(const LogitsFn& model, const Dataset& data, std::span<const std::size_t> indices, std::size_t batch_size)
{
    if (indices.empty())
        throw ContractError("evaluate: empty split");
    if (batch_size == 0)
        throw ContractError("evaluate: batch size must be positive");
    NoGradGuard no_grad;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
        const auto part = indices.subspan(start, std::min(batch_size, indices.size() - start));
        const auto labels = gather_labels(data, part);
        const Var logits = model(Var(gather_images(data, part)));
        const Tensor& z = logits.value();
        const std::size_t k = z.dim(1);
        for (std::size_t r = 0; r < part.size(); ++r) {
            const float* row = z.ptr() + r * k;
            std::size_t arg = 0;
            double mx = row[0];
            for (std::size_t c = 1; c < k; ++c)
                if (row[c] > mx) {
                    mx = row[c];
                    arg = c;
                }
            double denom = 0.0;
            for (std::size_t c = 0; c < k; ++c)
                denom += std::exp(static_cast<double>(row[c]) - mx);
            const auto y = static_cast<std::size_t>(labels[r]);
            if (y >= k)
                throw ContractError("evaluate: label " + std::to_string(y) + " outside the model's " + std::to_string(k) +
                                    " classes");
            loss_sum += std::log(denom) - (row[y] - mx);
            correct += arg == y ? 1 : 0;
        }
    }
    if (!std::isfinite(loss_sum))
        throw NumericError("evaluate: non-finite loss");
    Metrics m;
    m.n_examples = indices.size();
    m.loss = std::max(0.0, loss_sum / static_cast<double>(indices.size()));
    m.top1_accuracy = static_cast<double>(correct) / static_cast<double>(indices.size());
    return m;
}

Metrics evaluate(const SuperNet& model, const TaskSpec& task, SplitKind split, std::size_t batch_size)
{
    return evaluate(model, ActiveSet::full(model.alloc()), task, split, batch_size);
}

Metrics evaluate(const SuperNet& model, const ActiveSet& active, const TaskSpec& task, SplitKind split, std::size_t batch_size)
{
    if (!task.data)
        throw ContractError("evaluate: task has no data");
    active.validate_against(model.alloc());
    return evaluate([&](const Var& x) { return model.forward(x, active); }, *task.data, split_of(task, split), batch_size);
}

PhaseLog train(SuperNet& net, const TaskSpec& task, const TrainSchedule& schedule, const TrainOptions& options)
{
    schedule.validate();
    if (!task.data || task.train.empty())
        throw ContractError(options.phase + ": empty training split");
    const auto start = Clock::now();
    PhaseLog log;
    log.phase = options.phase;
    if (net.num_classes() != task.label_space) {
        if (!options.reinit_head)
            throw ContractError(options.phase + ": model has " + std::to_string(net.num_classes()) +
                                " classes, task has " + std::to_string(task.label_space) + " and head re-init is off");
        net.reset_head(task.label_space, derive_seed(options.seed, "head"));
        log.head_reinitialized = true;
    }
    log.before = monitor(net, task);

    Rng rng(derive_seed(options.seed, "batches"));
    Rng drop_rng(derive_seed(options.seed, "drop"));
    Sgd sgd(schedule);
    std::vector<std::size_t> order = task.train;
    const std::size_t bs = schedule.batch_size;
    const std::size_t iters = (order.size() + bs - 1) / bs;
    const float smoothing = static_cast<float>(schedule.label_smoothing);
    for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (std::size_t it = 0; it < iters; ++it) {
            const std::span<const std::size_t> part(order.data() + it * bs, std::min(bs, order.size() - it * bs));
            const auto active = options.random_drop ? sample_active_set(net.alloc(), drop_rng) : ActiveSet::full(net.alloc());
            const auto labels = gather_labels(*task.data, part);
            Var loss;
            try {
                loss = cross_entropy(net.forward(Var(gather_images(*task.data, part)), active), labels, smoothing);
            } catch (const NumericError& e) {
                throw NumericError(options.phase + ": diverged at epoch " + std::to_string(epoch) + " iteration " +
                                   std::to_string(it) + ": " + e.what());
            }
            backward(loss, net.params());
            sgd.step(net.params(), schedule.lr_at(epoch, it, iters));
            epoch_loss += loss.value()[0] * static_cast<double>(part.size());
            ++log.iterations;
        }
        log.epoch_losses.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    log.after = monitor(net, task);
    log.seconds = seconds_since(start);
    return log;
}

PhaseLog train_supernet_source(SuperNet& net, const TaskSpec& source, const TrainSchedule& schedule, std::uint64_t seed)
{
    return train(net, source, schedule, {.random_drop = true, .reinit_head = true, .seed = seed, .phase = "supernet_source"});
}

PhaseLog finetune_supernet_target(SuperNet& net, const TaskSpec& target, const TrainSchedule& schedule, std::uint64_t seed,
                                  bool reinit_head)
{
    return train(net, target, schedule,
                 {.random_drop = true, .reinit_head = reinit_head, .seed = seed, .phase = "supernet_target"});
}

WeightSearchResult weight_search(SuperNet child, const TaskSpec& source, const TaskSpec& target,
                                 const TrainSchedule& source_schedule, const TrainSchedule& target_schedule,
                                 std::uint64_t seed)
{
    auto src = train(child, source, source_schedule,
                     {.random_drop = false, .reinit_head = true, .seed = derive_seed(seed, "source"), .phase = "child_source"});
    auto tgt = train(child, target, target_schedule,
                     {.random_drop = false, .reinit_head = true, .seed = derive_seed(seed, "target"), .phase = "child_target"});
    const Metrics final_metrics = tgt.after;
    return {std::move(child), std::move(src), std::move(tgt), final_metrics};
}

BaselineResult fixed_arch_baseline(const Allocation& default_alloc, int expected_blocks, const BlockKind& kind,
                                   const NetGeometry& geometry, const TaskSpec& source, const TaskSpec& target,
                                   const BaselineSchedules& schedules, std::uint64_t seed)
{
    if (default_alloc.total() != expected_blocks)
        throw ContractError("baseline " + default_alloc.to_string() + " has " + std::to_string(default_alloc.total()) +
                            " blocks, searched branch has " + std::to_string(expected_blocks));
    SuperNet net = build_supernet(default_alloc, kind, source.label_space, derive_seed(seed, "init"), geometry);
    auto scratch = train(net, source, schedules.source_scratch,
                         {.random_drop = false, .reinit_head = true, .seed = derive_seed(seed, "scratch"), .phase = "baseline_scratch"});
    auto tuned = weight_search(std::move(net), source, target, schedules.source_finetune, schedules.target_finetune,
                               derive_seed(seed, "tune"));
    tuned.source_phase.phase = "baseline_source";
    tuned.target_phase.phase = "baseline_target";
    return {default_alloc, std::move(scratch), std::move(tuned)};
}

void TransferConfig::validate() const
{
    source.validate();
    target.validate();
    for (double f : {source_val_fraction, target_val_fraction})
        if (!(f > 0.0 && f < 1.0))
            throw ContractError("validation fractions must lie in (0, 1)");
    kind.validate();
    if (source.image_extent != target.image_extent || source.channels != target.channels)
        throw ContractError("source and target images must share extent and channels");
    if ((source.image_extent >> super_alloc.stages()) < 1)
        throw ContractError("input extent " + std::to_string(source.image_extent) + " is too small for " +
                            std::to_string(super_alloc.stages()) + " stages");
    if (source.kind == DomainKind::SyntheticShapes && target.kind == DomainKind::SyntheticShapes &&
        source.n_samples < 10 * target.n_samples)
        throw ContractError("source must hold at least 10x the target samples (" + std::to_string(source.n_samples) +
                            " vs " + std::to_string(target.n_samples) + ")");
    for (const auto* s : {&supernet_source, &supernet_target, &child_source, &child_target})
        s->validate();
    if (default_reference.stages() != super_alloc.stages())
        throw ContractError("default reference " + default_reference.to_string() + " does not match the super-network");
}

std::pair<TaskSpec, TaskSpec> make_tasks(const TransferConfig& config)
{
    auto load = [&](DomainSpec spec, const char* tag) {
        if (spec.kind == DomainKind::IdxFile)
            return load_idx(spec.images_path, spec.labels_path);
        spec.seed = derive_seed(config.seed, std::string("data.") + tag);
        return synth_task(spec);
    };
    Rng split_rng(derive_seed(config.seed, "split"));
    auto source = split(load(config.source, "source"), config.source_val_fraction, split_rng);
    auto target = split(load(config.target, "target"), config.target_val_fraction, split_rng);
    return {std::move(source), std::move(target)};
}

namespace {

std::vector<double> search_weights(const TransferConfig& config)
{
    if (!config.weighted)
        return {};
    return derive_weights(desk_spec(config.kind, config.geometry(), config.super_alloc.stages(), config.target.n_classes));
}

} // namespace

Allocation default_allocation(const TransferConfig& config)
{
    const auto w = search_weights(config);
    if (w.empty())
        return proportional_allocation(config.default_reference, static_cast<int>(std::lround(config.budget)),
                                       config.super_alloc);
    // largest proportional allocation whose reweighted size fits the budget
    for (int total = config.super_alloc.total(); total >= static_cast<int>(config.super_alloc.stages()); --total) {
        auto a = proportional_allocation(config.default_reference, total, config.super_alloc);
        if (reweighted_size(a, w) <= config.budget + 1e-9)
            return a;
    }
    throw ContractError("no default allocation fits the budget");
}

TransferOutcome run_full_transfer(const TransferConfig& config)
{
    config.validate();
    TransferOutcome out;
    auto& rep = out.report;
    const std::uint64_t master = config.seed;
    auto seed_of = [&](const std::string& tag) {
        const auto s = derive_seed(master, tag);
        rep.seeds[tag] = s;
        return s;
    };
    rep.seeds["master"] = master;
    std::string phase = "data";
    try {
        auto start = Clock::now();
        const auto [source, target] = make_tasks(config);
        rep.seconds["data"] = seconds_since(start);
        rep.source_train = source.train.size();
        rep.source_val = source.val.size();
        rep.target_train = target.train.size();
        rep.target_val = target.val.size();
        const auto geometry = config.geometry();

        phase = "supernet_source";
        out.source_supernet.emplace(build_supernet(config.super_alloc, config.kind, source.label_space,
                                                   seed_of("supernet.init"), geometry));
        rep.supernet_source = train_supernet_source(*out.source_supernet, source, config.supernet_source,
                                                    seed_of("supernet.source"));
        rep.phase_order.push_back(phase);
        rep.seconds[phase] = rep.supernet_source->seconds;

        phase = "supernet_target";
        out.target_supernet.emplace(*out.source_supernet);
        rep.supernet_target = finetune_supernet_target(*out.target_supernet, target, config.supernet_target,
                                                       seed_of("supernet.target"));
        rep.phase_order.push_back(phase);
        rep.seconds[phase] = rep.supernet_target->seconds;

        phase = "search";
        start = Clock::now();
        const SuperNet& frozen = *out.target_supernet;
        SearchSpace space{config.super_alloc, config.budget, search_weights(config)};
        rep.cost_weights = space.weights();
        rep.checksum_before_search = frozen.params().checksum();
        const EvalFn eval_fn = [&](const Allocation& a) {
            return evaluate(frozen, ActiveSet{a.counts()}, target).top1_accuracy;
        };
        rep.trace = greedy_block_search(space, eval_fn, {.start = std::nullopt, .threads = config.threads});
        rep.checksum_after_search = frozen.params().checksum();
        if (rep.checksum_after_search != rep.checksum_before_search)
            throw Error("search mutated the super-network weights");
        rep.phase_order.push_back(phase);
        rep.seconds[phase] = seconds_since(start);

        phase = "weight_search";
        start = Clock::now();
        const auto& chain = rep.trace->chain;
        const std::size_t first = config.weight_search_all_budgets ? 0 : chain.size() - 1;
        auto tune = [&](const Allocation& a, const std::string& tag) {
            SuperNet child = config.from_scratch
                                 ? build_supernet(a, config.kind, source.label_space, seed_of(tag + ".init"), geometry)
                                 : inherit_weights(*out.source_supernet, a);
            return weight_search(std::move(child), source, target, config.child_source, config.child_target,
                                 seed_of(tag + ".tune"));
        };
        for (std::size_t k = first; k < chain.size(); ++k) {
            const auto inherited = evaluate(frozen, ActiveSet{chain[k].counts()}, target);
            rep.per_budget.push_back(BudgetResult{rep.trace->budgets[k], chain[k], rep.trace->scores[k], inherited,
                                                  tune(chain[k], "child." + chain[k].to_string())});
        }
        rep.phase_order.push_back(phase);
        rep.seconds[phase] = seconds_since(start);

        if (config.random_allocations > 0) {
            phase = "random";
            start = Clock::now();
            Rng rng(seed_of("random.sample"));
            const auto picks = sample_space(space, config.random_allocations, rng);
            for (const auto& a : picks) {
                AllocationResult r;
                r.alloc = a;
                r.inherited = evaluate(frozen, ActiveSet{a.counts()}, target);
                r.final_metrics = tune(a, "random." + a.to_string()).final_metrics;
                rep.random.push_back(r);
            }
            rep.phase_order.push_back(phase);
            rep.seconds[phase] = seconds_since(start);
        }

        if (config.run_baseline) {
            phase = "baseline";
            start = Clock::now();
            const auto searched = chain.back();
            const auto def = default_allocation(config);
            BaselineSchedules schedules{config.supernet_source, config.child_source, config.child_target};
            rep.baseline = fixed_arch_baseline(def, config.weighted ? def.total() : searched.total(), config.kind,
                                               geometry, source, target, schedules, seed_of("baseline"));
            rep.phase_order.push_back(phase);
            rep.seconds[phase] = seconds_since(start);
        }
        rep.complete = true;
    } catch (const std::exception& e) {
        rep.complete = false;
        rep.failed_phase = phase;
        rep.failure = e.what();
    }
    return out;
}

} // namespace allocnas
