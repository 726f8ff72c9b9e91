#pragma once

#include "allocnas/transfer.hpp"

#include <string>
#include <vector>

namespace allocnas {

/// Everything a CLI run needs. Parsed from a TOML file:
///
///   [run]       seed (required), out, threads, preset
///   [source]    domain keys (see below)
///   [target]    domain keys
///   [supernet]  alloc, family, base_width, expansion
///   [search]    budget, weights ("unit" | "flops"), default_reference,
///               random_allocations, all_budgets, from_scratch, baseline
///   [schedule.supernet_source], [schedule.supernet_target],
///   [schedule.child_source], [schedule.child_target]
///               epochs, base_lr, lr_drop_epochs, lr_drop_factor,
///               weight_decay, momentum, batch_size, warmup_epochs,
///               label_smoothing
///   [sweep]     allocations (list of strings), seeds (list of integers)
///
/// Domain keys: kind ("synthetic-shapes" | "idx-file"), extent, channels,
/// classes, samples, shapes, bands, class_subset, rotation = [lo, hi],
/// scale = [lo, hi], texture_frequency, band_spacing, texture_contrast,
/// noise, jitter, images, labels, val_fraction.
///
/// Unknown keys are errors.
struct ExperimentConfig {
    TransferConfig transfer;
    std::string preset = "stage-biased";
    std::string out_dir = "out";
    std::vector<Allocation> sweep_allocations;
    std::vector<std::uint64_t> sweep_seeds;

    /// Resolved settings as compact JSON with a fixed key order.
    std::string canonical_json() const;
    /// SHA-256 of canonical_json(), hex.
    std::string hash() const;
};

/// Desk defaults for a domain preset (seed 1, output "out").
ExperimentConfig default_config(const std::string& preset = "stage-biased");

/// Throws ConfigError on syntax errors, unknown keys, a missing seed or
/// missing input files.
ExperimentConfig parse_config(const std::string& toml_text);
ExperimentConfig load_config(const std::string& path);

/// Default schedules used by desk runs.
TrainSchedule desk_schedule(const std::string& phase);

} // namespace allocnas
