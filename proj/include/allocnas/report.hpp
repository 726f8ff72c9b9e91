#pragma once

#include "allocnas/transfer.hpp"

#include <map>
#include <string>
#include <vector>

namespace allocnas {

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::string& path);

/// Writes report.json plus trace.csv, phases.csv, per_budget.csv,
/// random.csv and baseline.csv into out_dir, and wall-clock figures into
/// timings.json. Everything except timings.json is a deterministic function
/// of the report. Returns the deterministic file names.
std::vector<std::string> emit_report(const TransferReport& report, const std::string& out_dir);

/// JSON objects shared by the CLI outputs.
std::string phase_log_json(const PhaseLog& log);
std::string metrics_json(const Metrics& metrics);

/// report.json content.
std::string report_json(const TransferReport& report);

/// manifest.json: config hash, seeds and the SHA-256 of every listed
/// artifact (paths relative to out_dir).
void write_manifest(const std::string& out_dir, const std::string& config_hash,
                    const std::map<std::string, std::uint64_t>& seeds, const std::vector<std::string>& artifacts);

/// Creates out_dir (and parents); throws IoError if that fails.
void ensure_dir(const std::string& out_dir);
/// Writes text, replacing the file; throws IoError on failure.
void write_text(const std::string& path, const std::string& text);

} // namespace allocnas
