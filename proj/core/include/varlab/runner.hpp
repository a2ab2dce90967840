#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace varlab {

/// Parses, validates and runs the experiment described by the config file,
/// writing report.csv, report.json and manifest.json into out_dir (created
/// if missing; files written atomically). Relative fixture paths resolve
/// against the config file's directory.
///
/// Returns 0 on success, 2 on config/validation errors, 3 on certificate or
/// tail-diagnostic failures, 1 on anything unexpected. Diagnostics go to
/// stderr.
int run_experiment_files(const std::string& config_path,
                         const std::string& out_dir,
                         std::optional<std::uint64_t> seed_override = {});

}  // namespace varlab
