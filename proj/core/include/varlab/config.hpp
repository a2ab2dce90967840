#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "varlab/lab.hpp"

namespace varlab {

/// Parses the flat key/value config format ([section] headers, `key = value`
/// lines, `#` comments). Unknown sections or keys are validation errors with
/// a line diagnostic.
ExperimentConfig parse_config_text(const std::string& text);

ExperimentConfig load_config(const std::string& path);

/// Canonical serialization: fixed section and key order, numbers rendered
/// with %.17g. parse . serialize is idempotent, and checksums are taken over
/// these bytes.
std::string canonical_config_text(const ExperimentConfig& cfg);

std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

}  // namespace varlab
