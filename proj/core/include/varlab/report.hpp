#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace varlab {

using Cell = std::variant<std::int64_t, double, std::string>;

/// Experiment output: tabular rows plus a summary block, with the canonical
/// config echoed for provenance. CSV carries the rows; JSON carries
/// everything. Doubles are rendered with 17 significant digits so reports
/// are byte-comparable across runs.
struct Report {
  std::string kind;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::pair<std::string, Cell>> summary;
  std::string config_text;

  void add_summary(const std::string& key, Cell value) {
    summary.emplace_back(key, std::move(value));
  }
};

std::string cell_to_csv(const Cell& c);

void write_report_csv(std::ostream& os, const Report& r);
std::string report_to_json(const Report& r);

/// Writes via a temp file and rename so readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace varlab
