#include "varlab/report.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "varlab/errors.hpp"

namespace varlab {

std::string cell_to_csv(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&c)) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", *d);
    return buf;
  }
  return std::get<std::string>(c);
}

void write_report_csv(std::ostream& os, const Report& r) {
  for (std::size_t i = 0; i < r.columns.size(); ++i)
    os << (i ? "," : "") << r.columns[i];
  os << "\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      os << (i ? "," : "") << cell_to_csv(row[i]);
    os << "\n";
  }
}

namespace {

nlohmann::ordered_json cell_to_json(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
  if (const auto* d = std::get_if<double>(&c)) return *d;
  return std::get<std::string>(c);
}

}  // namespace

std::string report_to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["kind"] = r.kind;
  j["config_text"] = r.config_text;
  j["columns"] = r.columns;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    auto jr = nlohmann::ordered_json::array();
    for (const auto& c : row) jr.push_back(cell_to_json(c));
    rows.push_back(std::move(jr));
  }
  j["rows"] = std::move(rows);
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.summary) summary[k] = cell_to_json(v);
  j["summary"] = std::move(summary);
  return j.dump(2) + "\n";
}

void write_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp + " for writing");
    os.write(content.data(), std::streamsize(content.size()));
    if (!os) throw Error("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error("cannot rename " + tmp + " to " + path);
}

}  // namespace varlab
