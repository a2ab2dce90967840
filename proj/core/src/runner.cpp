#include "varlab/runner.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "varlab/config.hpp"
#include "varlab/errors.hpp"
#include "varlab/parallel.hpp"
#include "varlab/report.hpp"

namespace varlab {

namespace {

std::string iso8601_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

int run_experiment_files(const std::string& config_path,
                         const std::string& out_dir,
                         std::optional<std::uint64_t> seed_override) {
  namespace fs = std::filesystem;
  std::string started = iso8601_now();
  std::string checksum;
  try {
    std::ifstream is(config_path);
    if (!is) {
      std::cerr << "config error: cannot open " << config_path << "\n";
      return 2;
    }
    std::ostringstream buf;
    buf << is.rdbuf();
    ExperimentConfig cfg = parse_config_text(buf.str());
    checksum = fnv1a64_hex(canonical_config_text(cfg));
    if (seed_override) cfg.ensemble.seed = *seed_override;

    // fixtures are referenced relative to the config file
    fs::path cfg_dir = fs::path(config_path).parent_path();
    auto resolve = [&](std::string& p) {
      if (!p.empty() && fs::path(p).is_relative() && !fs::exists(p))
        p = (cfg_dir / p).string();
    };
    resolve(cfg.weight_fixture);
    if (cfg.operator_spec.find('(') == std::string::npos)
      resolve(cfg.operator_spec);

    cfg.validate();

    Report report = run_experiment(cfg);
    report.config_text = canonical_config_text(cfg);

    fs::create_directories(out_dir);
    std::ostringstream csv;
    write_report_csv(csv, report);
    write_file_atomic((fs::path(out_dir) / "report.csv").string(), csv.str());
    write_file_atomic((fs::path(out_dir) / "report.json").string(),
                      report_to_json(report));

    nlohmann::ordered_json manifest;
    manifest["artifact_version"] = "0.1.0";
    manifest["config_path"] = config_path;
    manifest["config_checksum"] = checksum;
    manifest["seed"] = cfg.ensemble.seed;
    manifest["seed_overridden"] = seed_override.has_value();
    manifest["threads"] = worker_count();
    manifest["started_at"] = started;
    manifest["finished_at"] = iso8601_now();
    manifest["outputs"] = {"report.csv", "report.json"};
    write_file_atomic((fs::path(out_dir) / "manifest.json").string(),
                      manifest.dump(2) + "\n");
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "config error";
    if (e.line > 0) std::cerr << " at line " << e.line;
    if (!e.field.empty()) std::cerr << " (field " << e.field << ")";
    std::cerr << ": " << e.what() << "\n";
    return 2;
  } catch (const CertificateError& e) {
    std::cerr << "certificate failure [" << e.certificate << "]: " << e.what()
              << "\n";
    return 3;
  } catch (const TailError& e) {
    std::cerr << "tail diagnostic failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace varlab
