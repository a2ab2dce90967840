#include "varlab/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "varlab/errors.hpp"

namespace varlab {

namespace {

std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, int line) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ValidationError("expected true/false, got '" + v + "'", "", line);
}

double parse_double(const std::string& v, int line) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw ValidationError("bad number '" + v + "'", "", line);
  }
}

std::int64_t parse_int(const std::string& v, int line) {
  try {
    std::size_t used = 0;
    long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw ValidationError("bad integer '" + v + "'", "", line);
  }
}

std::vector<double> parse_list(const std::string& v, int line) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    std::size_t comma = v.find(',', pos);
    std::string tok = trim(v.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos));
    out.push_back(parse_double(tok, line));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  bool seed_seen = false;

  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ValidationError("unterminated section header", "", lineno);
      section = t.substr(1, t.size() - 2);
      static const char* known[] = {"experiment", "operator", "sigma",
                                    "ensemble",   "grids",    "jump",
                                    "weights",    "probe",    "tolerances"};
      bool ok = false;
      for (const char* k : known) ok = ok || section == k;
      if (!ok)
        throw ValidationError("unknown section [" + section + "]", section,
                              lineno);
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError("expected 'key = value'", "", lineno);
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (section.empty())
      throw ValidationError("key outside any [section]", key, lineno);
    std::string qual = section + "." + key;

    if (qual == "experiment.kind") cfg.kind = experiment_kind_from_string(val);
    else if (qual == "experiment.p") cfg.p = parse_double(val, lineno);
    else if (qual == "experiment.q") cfg.q = parse_double(val, lineno);
    else if (qual == "experiment.r") cfg.r = parse_double(val, lineno);
    else if (qual == "experiment.m") cfg.m = int(parse_int(val, lineno));
    else if (qual == "experiment.q_override")
      cfg.q_override = parse_bool(val, lineno);
    else if (qual == "operator.spec") cfg.operator_spec = val;
    else if (qual == "operator.type") cfg.operator_type = val;
    else if (qual == "operator.family") cfg.family = val;
    else if (qual == "sigma.dim") cfg.sigma_dim = int(parse_int(val, lineno));
    else if (qual == "sigma.weights") cfg.sigma_weights = parse_list(val, lineno);
    else if (qual == "ensemble.count")
      cfg.ensemble.count = int(parse_int(val, lineno));
    else if (qual == "ensemble.generator")
      cfg.ensemble.generator = ensemble_kind_from_string(val);
    else if (qual == "ensemble.seed") {
      cfg.ensemble.seed = std::uint64_t(parse_int(val, lineno));
      seed_seen = true;
    } else if (qual == "grids.index") cfg.index_grid = GridSpec::parse(val);
    else if (qual == "grids.time") cfg.time_grid = GridSpec::parse(val);
    else if (qual == "jump.lambdas") cfg.lambdas = parse_list(val, lineno);
    else if (qual == "jump.ks") cfg.ks = parse_list(val, lineno);
    else if (qual == "weights.fixture") cfg.weight_fixture = val;
    else if (qual == "weights.ap_max_len")
      cfg.ap_max_len = int(parse_int(val, lineno));
    else if (qual == "probe.d_grid") {
      cfg.d_grid.clear();
      for (double d : parse_list(val, lineno))
        cfg.d_grid.push_back(std::int64_t(d));
    } else if (qual == "tolerances.n_max")
      cfg.n_max = int(parse_int(val, lineno));
    else if (qual == "tolerances.quad_tol")
      cfg.quad_tol = parse_double(val, lineno);
    else if (qual == "tolerances.tail_tol")
      cfg.tail_tol = parse_double(val, lineno);
    else
      throw ValidationError("unknown config key '" + qual + "'", qual, lineno);
  }
  (void)seed_seen;
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open config " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

std::string canonical_config_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
      s += (i ? "," : "") + fmt_g(v[i]);
    return s;
  };

  os << "[experiment]\n";
  os << "kind = " << to_string(cfg.kind) << "\n";
  os << "p = " << fmt_g(cfg.p) << "\n";
  os << "q = " << fmt_g(cfg.q) << "\n";
  os << "r = " << fmt_g(cfg.r) << "\n";
  if (cfg.m != 0) os << "m = " << cfg.m << "\n";
  if (cfg.q_override) os << "q_override = true\n";

  os << "[operator]\n";
  os << "spec = " << cfg.operator_spec << "\n";
  if (cfg.operator_type != "auto") os << "type = " << cfg.operator_type << "\n";
  if (cfg.family != "auto" && !cfg.family.empty())
    os << "family = " << cfg.family << "\n";

  os << "[sigma]\n";
  os << "dim = " << cfg.sigma_dim << "\n";
  if (!cfg.sigma_weights.empty())
    os << "weights = " << list(cfg.sigma_weights) << "\n";

  os << "[ensemble]\n";
  os << "count = " << cfg.ensemble.count << "\n";
  os << "generator = " << to_string(cfg.ensemble.generator) << "\n";
  os << "seed = " << cfg.ensemble.seed << "\n";

  if (!cfg.index_grid.empty() || !cfg.time_grid.empty()) {
    os << "[grids]\n";
    if (!cfg.index_grid.empty())
      os << "index = " << cfg.index_grid.canonical() << "\n";
    if (!cfg.time_grid.empty())
      os << "time = " << cfg.time_grid.canonical() << "\n";
  }

  if (!cfg.lambdas.empty() || !cfg.ks.empty()) {
    os << "[jump]\n";
    if (!cfg.lambdas.empty()) os << "lambdas = " << list(cfg.lambdas) << "\n";
    if (!cfg.ks.empty()) os << "ks = " << list(cfg.ks) << "\n";
  }

  if (!cfg.weight_fixture.empty()) {
    os << "[weights]\n";
    os << "fixture = " << cfg.weight_fixture << "\n";
    os << "ap_max_len = " << cfg.ap_max_len << "\n";
  }

  if (!cfg.d_grid.empty()) {
    os << "[probe]\n";
    os << "d_grid = ";
    for (std::size_t i = 0; i < cfg.d_grid.size(); ++i)
      os << (i ? "," : "") << cfg.d_grid[i];
    os << "\n";
  }

  os << "[tolerances]\n";
  os << "n_max = " << cfg.n_max << "\n";
  os << "quad_tol = " << fmt_g(cfg.quad_tol) << "\n";
  os << "tail_tol = " << fmt_g(cfg.tail_tol) << "\n";
  return os.str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view bytes) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string("fnv1a64:") + buf;
}

}  // namespace varlab
