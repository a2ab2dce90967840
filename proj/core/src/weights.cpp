#include "varlab/weights.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "varlab/errors.hpp"

namespace varlab {

void Weight::validate() const {
  if (values.empty()) throw ValidationError("weight must be nonempty");
  for (double v : values)
    if (!(v > 0.0) || !std::isfinite(v))
      throw ValidationError("weight values must be positive and finite",
                            "weight");
}

IntegerSequence discrete_hilbert(const IntegerSequence& a,
                                 std::int64_t margin) {
  if (a.values.empty()) throw ValidationError("sequence must be nonempty");
  if (margin < 0) throw ValidationError("margin must be >= 0");

  IntegerSequence out;
  out.offset = a.offset - margin;
  const std::int64_t lo = out.offset;
  const std::int64_t hi = a.offset + std::int64_t(a.values.size()) + margin;
  out.values.assign(std::size_t(hi - lo), 0.0);
  for (std::int64_t m = lo; m < hi; ++m) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
      std::int64_t n = a.offset + std::int64_t(k);
      if (n == m) continue;
      acc += a.values[k] / double(n - m);
    }
    out.values[std::size_t(m - lo)] = acc;
  }
  return out;
}

double ap_characteristic(const Weight& w, double p, std::size_t max_len) {
  if (!(p > 1.0)) throw ValidationError("A_p characteristic requires p > 1", "p");
  if (max_len < 1) throw ValidationError("max_len must be >= 1");
  w.validate();

  const std::size_t n = w.size();
  const double dual_exp = 1.0 - p / (p - 1.0);  // 1 - p'
  double sup = 0.0;
  for (std::size_t start = 0; start < n; ++start) {
    double sum_w = 0.0, sum_dual = 0.0;
    std::size_t limit = std::min(n - start, max_len);
    for (std::size_t len = 1; len <= limit; ++len) {
      double v = w.values[start + len - 1];
      sum_w += v;
      sum_dual += std::pow(v, dual_exp);
      double avg_w = sum_w / double(len);
      double avg_dual = sum_dual / double(len);
      double prod = avg_w * std::pow(avg_dual, p - 1.0);
      if (!std::isfinite(prod))
        throw NumericError("A_p characteristic overflow on extreme weights");
      if (prod > sup) sup = prod;
    }
  }
  return sup;
}

void write_weight(std::ostream& os, const Weight& w) {
  w.validate();
  os << "offset " << w.offset << "\n";
  char buf[40];
  for (double v : w.values) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf << "\n";
  }
}

Weight read_weight(std::istream& is) {
  Weight w;
  std::string line;
  int lineno = 0;
  if (!std::getline(is, line))
    throw ValidationError("empty weight fixture", "", 0);
  ++lineno;
  {
    std::istringstream head(line);
    std::string tag;
    head >> tag >> w.offset;
    if (tag != "offset" || head.fail())
      throw ValidationError("expected 'offset <k>' header", "", lineno);
  }
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    double v;
    ss >> v;
    if (ss.fail()) throw ValidationError("bad weight value", "", lineno);
    w.values.push_back(v);
  }
  w.validate();
  return w;
}

Weight load_weight(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open weight fixture " + path);
  return read_weight(is);
}

}  // namespace varlab
