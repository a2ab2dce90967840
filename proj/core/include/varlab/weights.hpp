#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace varlab {

/// Positive weight on a contiguous integer segment [offset, offset + size).
struct Weight {
  std::int64_t offset = 0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double at(std::int64_t n) const { return values.at(std::size_t(n - offset)); }
  void validate() const;
};

/// Finitely supported sequence on a contiguous integer segment.
struct IntegerSequence {
  std::int64_t offset = 0;
  std::vector<double> values;
};

/// Discrete Hilbert transform H a(m) = sum_{n != m} a_n / (n - m), evaluated
/// on the support window extended by `margin` on both sides.
IntegerSequence discrete_hilbert(const IntegerSequence& a,
                                 std::int64_t margin = 64);

/// Muckenhoupt characteristic sup_I (avg_I w)(avg_I w^{1-p'})^{p-1} over
/// subintervals of length <= max_len, by exhaustive enumeration. Always >= 1;
/// equals 1 iff w is constant on every tested interval. Requires p > 1.
double ap_characteristic(const Weight& w, double p, std::size_t max_len);

// Plain text: "offset <k>" header, then one positive value per line.
void write_weight(std::ostream& os, const Weight& w);
Weight read_weight(std::istream& is);
Weight load_weight(const std::string& path);

}  // namespace varlab
