#include "varlab/variation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "varlab/errors.hpp"

namespace varlab {

namespace {

// |x|^q with fast paths for the exponents the lab uses in inner loops.
double abs_pow(double x, double q) {
  double a = std::abs(x);
  if (q == 1.0) return a;
  if (q == 2.0) return a * a;
  if (q == 3.0) return a * a * a;
  return std::pow(a, q);
}

void check_q(double q) {
  if (!(q >= 1.0)) throw ValidationError("vq_norm requires q >= 1", "q");
}

}  // namespace

ScalarSequence ScalarSequence::from_values(std::vector<double> vals) {
  ScalarSequence s;
  s.indices.resize(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) s.indices[i] = double(i);
  s.values = std::move(vals);
  return s;
}

void ScalarSequence::validate() const {
  if (values.empty()) throw ValidationError("sequence must be nonempty");
  if (indices.size() != values.size())
    throw ValidationError("indices and values differ in length");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || !std::isfinite(indices[i]))
      throw ValidationError("sequence entries must be finite");
    if (i > 0 && !(indices[i] > indices[i - 1]))
      throw ValidationError("indices must be strictly increasing");
  }
}

VariationResult vq_norm(const ScalarSequence& seq, double q) {
  check_q(q);
  seq.validate();
  const std::size_t n = seq.size();
  if (n > kMaxSequencePoints)
    throw ValidationError("sequence longer than 2^16 points");

  const double* a = seq.values.data();
  // best[k] = sup of |a_{n_0}|^q + sum |a_{n_i} - a_{n_{i-1}}|^q over
  // increasing subsequences ending at k.
  std::vector<double> best(n);
  std::vector<std::ptrdiff_t> prev(n, -1);
  for (std::size_t k = 0; k < n; ++k) {
    double b = abs_pow(a[k], q);
    std::ptrdiff_t p = -1;
    for (std::size_t j = 0; j < k; ++j) {
      double cand = best[j] + abs_pow(a[k] - a[j], q);
      if (cand > b) {
        b = cand;
        p = std::ptrdiff_t(j);
      }
    }
    best[k] = b;
    prev[k] = p;
  }

  std::size_t arg = 0;
  for (std::size_t k = 1; k < n; ++k)
    if (best[k] > best[arg]) arg = k;

  VariationResult res;
  res.norm = std::pow(best[arg], 1.0 / q);
  for (std::ptrdiff_t k = std::ptrdiff_t(arg); k >= 0; k = prev[k])
    res.witness.push_back(std::size_t(k));
  std::reverse(res.witness.begin(), res.witness.end());
  return res;
}

VariationResult vq_norm_oracle(const ScalarSequence& seq, double q) {
  check_q(q);
  seq.validate();
  const std::size_t n = seq.size();
  if (n > 20) throw ValidationError("oracle limited to 20 points");

  const double* a = seq.values.data();
  double best = -1.0;
  std::uint32_t best_mask = 0;
  const std::uint32_t full = (1u << n) - 1u;
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    double acc = 0.0;
    bool first = true;
    double last = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (!(mask & (1u << k))) continue;
      acc += first ? abs_pow(a[k], q) : abs_pow(a[k] - last, q);
      last = a[k];
      first = false;
    }
    if (acc > best) {
      best = acc;
      best_mask = mask;
    }
  }

  VariationResult res;
  res.norm = std::pow(best, 1.0 / q);
  for (std::size_t k = 0; k < n; ++k)
    if (best_mask & (1u << k)) res.witness.push_back(k);
  return res;
}

JumpResult jump_count(const ScalarSequence& seq, double lambda) {
  if (!(lambda > 0.0)) throw ValidationError("lambda must be > 0", "lambda");
  seq.validate();
  const double* a = seq.values.data();
  const std::size_t n = seq.size();

  JumpResult res;
  // Window of candidate anchors since the last closing index (inclusive:
  // t_k = s_{k+1} is allowed). Only the running extremes can witness a jump.
  std::size_t argmin = 0, argmax = 0;
  for (std::size_t j = 1; j < n; ++j) {
    double up = a[j] - a[argmin];
    double down = a[argmax] - a[j];
    if (up > lambda || down > lambda) {
      // close at the first index exceeding the threshold; anchor at the
      // extreme realizing the larger violation for a deterministic witness
      std::size_t s = (up >= down) ? argmin : argmax;
      res.pairs.push_back({s, j});
      argmin = argmax = j;
    } else {
      if (a[j] < a[argmin]) argmin = j;
      if (a[j] > a[argmax]) argmax = j;
    }
  }
  res.count = res.pairs.size();
  return res;
}

JumpResult jump_count_oracle(const ScalarSequence& seq, double lambda) {
  if (!(lambda > 0.0)) throw ValidationError("lambda must be > 0", "lambda");
  seq.validate();
  const std::size_t n = seq.size();
  if (n > 14) throw ValidationError("oracle limited to 14 points");
  const double* a = seq.values.data();

  // f[i] = max pairs using anchors s >= i; enumerates every pair system.
  std::vector<std::size_t> f(n + 1, 0);
  std::vector<std::ptrdiff_t> pick_s(n + 1, -1), pick_t(n + 1, -1);
  for (std::ptrdiff_t i = std::ptrdiff_t(n) - 1; i >= 0; --i) {
    f[i] = f[i + 1];
    pick_s[i] = pick_s[i + 1];
    pick_t[i] = pick_t[i + 1];
    for (std::size_t s = std::size_t(i); s < n; ++s) {
      for (std::size_t t = s + 1; t < n; ++t) {
        if (std::abs(a[t] - a[s]) > lambda && 1 + f[t] > f[i]) {
          f[i] = 1 + f[t];
          pick_s[i] = std::ptrdiff_t(s);
          pick_t[i] = std::ptrdiff_t(t);
        }
      }
    }
  }

  JumpResult res;
  res.count = f[0];
  std::size_t at = 0;
  while (pick_s[at] >= 0) {
    res.pairs.push_back({std::size_t(pick_s[at]), std::size_t(pick_t[at])});
    at = std::size_t(pick_t[at]);
    if (res.pairs.size() == res.count) break;
  }
  return res;
}

RefineResult refine_vq(const std::function<double(double)>& family,
                       std::vector<double> coarse_grid, double q,
                       double rel_tol) {
  check_q(q);
  if (!(rel_tol > 0.0)) throw ValidationError("rel_tol must be > 0");
  if (coarse_grid.empty()) throw ValidationError("grid must be nonempty");
  for (std::size_t i = 1; i < coarse_grid.size(); ++i)
    if (!(coarse_grid[i] > coarse_grid[i - 1]))
      throw ValidationError("grid must be strictly increasing");

  auto eval = [&](const std::vector<double>& grid) {
    ScalarSequence s;
    s.indices = grid;
    s.values.reserve(grid.size());
    for (double t : grid) s.values.push_back(family(t));
    return vq_norm(s, q).norm;
  };

  RefineResult out;
  std::vector<double> grid = std::move(coarse_grid);
  double value = eval(grid);
  while (true) {
    if (grid.size() >= 2 && 2 * grid.size() - 1 > kMaxSequencePoints) {
      out.value = value;
      out.grid_size = grid.size();
      out.converged = false;  // refinement cap hit before rel_tol
      return out;
    }
    std::vector<double> fine;
    fine.reserve(2 * grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      fine.push_back(grid[i]);
      if (i + 1 < grid.size()) fine.push_back(0.5 * (grid[i] + grid[i + 1]));
    }
    double refined = eval(fine);
    grid = std::move(fine);
    // subsequence monotonicity: refining never decreases the value
    double gain = (value > 0.0) ? (refined - value) / value : refined;
    if (gain < rel_tol) {
      out.value = refined;
      out.grid_size = grid.size();
      out.converged = true;
      return out;
    }
    value = refined;
    ++out.rounds;
  }
}

double variation_over_witness(const ScalarSequence& seq,
                              const std::vector<std::size_t>& witness,
                              double q) {
  check_q(q);
  if (witness.empty()) throw ValidationError("witness must be nonempty");
  double acc = abs_pow(seq.values.at(witness[0]), q);
  for (std::size_t k = 1; k < witness.size(); ++k) {
    if (!(witness[k] > witness[k - 1]))
      throw ValidationError("witness positions must be increasing");
    acc += abs_pow(seq.values.at(witness[k]) - seq.values.at(witness[k - 1]), q);
  }
  return std::pow(acc, 1.0 / q);
}

}  // namespace varlab
