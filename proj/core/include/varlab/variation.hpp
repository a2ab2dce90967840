#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace varlab {

/// Finite sample of a scalar family: strictly increasing indices with one
/// real value per index. Houses (a_t)_{t>0} restricted to a grid as well as
/// plain integer-indexed sequences (a_n)_{n>=0}.
struct ScalarSequence {
  std::vector<double> indices;
  std::vector<double> values;

  /// Sequence with indices 0,1,...,n-1.
  static ScalarSequence from_values(std::vector<double> vals);

  std::size_t size() const { return values.size(); }

  /// Throws ValidationError unless indices are strictly increasing, finite,
  /// and match values in length (length >= 1).
  void validate() const;
};

struct VariationResult {
  double norm = 0.0;
  /// Index positions of one attaining increasing subsequence.
  std::vector<std::size_t> witness;
};

struct JumpPair {
  std::size_t s = 0;
  std::size_t t = 0;
};

struct JumpResult {
  std::size_t count = 0;
  /// s_1 < t_1 <= s_2 < t_2 <= ...; each |a_t - a_s| > lambda strictly.
  std::vector<JumpPair> pairs;
};

/// Largest number of grid points vq_norm accepts (the O(N^2) dynamic
/// program is exact; longer inputs are rejected rather than approximated).
inline constexpr std::size_t kMaxSequencePoints = 1u << 16;

/// q-variation norm sup (|a_{n_0}|^q + sum_k |a_{n_k} - a_{n_{k-1}}|^q)^{1/q}
/// over increasing subsequences, computed exactly by dynamic programming.
/// Requires q >= 1 and a nonempty sequence.
VariationResult vq_norm(const ScalarSequence& seq, double q);

/// Brute-force reference: enumerates all 2^N - 1 nonempty increasing
/// subsequences. Rejects length > 20. Test oracle, independent of vq_norm.
VariationResult vq_norm_oracle(const ScalarSequence& seq, double q);

/// Maximum number of pairs s_1 < t_1 <= s_2 < t_2 <= ... with
/// |a_{t_k} - a_{s_k}| > lambda (strict). Greedy over the running
/// min/max window; optimal by an exchange argument. Requires lambda > 0.
JumpResult jump_count(const ScalarSequence& seq, double lambda);

/// Exact maximum by exhaustive recursion over pair systems (memoized).
/// Rejects length > 14. Test oracle.
JumpResult jump_count_oracle(const ScalarSequence& seq, double lambda);

struct RefineResult {
  double value = 0.0;   // v_q on the finest grid reached; lower bound of V_q
  int rounds = 0;       // bisection rounds that moved the value by >= rel_tol
  std::size_t grid_size = 0;
  bool converged = false;
};

/// Approximates the continuous V_q norm of a family t -> family(t) by
/// evaluating v_q on bisection-refined grids. Stops once one refinement
/// round increases the value by a relative factor < rel_tol; gives up
/// (converged=false) when the grid would exceed kMaxSequencePoints.
/// The reported value is always a certified lower bound of V_q.
RefineResult refine_vq(const std::function<double(double)>& family,
                       std::vector<double> coarse_grid, double q,
                       double rel_tol);

/// Recomputes (|a_{w_0}|^q + sum |a_{w_k} - a_{w_{k-1}}|^q)^{1/q} over a
/// witness; used to check VariationResult invariants.
double variation_over_witness(const ScalarSequence& seq,
                              const std::vector<std::size_t>& witness,
                              double q);

}  // namespace varlab
