#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "varlab/lattice.hpp"

namespace varlab {

/// Recomputable contraction certificates of the absolute kernel. If both
/// hold, T is contractively regular on every L^p by interpolation.
struct ContractionCertificates {
  bool l1_contractive = false;
  bool linf_contractive = false;
  bool contractively_regular() const {
    return l1_contractive && linf_contractive;
  }
};

/// Kernel operator (Tf)(i) = sum_j K(i,j) f(j) on a finite measure space.
struct RegularOperator {
  MeasureSpace space;
  Eigen::MatrixXd kernel;
  ContractionCertificates certificates;

  Eigen::VectorXd apply(const Eigen::VectorXd& f) const { return kernel * f; }
  /// Acts on the omega factor, columnwise over sigma.
  LatticeFunction apply(const LatticeFunction& f) const;
};

/// Certifies via |K|: column condition sum_i mu_i|K(i,j)| <= mu_j for L^1,
/// row condition sum_j |K(i,j)| <= 1 for L^inf. Construction never fails;
/// the flags may simply be false.
RegularOperator build_regular_operator(Eigen::MatrixXd kernel,
                                       MeasureSpace space);

/// Matrix semigroup T_t = e^{-tA}. Evaluations are cached; the cache is safe
/// under concurrent read with single-writer insertion and results do not
/// depend on scheduling.
class Generator {
 public:
  Generator() = default;
  Generator(MeasureSpace space, Eigen::MatrixXd a);

  const MeasureSpace& space() const { return space_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }

  /// e^{-tA}, t >= 0. Throws NumericError on overflow.
  Eigen::MatrixXd exp_at(double t) const;

  /// T_t viewed as a kernel operator with recomputed certificates.
  RegularOperator operator_at(double t) const;

 private:
  MeasureSpace space_;
  Eigen::MatrixXd matrix_;
  struct Cache {
    std::mutex mu;
    std::map<double, Eigen::MatrixXd> entries;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

/// Difference order m and power n of Delta_n^m(T) = T^n (T - I)^m.
struct DeltaSpec {
  int m = 0;
  int n = 0;
};

// ---------------------------------------------------------------------------
// Averaging operators

/// A_n f(j) = (1/(n+1)) sum_{k=0}^n f(j+k) with j+k taken cyclically on Z_N
/// (the omega factor of f).
LatticeFunction averaging_Z(const LatticeFunction& f, int n);

/// Samples of a function of one real variable on a uniform grid.
struct SampledSignal {
  double start = 0.0;
  double step = 1.0;
  std::vector<double> values;
};

/// A_t f(s) = (1/t) int_0^t f(r+s) dr by trapezoid quadrature; output is the
/// sub-grid where the window fits. O(h^2) for smooth f, exact on affine f.
/// Rejects t < step.
SampledSignal averaging_R_sampled(const SampledSignal& f, double t);

// ---------------------------------------------------------------------------
// Ergodic averages and differences

/// M_n(T) f = (1/(n+1)) sum_{k=0}^n T^k f via the running recurrence.
LatticeFunction ergodic_average_discrete(const RegularOperator& T, int n,
                                         const LatticeFunction& f);

/// M_n(T) f for every n in 0..n_max (ascending), one pass.
std::vector<LatticeFunction> ergodic_average_prefix(const RegularOperator& T,
                                                    int n_max,
                                                    const LatticeFunction& f);

struct QuadResult {
  LatticeFunction value;
  double error_bound = 0.0;
  int evaluations = 0;
};

/// M_t(T) f = (1/t) int_0^t T_s f ds by adaptive Simpson quadrature.
QuadResult ergodic_average_continuous(const Generator& g, double t,
                                      const LatticeFunction& f,
                                      double tol = 1e-10);

/// T_t f = e^{-tA} f applied columnwise over sigma.
LatticeFunction semigroup_eval(const Generator& g, double t,
                               const LatticeFunction& f);

/// Delta_n^m(T) f = T^n (T - I)^m f.
LatticeFunction delta_power(const RegularOperator& T, DeltaSpec spec,
                            const LatticeFunction& f);

// ---------------------------------------------------------------------------
// Operator norms and analyticity

struct OperatorNormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = true;
};

/// L^p(mu) -> L^p(mu) norm of the modulus kernel |M| (which dominates the
/// norm of M and is attained on nonnegative vectors). Exact at p in {1,inf}
/// (pass p = infinity()); power iteration on the positivity-ordered problem
/// otherwise, tolerance 1e-8, at most 10^4 iterations.
OperatorNormEstimate lp_operator_norm_abs(const Eigen::MatrixXd& M,
                                          const std::vector<double>& mu,
                                          double p);

struct AnalyticityResult {
  double index = 0.0;            // max over 1<=n<=N of n*||T^n - T^{n-1}||
  std::vector<double> values;    // values[n-1] = n*||T^n - T^{n-1}||
  double trend_ratio = 0.0;      // max(last quarter) / max(first 3 quarters)
  bool flat_trend = false;       // trend_ratio <= 1.1
  int n_used = 0;
  bool converged = true;         // all norm estimates converged
};

/// max_{1<=n<=N} n*||T^n - T^{n-1}||_{L^p->L^p}. The paper's analyticity is
/// an asymptotic property; on finite kernels it is operationalized as a flat
/// trend of the index over the tested range, with N reported.
AnalyticityResult analyticity_index(const RegularOperator& T, double p, int N);

// ---------------------------------------------------------------------------
// Square functions

struct SquareFunctionResult {
  LatticeFunction values;   // pointwise (sum ...)^(1/2)
  double tail_ratio = 0.0;  // last-term / total, max over atoms
  bool tail_ok = true;      // tail_ratio <= 1e-6
};

/// Pointwise (sum_{n=0}^{N_max} (1/(n+1)) |(n+1)^{m+1} Delta_n^{m+1} f|^2)^{1/2};
/// for m = 0 this is (sum (n+1)|T^{n+1}f - T^n f|^2)^{1/2}.
SquareFunctionResult square_function_discrete(const RegularOperator& T,
                                              const LatticeFunction& f, int m,
                                              int n_max);

struct ContinuousSquareFunctionResult {
  LatticeFunction values;
  double achieved_tol = 0.0;
  bool converged = true;
};

/// Pointwise (int_0^inf |s^{m+1} A^{m+1} e^{-sA} f|^2 ds/s)^{1/2} by adaptive
/// composite quadrature in log s with expanding cutoffs.
ContinuousSquareFunctionResult square_function_continuous(
    const Generator& g, const LatticeFunction& f, int m, double quad_tol);

// ---------------------------------------------------------------------------
// Mean ergodic projection

struct ProjectionResult {
  LatticeFunction value;
  bool exact = true;      // false: long-average fallback was used
  double defect = 0.0;    // diagonalization residual when rejected
};

/// Projection onto the fixed space of T (eigenvalue 1) along the
/// complementary invariant subspace, from the eigendecomposition of the
/// kernel. Non-diagonalizable kernels fall back to a long Cesaro average
/// flagged approximate.
ProjectionResult mean_projection(const RegularOperator& T,
                                 const LatticeFunction& f);

/// Projection onto N(A) (eigenvalue 0 of the generator).
ProjectionResult mean_projection(const Generator& g, const LatticeFunction& f);

// ---------------------------------------------------------------------------
// Algebraic identity residuals

struct IdentityResiduals {
  double decomposition = 0.0;
  double doubling = 0.0;
};

/// Sup-norm residuals of two identities:
///   T^{2n+1} = A_n - (n+1)/n B_n + (2n+1)/n M_{2n} - (n+1)/n M_n
///     with A_n = (1/n) sum_{j=n}^{2n} (j+1) T^j (T-I), B_n = T^{2n+1} - T^n,
///   Delta_n^{m+1}(T_{2t}) = sum_k binom(m+1,k) Delta_{2n+k}^{m+1}(T_t).
/// Both vanish identically; residuals beyond 1e-10 indicate a broken
/// operator pipeline. Requires n >= 1.
IdentityResiduals identity_residuals(const RegularOperator& T,
                                     const LatticeFunction& f, int n, int m,
                                     const Generator& g, double t);

// ---------------------------------------------------------------------------
// Built-in operators

/// Cyclic shift on Z_N: (Tf)(j) = f(j+1 mod N).
RegularOperator make_shift(std::size_t n);
/// Lazy symmetric walk on the N-cycle: I/2 + (S + S^{-1})/4.
RegularOperator make_lazy_walk(std::size_t n);
/// Unnormalized graph Laplacian of the N-cycle as a semigroup generator.
Generator make_cycle_laplacian(std::size_t n);
/// Sinkhorn-normalized random positive matrix; deterministic in the seed.
RegularOperator make_doubly_stochastic_random(std::size_t n,
                                              std::uint64_t seed);
/// Birth-death chain with up-probability p and reflecting boundary
/// self-loops, carried on its reversible measure.
RegularOperator make_birth_death(std::size_t n, double p);

using OperatorVariant = std::variant<RegularOperator, Generator>;

/// Parses "shift(64)", "lazy_walk(64)", "cycle_laplacian(32)",
/// "doubly_stochastic_random(8,42)", "birth_death(16,0.3)" or a fixture
/// path. Fixture kernels use the lattice text format with square values and
/// sigma_weights equal to omega_weights; pass type "generator" to read the
/// matrix as a semigroup generator.
OperatorVariant make_operator(const std::string& spec,
                              const std::string& type = "auto");

/// The built-in keywords, for diagnostics.
std::vector<std::string> builtin_operator_names();

}  // namespace varlab
