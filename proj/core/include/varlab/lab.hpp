#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "varlab/lattice.hpp"
#include "varlab/operators.hpp"
#include "varlab/report.hpp"
#include "varlab/weights.hpp"

namespace varlab {

enum class ExperimentKind {
  variational_Z,
  variational_ergodic,
  variational_semigroup_discrete,
  variational_semigroup_continuous,
  maximal,
  square_function,
  jump_profile,
  convergence,
  weighted_variational,
  ell1_probe,
};

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

enum class EnsembleKind {
  gaussian,
  rademacher,
  spikes,
  low_frequency,
  delta,  // deterministic e_{0,0}, for single-function profiles
  all,    // the four random arms together
};

std::string to_string(EnsembleKind k);
EnsembleKind ensemble_kind_from_string(const std::string& s);

struct EnsembleSpec {
  int count = 100;
  EnsembleKind generator = EnsembleKind::all;
  std::uint64_t seed = 1;
};

/// A grid with its originating expression, so configs round-trip byte-exactly.
struct GridSpec {
  std::string expr;
  std::vector<double> points;

  static GridSpec parse(const std::string& expr);  // "a..b", "logspace(a,b,n)",
                                                   // "linspace(a,b,n)", "x,y,z"
  static GridSpec from_points(std::vector<double> pts);
  bool empty() const { return points.empty(); }
  std::string canonical() const;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::variational_ergodic;
  std::string operator_spec;
  std::string operator_type = "auto";  // kernel | generator | auto
  std::string family = "auto";         // averages|ergodic|powers|semigroup|auto
  double p = 2.0;
  double q = 3.0;
  double r = 2.0;
  int m = 0;
  bool q_override = false;
  int sigma_dim = 1;
  std::vector<double> sigma_weights;  // empty -> counting measure
  EnsembleSpec ensemble;
  GridSpec index_grid;
  GridSpec time_grid;
  std::vector<double> lambdas;  // jump_profile
  std::vector<double> ks;       // jump_profile
  std::string weight_fixture;   // weighted_variational
  int ap_max_len = 512;
  std::vector<std::int64_t> d_grid;  // ell1_probe
  int n_max = 64;
  double quad_tol = 1e-10;
  double tail_tol = 1e-6;

  /// Structural checks: parameter ranges per kind (the covering theorems
  /// demand q > 2 for variational kinds unless q_override is set; r > 1
  /// except for the ell1 probe; averaging windows at most N/4; ...).
  /// Throws ValidationError naming the offending field.
  void validate() const;
};

struct ConstantEstimate {
  double sup_ratio = 0.0;
  int argmax_index = -1;
  std::string argmax_arm;
  std::uint64_t seed = 0;
  int ensemble_size = 0;
  double q50 = 0.0, q90 = 0.0, q99 = 0.0;
  std::vector<double> ratios;          // per member, index order
  std::vector<double> maximal_ratios;  // memberwise sup-composition ratios
  std::vector<std::string> arms;       // per member generator arm
  std::vector<double> stability_trace; // prefix sup, nondecreasing
  bool saturated = false;              // last-quarter increase < 5%
  double last_quarter_increase = 0.0;
  // certificate trail
  double analyticity_index = 0.0;
  int analyticity_n = 0;

  Report to_report(const ExperimentConfig& cfg) const;
};

struct JumpReportRow {
  int member = 0;
  double lambda = 0.0;
  double k = 0.0;
  double tail_mass = 0.0;     // mu x nu {N > K}
  double bound = 0.0;         // ||f||_{L^p(B)}^p / (lambda^p K^{p/q})
  double scaled_bound = 0.0;  // C_est^p * bound with the r=p composition
};

/// Ensemble supremum of lattice_variation_norm(op family of f) / mixed_norm(f).
/// Deterministic given the seed for any worker count.
ConstantEstimate estimate_variational_constant(const ExperimentConfig& cfg);

/// Same with the family (n^m Delta_n^m f)_{n>=1}; m = 0 coincides with the
/// powers family.
ConstantEstimate estimate_m_order_constant(const ExperimentConfig& cfg);

std::vector<JumpReportRow> jump_profile(const ExperimentConfig& cfg);
Report jump_profile_report(const ExperimentConfig& cfg);

Report convergence_profile(const ExperimentConfig& cfg);

Report ell1_probe(const ExperimentConfig& cfg);

struct WeightedEstimate {
  ConstantEstimate estimate;
  double ap_characteristic = 0.0;
  Report to_report(const ExperimentConfig& cfg) const;
};

WeightedEstimate weighted_variational_probe(const ExperimentConfig& cfg);

Report square_function_report(const ExperimentConfig& cfg);

/// Dispatch on cfg.kind.
Report run_experiment(const ExperimentConfig& cfg);

// exposed for tests: the deterministic ensemble member generator
LatticeFunction make_ensemble_member(const MeasureSpace& omega,
                                     const MeasureSpace& sigma,
                                     EnsembleKind kind, std::uint64_t seed,
                                     std::uint64_t arm_id,
                                     std::uint64_t index);

/// The family an estimate builds for one member, exposed for oracle tests.
LatticeFamily build_family(const ExperimentConfig& cfg,
                           const OperatorVariant& op,
                           const LatticeFunction& f);

}  // namespace varlab
