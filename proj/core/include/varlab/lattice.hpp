#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "varlab/variation.hpp"

namespace varlab {

/// Finite measure space: labeled atoms with strictly positive weights.
struct MeasureSpace {
  std::vector<std::string> points;
  std::vector<double> weights;

  static MeasureSpace counting(std::size_t n);
  static MeasureSpace weighted(std::vector<double> w);

  std::size_t size() const { return weights.size(); }
  double total_mass() const;
  void validate() const;
  bool same_as(const MeasureSpace& other) const;  // sizes and weights equal
};

/// Scalar-valued function on the product Omega x Sigma; the concrete face of
/// f in L^p(Omega; B) with B = L^r(Sigma). Rows index omega, columns sigma.
struct LatticeFunction {
  MeasureSpace omega;
  MeasureSpace sigma;
  Eigen::MatrixXd values;

  static LatticeFunction zero(const MeasureSpace& om, const MeasureSpace& sg);
  /// Indicator of a single atom pair.
  static LatticeFunction delta(const MeasureSpace& om, const MeasureSpace& sg,
                               std::size_t i, std::size_t j);

  void validate() const;
};

/// One lattice function per grid index, all on the same Omega x Sigma.
struct LatticeFamily {
  std::vector<double> grid;
  std::vector<LatticeFunction> members;

  void validate() const;
};

/// (sum_w mu(w) (sum_s nu(s)|f(w,s)|^r)^{p/r})^{1/p}. Requires p > 1, r >= 1.
double mixed_norm(const LatticeFunction& f, double p, double r);

/// Pointwise v_q of the scalar sequence t -> member_t(w,s), then L^r in
/// sigma, then L^p in omega. The composition order is fixed and never
/// permuted. q >= 1 accepted; the covering theorems need q > 2.
double lattice_variation_norm(const LatticeFamily& fam, double p, double q,
                              double r);

/// Same composition with sup_t |.| in place of v_q.
double lattice_maximal_norm(const LatticeFamily& fam, double p, double r);

/// Pointwise v_q values as a lattice function (diagnostic / jump profiles).
LatticeFunction pointwise_variation(const LatticeFamily& fam, double q);

// Self-describing text format: "omega_weights ...", "sigma_weights ...",
// then row-major values, one omega row per line.
void write_lattice_function(std::ostream& os, const LatticeFunction& f);
LatticeFunction read_lattice_function(std::istream& is);
void save_lattice_function(const std::string& path, const LatticeFunction& f);
LatticeFunction load_lattice_function(const std::string& path);

}  // namespace varlab
