#include "varlab/lattice.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "varlab/errors.hpp"

namespace varlab {

namespace {

double abs_pow(double x, double e) {
  double a = std::abs(x);
  if (e == 1.0) return a;
  if (e == 2.0) return a * a;
  return std::pow(a, e);
}

}  // namespace

MeasureSpace MeasureSpace::counting(std::size_t n) {
  MeasureSpace m;
  m.points.reserve(n);
  m.weights.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) m.points.push_back(std::to_string(i));
  return m;
}

MeasureSpace MeasureSpace::weighted(std::vector<double> w) {
  MeasureSpace m;
  m.points.reserve(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) m.points.push_back(std::to_string(i));
  m.weights = std::move(w);
  m.validate();
  return m;
}

double MeasureSpace::total_mass() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

void MeasureSpace::validate() const {
  if (weights.empty()) throw ValidationError("measure space must be nonempty");
  if (points.size() != weights.size())
    throw ValidationError("labels and weights differ in length");
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w))
      throw ValidationError("measure weights must be positive and finite",
                            "weights");
}

bool MeasureSpace::same_as(const MeasureSpace& other) const {
  return weights == other.weights;
}

LatticeFunction LatticeFunction::zero(const MeasureSpace& om,
                                      const MeasureSpace& sg) {
  LatticeFunction f;
  f.omega = om;
  f.sigma = sg;
  f.values = Eigen::MatrixXd::Zero(Eigen::Index(om.size()), Eigen::Index(sg.size()));
  return f;
}

LatticeFunction LatticeFunction::delta(const MeasureSpace& om,
                                       const MeasureSpace& sg, std::size_t i,
                                       std::size_t j) {
  LatticeFunction f = zero(om, sg);
  f.values(Eigen::Index(i), Eigen::Index(j)) = 1.0;
  return f;
}

void LatticeFunction::validate() const {
  omega.validate();
  sigma.validate();
  if (values.rows() != Eigen::Index(omega.size()) ||
      values.cols() != Eigen::Index(sigma.size()))
    throw ValidationError("value matrix does not match the measure spaces");
  if (!values.allFinite())
    throw ValidationError("lattice function entries must be finite");
}

void LatticeFamily::validate() const {
  if (members.empty()) throw ValidationError("family must be nonempty");
  if (grid.size() != members.size())
    throw ValidationError("grid and members differ in length");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw ValidationError("family grid must be strictly increasing");
  members.front().validate();
  for (const auto& m : members) {
    if (!m.omega.same_as(members.front().omega) ||
        !m.sigma.same_as(members.front().sigma))
      throw ValidationError("family members must share measure spaces");
  }
}

double mixed_norm(const LatticeFunction& f, double p, double r) {
  if (!(p > 1.0)) throw ValidationError("mixed_norm requires p > 1", "p");
  if (!(r >= 1.0)) throw ValidationError("mixed_norm requires r >= 1", "r");
  f.validate();
  const auto& mu = f.omega.weights;
  const auto& nu = f.sigma.weights;
  double outer = 0.0;
  for (Eigen::Index i = 0; i < f.values.rows(); ++i) {
    double inner = 0.0;
    for (Eigen::Index j = 0; j < f.values.cols(); ++j)
      inner += nu[std::size_t(j)] * abs_pow(f.values(i, j), r);
    outer += mu[std::size_t(i)] * std::pow(inner, p / r);
  }
  return std::pow(outer, 1.0 / p);
}

LatticeFunction pointwise_variation(const LatticeFamily& fam, double q) {
  fam.validate();
  const auto& first = fam.members.front();
  LatticeFunction out = LatticeFunction::zero(first.omega, first.sigma);
  ScalarSequence seq;
  seq.indices = fam.grid;
  seq.values.resize(fam.members.size());
  for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
      for (std::size_t t = 0; t < fam.members.size(); ++t)
        seq.values[t] = fam.members[t].values(i, j);
      out.values(i, j) = vq_norm(seq, q).norm;
    }
  }
  return out;
}

double lattice_variation_norm(const LatticeFamily& fam, double p, double q,
                              double r) {
  return mixed_norm(pointwise_variation(fam, q), p, r);
}

double lattice_maximal_norm(const LatticeFamily& fam, double p, double r) {
  fam.validate();
  const auto& first = fam.members.front();
  LatticeFunction sup = LatticeFunction::zero(first.omega, first.sigma);
  for (const auto& m : fam.members)
    sup.values = sup.values.cwiseMax(m.values.cwiseAbs());
  return mixed_norm(sup, p, r);
}

namespace {

void write_row(std::ostream& os, const double* v, std::size_t n) {
  char buf[40];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    os << (i ? " " : "") << buf;
  }
  os << "\n";
}

std::vector<double> parse_doubles(std::istringstream& line, int lineno) {
  std::vector<double> out;
  double x;
  while (line >> x) out.push_back(x);
  if (!line.eof())
    throw ValidationError("malformed number", "", lineno);
  return out;
}

}  // namespace

void write_lattice_function(std::ostream& os, const LatticeFunction& f) {
  f.validate();
  os << "omega_weights ";
  write_row(os, f.omega.weights.data(), f.omega.size());
  os << "sigma_weights ";
  write_row(os, f.sigma.weights.data(), f.sigma.size());
  std::vector<double> row(f.sigma.size());
  for (Eigen::Index i = 0; i < f.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < f.values.cols(); ++j)
      row[std::size_t(j)] = f.values(i, j);
    write_row(os, row.data(), row.size());
  }
}

LatticeFunction read_lattice_function(std::istream& is) {
  std::string line, tag;
  int lineno = 0;

  auto next_line = [&]() -> std::istringstream {
    if (!std::getline(is, line))
      throw ValidationError("unexpected end of lattice fixture", "", lineno);
    ++lineno;
    return std::istringstream(line);
  };

  auto header = next_line();
  header >> tag;
  if (tag != "omega_weights")
    throw ValidationError("expected omega_weights header", "", lineno);
  std::vector<double> om = parse_doubles(header, lineno);

  auto header2 = next_line();
  header2 >> tag;
  if (tag != "sigma_weights")
    throw ValidationError("expected sigma_weights header", "", lineno);
  std::vector<double> sg = parse_doubles(header2, lineno);

  LatticeFunction f;
  f.omega = MeasureSpace::weighted(std::move(om));
  f.sigma = MeasureSpace::weighted(std::move(sg));
  f.values.resize(Eigen::Index(f.omega.size()), Eigen::Index(f.sigma.size()));
  for (Eigen::Index i = 0; i < f.values.rows(); ++i) {
    auto row = next_line();
    std::vector<double> vals = parse_doubles(row, lineno);
    if (vals.size() != f.sigma.size())
      throw ValidationError("row length does not match sigma_weights", "",
                            lineno);
    for (Eigen::Index j = 0; j < f.values.cols(); ++j)
      f.values(i, j) = vals[std::size_t(j)];
  }
  f.validate();
  return f;
}

void save_lattice_function(const std::string& path, const LatticeFunction& f) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_lattice_function(os, f);
}

LatticeFunction load_lattice_function(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open fixture " + path);
  return read_lattice_function(is);
}

}  // namespace varlab
