#include "varlab/operators.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "varlab/errors.hpp"
#include "varlab/rng.hpp"

namespace varlab {

namespace {

constexpr double kCertSlack = 1e-10;

double binom(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * double(n - k + i) / double(i);
  return c;
}

Eigen::MatrixXd apply_difference_power(const Eigen::MatrixXd& K,
                                       Eigen::MatrixXd v, int m) {
  for (int i = 0; i < m; ++i) v = K * v - v;
  return v;
}

}  // namespace

LatticeFunction RegularOperator::apply(const LatticeFunction& f) const {
  if (!f.omega.same_as(space))
    throw ValidationError("operator and function live on different spaces");
  LatticeFunction out = f;
  out.values = kernel * f.values;
  return out;
}

RegularOperator build_regular_operator(Eigen::MatrixXd kernel,
                                       MeasureSpace space) {
  space.validate();
  const Eigen::Index n = Eigen::Index(space.size());
  if (kernel.rows() != n || kernel.cols() != n)
    throw ValidationError("kernel must be square and match the space");
  if (!kernel.allFinite())
    throw ValidationError("kernel entries must be finite");

  RegularOperator T;
  T.certificates.linf_contractive = true;
  T.certificates.l1_contractive = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (kernel.row(i).cwiseAbs().sum() > 1.0 + kCertSlack)
      T.certificates.linf_contractive = false;
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    double col = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      col += space.weights[std::size_t(i)] * std::abs(kernel(i, j));
    if (col > space.weights[std::size_t(j)] * (1.0 + kCertSlack))
      T.certificates.l1_contractive = false;
  }
  T.space = std::move(space);
  T.kernel = std::move(kernel);
  return T;
}

Generator::Generator(MeasureSpace space, Eigen::MatrixXd a)
    : space_(std::move(space)), matrix_(std::move(a)) {
  space_.validate();
  const Eigen::Index n = Eigen::Index(space_.size());
  if (matrix_.rows() != n || matrix_.cols() != n)
    throw ValidationError("generator matrix must be square and match the space");
  if (!matrix_.allFinite())
    throw ValidationError("generator entries must be finite");
}

Eigen::MatrixXd Generator::exp_at(double t) const {
  if (!(t >= 0.0)) throw ValidationError("semigroup time must be >= 0", "t");
  {
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto it = cache_->entries.find(t);
    if (it != cache_->entries.end()) return it->second;
  }
  Eigen::MatrixXd e = (-t * matrix_).exp();
  if (!e.allFinite())
    throw NumericError("matrix exponential overflow at t*||A||_1 = " +
                       std::to_string(t * matrix_.cwiseAbs().colwise().sum().maxCoeff()));
  std::lock_guard<std::mutex> lock(cache_->mu);
  auto [it, inserted] = cache_->entries.emplace(t, std::move(e));
  return it->second;
}

RegularOperator Generator::operator_at(double t) const {
  return build_regular_operator(exp_at(t), space_);
}

LatticeFunction averaging_Z(const LatticeFunction& f, int n) {
  if (n < 0) throw ValidationError("averaging order must be >= 0", "n");
  f.validate();
  const Eigen::Index N = f.values.rows();
  LatticeFunction out = f;
  out.values.setZero();
  for (Eigen::Index j = 0; j < N; ++j) {
    for (int k = 0; k <= n; ++k)
      out.values.row(j) += f.values.row((j + k) % N);
  }
  out.values /= double(n + 1);
  return out;
}

SampledSignal averaging_R_sampled(const SampledSignal& f, double t) {
  const double h = f.step;
  if (!(h > 0.0)) throw ValidationError("sample step must be > 0");
  if (!(t >= h))
    throw ValidationError("window t is below the sample step (unresolvable)",
                          "t");
  const std::size_t n = f.values.size();
  if (n < 2) throw ValidationError("need at least two samples");

  int full = int(std::floor(t / h + 1e-12));
  double frac = t - full * h;
  if (frac < 1e-12 * h) frac = 0.0;

  std::size_t need = std::size_t(full) + (frac > 0.0 ? 1 : 0);
  if (need >= n) throw ValidationError("window does not fit inside the grid");

  SampledSignal out;
  out.start = f.start;
  out.step = h;
  const std::size_t n_out = n - need;
  out.values.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    double acc = 0.0;
    for (int k = 0; k < full; ++k)
      acc += 0.5 * h * (f.values[i + k] + f.values[i + k + 1]);
    if (frac > 0.0) {
      double f_lo = f.values[i + std::size_t(full)];
      double f_hi = f.values[i + std::size_t(full) + 1];
      double f_end = f_lo + (frac / h) * (f_hi - f_lo);
      acc += 0.5 * frac * (f_lo + f_end);
    }
    out.values[i] = acc / t;
  }
  return out;
}

LatticeFunction ergodic_average_discrete(const RegularOperator& T, int n,
                                         const LatticeFunction& f) {
  if (n < 0) throw ValidationError("ergodic average order must be >= 0", "n");
  LatticeFunction acc = f;  // M_0 = f
  Eigen::MatrixXd power = f.values;
  for (int k = 1; k <= n; ++k) {
    power = T.kernel * power;  // T^k f
    acc.values = (double(k) * acc.values + power) / double(k + 1);
  }
  return acc;
}

std::vector<LatticeFunction> ergodic_average_prefix(const RegularOperator& T,
                                                    int n_max,
                                                    const LatticeFunction& f) {
  if (n_max < 0) throw ValidationError("n_max must be >= 0");
  std::vector<LatticeFunction> out;
  out.reserve(std::size_t(n_max) + 1);
  LatticeFunction acc = f;
  out.push_back(acc);
  Eigen::MatrixXd power = f.values;
  for (int k = 1; k <= n_max; ++k) {
    power = T.kernel * power;
    acc.values = (double(k) * acc.values + power) / double(k + 1);
    out.push_back(acc);
  }
  return out;
}

namespace {

struct SimpsonState {
  const Generator* g;
  const Eigen::MatrixXd* h;
  int evals = 0;
  double err = 0.0;

  Eigen::MatrixXd eval(double s) {
    ++evals;
    if (s == 0.0) return *h;
    return g->exp_at(s) * (*h);
  }
};

Eigen::MatrixXd simpson_adapt(SimpsonState& st, double a, double b,
                              const Eigen::MatrixXd& fa,
                              const Eigen::MatrixXd& fm,
                              const Eigen::MatrixXd& fb,
                              const Eigen::MatrixXd& whole, double tol,
                              int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  Eigen::MatrixXd flm = st.eval(lm), frm = st.eval(rm);
  Eigen::MatrixXd left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  Eigen::MatrixXd right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  Eigen::MatrixXd sum = left + right;
  double err = (sum - whole).cwiseAbs().maxCoeff() / 15.0;
  if (err <= tol || depth >= 24) {
    st.err += err;
    return sum + (sum - whole) / 15.0;
  }
  return simpson_adapt(st, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
         simpson_adapt(st, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

}  // namespace

QuadResult ergodic_average_continuous(const Generator& g, double t,
                                      const LatticeFunction& f, double tol) {
  if (!(t > 0.0)) throw ValidationError("averaging time must be > 0", "t");
  f.validate();
  if (!f.omega.same_as(g.space()))
    throw ValidationError("generator and function live on different spaces");

  SimpsonState st{&g, &f.values};
  Eigen::MatrixXd fa = st.eval(0.0);
  Eigen::MatrixXd fm = st.eval(0.5 * t);
  Eigen::MatrixXd fb = st.eval(t);
  Eigen::MatrixXd whole = t / 6.0 * (fa + 4.0 * fm + fb);
  Eigen::MatrixXd integral =
      simpson_adapt(st, 0.0, t, fa, fm, fb, whole, tol * t, 0);

  QuadResult out;
  out.value = f;
  out.value.values = integral / t;
  out.error_bound = st.err / t;
  out.evaluations = st.evals;
  if (out.error_bound > tol * 10)
    throw NumericError("adaptive Simpson did not reach tolerance: achieved " +
                       std::to_string(out.error_bound));
  return out;
}

LatticeFunction semigroup_eval(const Generator& g, double t,
                               const LatticeFunction& f) {
  f.validate();
  if (!f.omega.same_as(g.space()))
    throw ValidationError("generator and function live on different spaces");
  LatticeFunction out = f;
  out.values = g.exp_at(t) * f.values;
  return out;
}

LatticeFunction delta_power(const RegularOperator& T, DeltaSpec spec,
                            const LatticeFunction& f) {
  if (spec.m < 0 || spec.n < 0)
    throw ValidationError("difference spec must be nonnegative");
  LatticeFunction out = f;
  out.values = apply_difference_power(T.kernel, f.values, spec.m);
  for (int i = 0; i < spec.n; ++i) out.values = T.kernel * out.values;
  return out;
}

OperatorNormEstimate lp_operator_norm_abs(const Eigen::MatrixXd& M,
                                          const std::vector<double>& mu,
                                          double p) {
  const Eigen::Index n = M.rows();
  if (M.cols() != n || std::size_t(n) != mu.size())
    throw ValidationError("matrix and measure dimensions disagree");
  if (!(p >= 1.0)) throw ValidationError("operator norm requires p >= 1");

  OperatorNormEstimate est;
  const bool inf_p = std::isinf(p);
  if (inf_p) {
    for (Eigen::Index i = 0; i < n; ++i)
      est.value = std::max(est.value, M.row(i).cwiseAbs().sum());
    return est;
  }
  if (p == 1.0) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double col = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        col += mu[std::size_t(i)] * std::abs(M(i, j));
      est.value = std::max(est.value, col / mu[std::size_t(j)]);
    }
    return est;
  }

  // Similarity D^{1/p} |M| D^{-1/p} reduces L^p(mu) to unweighted l^p; the
  // norm of a positive kernel is attained on nonnegative vectors, so the
  // dual power iteration converges to the global maximum.
  Eigen::MatrixXd B = M.cwiseAbs();
  for (Eigen::Index i = 0; i < n; ++i) {
    double di = std::pow(mu[std::size_t(i)], 1.0 / p);
    for (Eigen::Index j = 0; j < n; ++j) {
      double dj = std::pow(mu[std::size_t(j)], 1.0 / p);
      B(i, j) *= di / dj;
    }
  }

  const double q = p / (p - 1.0);
  const double tol = 1e-8;
  auto norm_p = [](const Eigen::VectorXd& v, double e) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
      s += std::pow(std::abs(v[i]), e);
    return std::pow(s, 1.0 / e);
  };

  Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
  x /= norm_p(x, p);
  double gamma = 0.0;
  est.converged = false;
  for (int it = 1; it <= 10000; ++it) {
    est.iterations = it;
    Eigen::VectorXd y = B * x;
    gamma = norm_p(y, p);
    if (gamma == 0.0) {
      est.value = 0.0;
      est.converged = true;
      return est;
    }
    // dual vector of y in l^p (entries nonnegative)
    Eigen::VectorXd psi(n);
    for (Eigen::Index i = 0; i < n; ++i)
      psi[i] = std::pow(y[i] / gamma, p - 1.0);
    Eigen::VectorXd z = B.transpose() * psi;
    double zq = norm_p(z, q);
    if (zq <= z.dot(x) * (1.0 + tol)) {
      est.converged = true;
      break;
    }
    for (Eigen::Index i = 0; i < n; ++i)
      x[i] = std::pow(z[i] / zq, q - 1.0);
  }
  est.value = gamma;
  return est;
}

AnalyticityResult analyticity_index(const RegularOperator& T, double p,
                                    int N) {
  if (N < 1) throw ValidationError("analyticity range must be >= 1", "N");
  AnalyticityResult res;
  res.n_used = N;
  const Eigen::Index dim = T.kernel.rows();
  Eigen::MatrixXd prev = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::MatrixXd cur = T.kernel;
  res.values.reserve(std::size_t(N));
  for (int n = 1; n <= N; ++n) {
    auto e = lp_operator_norm_abs(cur - prev, T.space.weights, p);
    if (!e.converged) res.converged = false;
    res.values.push_back(double(n) * e.value);
    if (n < N) {
      prev = cur;
      cur = T.kernel * cur;
    }
  }
  res.index = *std::max_element(res.values.begin(), res.values.end());

  int split = std::max(1, (3 * N) / 4);
  double head = 0.0, tail = 0.0;
  for (int n = 1; n <= N; ++n) {
    double v = res.values[std::size_t(n - 1)];
    if (n <= split)
      head = std::max(head, v);
    else
      tail = std::max(tail, v);
  }
  if (N < 4 || head == 0.0) {
    res.trend_ratio = (tail > 0.0) ? std::numeric_limits<double>::infinity()
                                   : 1.0;
  } else {
    res.trend_ratio = tail / head;
  }
  res.flat_trend = res.trend_ratio <= 1.1;
  return res;
}

SquareFunctionResult square_function_discrete(const RegularOperator& T,
                                              const LatticeFunction& f, int m,
                                              int n_max) {
  if (n_max < 1) throw ValidationError("n_max must be >= 1");
  if (m < 0) throw ValidationError("order m must be >= 0");
  f.validate();

  Eigen::MatrixXd h = apply_difference_power(T.kernel, f.values, m + 1);
  Eigen::ArrayXXd acc = Eigen::ArrayXXd::Zero(h.rows(), h.cols());
  Eigen::ArrayXXd last;
  for (int n = 0; n <= n_max; ++n) {
    double w = std::pow(double(n + 1), 2 * m + 1);
    last = w * h.array().square();
    acc += last;
    if (n < n_max) h = T.kernel * h;
  }

  SquareFunctionResult out;
  out.values = f;
  out.values.values = acc.sqrt().matrix();
  double total = acc.sum();
  out.tail_ratio = (total > 0.0) ? last.sum() / total : 0.0;
  out.tail_ok = out.tail_ratio <= 1e-6;
  return out;
}

ContinuousSquareFunctionResult square_function_continuous(
    const Generator& g, const LatticeFunction& f, int m, double quad_tol) {
  if (!(quad_tol > 0.0)) throw ValidationError("quad_tol must be > 0");
  if (m < 0) throw ValidationError("order m must be >= 0");
  f.validate();
  if (!f.omega.same_as(g.space()))
    throw ValidationError("generator and function live on different spaces");

  ContinuousSquareFunctionResult out;
  out.values = f;

  // h = A^{m+1} f commutes with the semigroup, so each node costs one expm.
  Eigen::MatrixXd h = f.values;
  for (int i = 0; i <= m; ++i) h = g.matrix() * h;
  if (h.cwiseAbs().maxCoeff() == 0.0) {
    out.values.values.setZero();
    out.achieved_tol = 0.0;
    return out;
  }

  auto integrand = [&](double u) -> Eigen::ArrayXXd {
    double s = std::exp(u);
    Eigen::MatrixXd G = (-s * g.matrix()).exp() * h;
    double scale = std::pow(s, m + 1);
    return (scale * G.array()).square();
  };

  double anorm = g.matrix().cwiseAbs().colwise().sum().maxCoeff();
  double s_lo = 1e-6 / std::max(anorm, 1.0);
  double s_hi = 4.0 / std::max(anorm, 1e-8);

  auto panel_integral = [&](double ulo, double uhi, int panels) {
    double du = (uhi - ulo) / (2 * panels);
    Eigen::ArrayXXd acc = integrand(ulo) + integrand(uhi);
    for (int k = 1; k < 2 * panels; ++k)
      acc += (k % 2 ? 4.0 : 2.0) * integrand(ulo + k * du);
    return (acc * du / 3.0).eval();
  };

  // expand the upper cutoff until the marginal chunk is negligible
  Eigen::ArrayXXd total =
      panel_integral(std::log(s_lo), std::log(s_hi), 32);
  for (int round = 0; round < 60; ++round) {
    Eigen::ArrayXXd chunk =
        panel_integral(std::log(s_hi), std::log(2.0 * s_hi), 16);
    total += chunk;
    s_hi *= 2.0;
    double rel = chunk.maxCoeff() / std::max(total.maxCoeff(), 1e-300);
    if (rel < 0.5 * quad_tol) break;
    if (round == 59 || !total.allFinite()) {
      out.converged = false;
      out.achieved_tol = rel;
      out.values.values = total.max(0.0).sqrt().matrix();
      return out;
    }
  }
  // expand the lower cutoff; integrand ~ s^{2m+2} there
  for (int round = 0; round < 40; ++round) {
    Eigen::ArrayXXd chunk =
        panel_integral(std::log(0.5 * s_lo), std::log(s_lo), 8);
    total += chunk;
    s_lo *= 0.5;
    double rel = chunk.maxCoeff() / std::max(total.maxCoeff(), 1e-300);
    if (rel < 0.5 * quad_tol) break;
  }
  // refine until the Simpson value stabilizes
  double lo = std::log(s_lo), hi = std::log(s_hi);
  int panels = std::max(64, int(8.0 * (hi - lo)));
  Eigen::ArrayXXd prev = panel_integral(lo, hi, panels);
  for (int round = 0; round < 8; ++round) {
    panels *= 2;
    Eigen::ArrayXXd next = panel_integral(lo, hi, panels);
    double rel = (next - prev).abs().maxCoeff() /
                 std::max(next.maxCoeff(), 1e-300);
    prev = next;
    out.achieved_tol = rel;
    if (rel < quad_tol) break;
    if (round == 7) out.converged = false;
  }
  out.values.values = prev.max(0.0).sqrt().matrix();
  return out;
}

namespace {

struct EigenDecomposition {
  Eigen::MatrixXcd vectors;
  Eigen::VectorXcd values;
  Eigen::MatrixXcd inverse;
  double defect = 0.0;
  bool ok = false;
};

EigenDecomposition decompose(const Eigen::MatrixXd& K) {
  EigenDecomposition d;
  Eigen::EigenSolver<Eigen::MatrixXd> es(K);
  if (es.info() != Eigen::Success) return d;
  d.vectors = es.eigenvectors();
  d.values = es.eigenvalues();
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(d.vectors);
  if (!lu.isInvertible()) {
    d.defect = 1.0;
    return d;
  }
  d.inverse = lu.inverse();
  Eigen::MatrixXcd recon =
      d.vectors * d.values.asDiagonal() * d.inverse;
  double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
  d.defect = (recon - K.cast<std::complex<double>>()).cwiseAbs().maxCoeff() /
             scale;
  d.ok = d.defect <= 1e-8;
  return d;
}

LatticeFunction project_with(const EigenDecomposition& d, double target,
                             const LatticeFunction& f) {
  const Eigen::Index n = d.values.size();
  Eigen::VectorXcd sel = Eigen::VectorXcd::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k)
    if (std::abs(d.values[k] - std::complex<double>(target, 0.0)) <= 1e-8)
      sel[k] = 1.0;
  Eigen::MatrixXcd P = d.vectors * sel.asDiagonal() * d.inverse;
  LatticeFunction out = f;
  out.values = (P * f.values.cast<std::complex<double>>()).real();
  return out;
}

}  // namespace

ProjectionResult mean_projection(const RegularOperator& T,
                                 const LatticeFunction& f) {
  f.validate();
  auto d = decompose(T.kernel);
  ProjectionResult res;
  if (d.ok) {
    res.value = project_with(d, 1.0, f);
    res.exact = true;
    res.defect = d.defect;
    return res;
  }
  // long Cesaro average, flagged approximate; gap from the (possibly
  // inaccurate) spectrum, capped
  double gap = 1.0;
  if (d.values.size() > 0) {
    gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < d.values.size(); ++k) {
      double dist = std::abs(d.values[k] - std::complex<double>(1.0, 0.0));
      if (dist > 1e-8) gap = std::min(gap, dist);
    }
    if (!std::isfinite(gap)) gap = 1.0;
  }
  int n = int(std::clamp(1e6 / std::max(gap, 1e-3), 1e3, double(1 << 20)));
  res.value = ergodic_average_discrete(T, n, f);
  res.exact = false;
  res.defect = d.defect;
  return res;
}

ProjectionResult mean_projection(const Generator& g,
                                 const LatticeFunction& f) {
  f.validate();
  auto d = decompose(g.matrix());
  ProjectionResult res;
  if (d.ok) {
    res.value = project_with(d, 0.0, f);
    res.exact = true;
    res.defect = d.defect;
    return res;
  }
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < d.values.size(); ++k) {
    double re = d.values[k].real();
    if (std::abs(d.values[k]) > 1e-8) gap = std::min(gap, std::abs(re));
  }
  if (!std::isfinite(gap) || gap <= 0.0) gap = 1.0;
  res.value = semigroup_eval(g, 50.0 / gap, f);
  res.exact = false;
  res.defect = d.defect;
  return res;
}

IdentityResiduals identity_residuals(const RegularOperator& T,
                                     const LatticeFunction& f, int n, int m,
                                     const Generator& g, double t) {
  if (n < 1) throw ValidationError("identity residuals need n >= 1", "n");
  if (m < 0) throw ValidationError("order m must be >= 0", "m");
  f.validate();

  IdentityResiduals out;

  // decomposition identity: collect T^j f for j <= 2n+1
  {
    std::vector<Eigen::MatrixXd> pow;
    pow.reserve(std::size_t(2 * n + 2));
    pow.push_back(f.values);
    for (int j = 1; j <= 2 * n + 1; ++j)
      pow.push_back(T.kernel * pow.back());

    auto cesaro = [&](int k) {
      Eigen::MatrixXd s = Eigen::MatrixXd::Zero(f.values.rows(), f.values.cols());
      for (int j = 0; j <= k; ++j) s += pow[std::size_t(j)];
      return (s / double(k + 1)).eval();
    };

    Eigen::MatrixXd a_n = Eigen::MatrixXd::Zero(f.values.rows(), f.values.cols());
    for (int j = n; j <= 2 * n; ++j)
      a_n += double(j + 1) * (pow[std::size_t(j + 1)] - pow[std::size_t(j)]);
    a_n /= double(n);

    Eigen::MatrixXd b_n = pow[std::size_t(2 * n + 1)] - pow[std::size_t(n)];
    Eigen::MatrixXd rhs = a_n - (double(n + 1) / n) * b_n +
                          (double(2 * n + 1) / n) * cesaro(2 * n) -
                          (double(n + 1) / n) * cesaro(n);
    out.decomposition =
        (pow[std::size_t(2 * n + 1)] - rhs).cwiseAbs().maxCoeff();
  }

  // doubling identity for Delta^{m+1}_n
  {
    if (!(t > 0.0)) throw ValidationError("doubling time must be > 0", "t");
    Eigen::MatrixXd Tt = g.exp_at(t);
    Eigen::MatrixXd T2t = g.exp_at(2.0 * t);

    Eigen::MatrixXd lhs = apply_difference_power(T2t, f.values, m + 1);
    for (int i = 0; i < n; ++i) lhs = T2t * lhs;

    Eigen::MatrixXd base = apply_difference_power(Tt, f.values, m + 1);
    for (int i = 0; i < 2 * n; ++i) base = Tt * base;  // Delta_{2n}^{m+1}
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(lhs.rows(), lhs.cols());
    for (int k = 0; k <= m + 1; ++k) {
      rhs += binom(m + 1, k) * base;
      if (k <= m) base = Tt * base;
    }
    out.doubling = (lhs - rhs).cwiseAbs().maxCoeff();
  }
  return out;
}

RegularOperator make_shift(std::size_t n) {
  if (n < 1) throw ValidationError("shift needs N >= 1");
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
  for (std::size_t j = 0; j < n; ++j)
    k(Eigen::Index(j), Eigen::Index((j + 1) % n)) = 1.0;
  return build_regular_operator(std::move(k), MeasureSpace::counting(n));
}

RegularOperator make_lazy_walk(std::size_t n) {
  if (n < 2) throw ValidationError("lazy_walk needs N >= 2");
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
  for (std::size_t j = 0; j < n; ++j) {
    k(Eigen::Index(j), Eigen::Index(j)) = 0.5;
    k(Eigen::Index(j), Eigen::Index((j + 1) % n)) += 0.25;
    k(Eigen::Index(j), Eigen::Index((j + n - 1) % n)) += 0.25;
  }
  return build_regular_operator(std::move(k), MeasureSpace::counting(n));
}

Generator make_cycle_laplacian(std::size_t n) {
  if (n < 2) throw ValidationError("cycle_laplacian needs N >= 2");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
  for (std::size_t j = 0; j < n; ++j) {
    a(Eigen::Index(j), Eigen::Index(j)) = 2.0;
    a(Eigen::Index(j), Eigen::Index((j + 1) % n)) -= 1.0;
    a(Eigen::Index(j), Eigen::Index((j + n - 1) % n)) -= 1.0;
  }
  return Generator(MeasureSpace::counting(n), std::move(a));
}

RegularOperator make_doubly_stochastic_random(std::size_t n,
                                              std::uint64_t seed) {
  if (n < 1) throw ValidationError("doubly_stochastic_random needs N >= 1");
  SplitRng rng(seed);
  const Eigen::Index dim = Eigen::Index(n);
  Eigen::MatrixXd k(dim, dim);
  for (Eigen::Index i = 0; i < k.rows(); ++i)
    for (Eigen::Index j = 0; j < k.cols(); ++j)
      k(i, j) = 0.1 + rng.next_double();
  // Sinkhorn until both marginals are flat
  for (int round = 0; round < 1000; ++round) {
    for (Eigen::Index i = 0; i < k.rows(); ++i) k.row(i) /= k.row(i).sum();
    for (Eigen::Index j = 0; j < k.cols(); ++j) k.col(j) /= k.col(j).sum();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < k.rows(); ++i)
      worst = std::max(worst, std::abs(k.row(i).sum() - 1.0));
    if (worst < 1e-14) break;
  }
  return build_regular_operator(std::move(k), MeasureSpace::counting(n));
}

RegularOperator make_birth_death(std::size_t n, double p) {
  if (n < 2) throw ValidationError("birth_death needs N >= 2");
  if (!(p > 0.0 && p < 1.0))
    throw ValidationError("birth_death needs p in (0,1)");
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (i + 1 < n)
      k(Eigen::Index(i), Eigen::Index(i + 1)) = p;
    else
      k(Eigen::Index(i), Eigen::Index(i)) += p;
    if (i > 0)
      k(Eigen::Index(i), Eigen::Index(i - 1)) = 1.0 - p;
    else
      k(Eigen::Index(i), Eigen::Index(i)) += 1.0 - p;
  }
  // reversible measure pi_i ~ (p/(1-p))^i certifies the L^1 contraction
  std::vector<double> w(n);
  double ratio = p / (1.0 - p);
  w[0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) w[i] = w[i - 1] * ratio;
  return build_regular_operator(std::move(k), MeasureSpace::weighted(std::move(w)));
}

std::vector<std::string> builtin_operator_names() {
  return {"shift(N)", "lazy_walk(N)", "cycle_laplacian(N)",
          "doubly_stochastic_random(N,seed)", "birth_death(N,p)"};
}

namespace {

std::vector<double> parse_args(const std::string& inside,
                               const std::string& spec) {
  std::vector<double> args;
  std::size_t pos = 0;
  while (pos < inside.size()) {
    std::size_t comma = inside.find(',', pos);
    std::string tok = inside.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      args.push_back(std::stod(tok));
    } catch (...) {
      throw ValidationError("bad operator argument in '" + spec + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return args;
}

}  // namespace

OperatorVariant make_operator(const std::string& spec,
                              const std::string& type) {
  auto open = spec.find('(');
  if (open != std::string::npos && spec.back() == ')') {
    std::string name = spec.substr(0, open);
    auto args = parse_args(spec.substr(open + 1, spec.size() - open - 2), spec);
    auto want = [&](std::size_t k) {
      if (args.size() != k)
        throw ValidationError("operator '" + name + "' expects " +
                              std::to_string(k) + " argument(s)");
    };
    if (name == "shift") {
      want(1);
      return make_shift(std::size_t(args[0]));
    }
    if (name == "lazy_walk") {
      want(1);
      return make_lazy_walk(std::size_t(args[0]));
    }
    if (name == "cycle_laplacian") {
      want(1);
      return make_cycle_laplacian(std::size_t(args[0]));
    }
    if (name == "doubly_stochastic_random") {
      want(2);
      return make_doubly_stochastic_random(std::size_t(args[0]),
                                           std::uint64_t(args[1]));
    }
    if (name == "birth_death") {
      want(2);
      return make_birth_death(std::size_t(args[0]), args[1]);
    }
    std::string known;
    for (const auto& b : builtin_operator_names()) known += " " + b;
    throw ValidationError("unknown operator keyword '" + name +
                          "'; built-ins:" + known);
  }

  if (!std::filesystem::exists(spec)) {
    std::string known;
    for (const auto& b : builtin_operator_names()) known += " " + b;
    throw ValidationError("operator spec '" + spec +
                          "' is neither a built-in keyword nor a fixture "
                          "path; built-ins:" + known);
  }
  LatticeFunction fx = load_lattice_function(spec);
  if (fx.values.rows() != fx.values.cols() ||
      !fx.omega.same_as(fx.sigma))
    throw ValidationError(
        "kernel fixture must be square with sigma_weights == omega_weights");
  if (type == "generator")
    return Generator(fx.omega, fx.values);
  return build_regular_operator(fx.values, fx.omega);
}

}  // namespace varlab
