#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <complex>
#include <limits>

#include "varlab/errors.hpp"
#include "varlab/operators.hpp"
#include "varlab/rng.hpp"

using namespace varlab;

namespace {

LatticeFunction random_function(const MeasureSpace& om, const MeasureSpace& sg,
                                SplitRng& rng) {
  LatticeFunction f = LatticeFunction::zero(om, sg);
  for (Eigen::Index i = 0; i < f.values.rows(); ++i)
    for (Eigen::Index j = 0; j < f.values.cols(); ++j)
      f.values(i, j) = rng.next_gaussian();
  return f;
}

double lp_vector_norm(const LatticeFunction& f, const std::vector<double>& mu,
                      double p) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < f.values.rows(); ++i)
    for (Eigen::Index j = 0; j < f.values.cols(); ++j) {
      if (std::isinf(p))
        acc = std::max(acc, std::abs(f.values(i, j)));
      else
        acc += mu[std::size_t(i)] * std::pow(std::abs(f.values(i, j)), p);
    }
  return std::isinf(p) ? acc : std::pow(acc, 1.0 / p);
}

}  // namespace

TEST_CASE("averaging_Z examples") {
  auto om = MeasureSpace::counting(4);
  auto sg = MeasureSpace::counting(1);
  auto e0 = LatticeFunction::delta(om, sg, 0, 0);

  CHECK((averaging_Z(e0, 0).values - e0.values).cwiseAbs().maxCoeff() == 0.0);

  auto a1 = averaging_Z(e0, 1);  // (A_1 f)(j) = (f(j) + f(j+1)) / 2 cyclically
  CHECK(a1.values(0, 0) == doctest::Approx(0.5));
  CHECK(a1.values(3, 0) == doctest::Approx(0.5));
  CHECK(a1.values(1, 0) == 0.0);
  CHECK(a1.values(2, 0) == 0.0);

  LatticeFunction c = LatticeFunction::zero(om, sg);
  c.values.setConstant(2.5);
  for (int n : {0, 1, 2, 3})
    CHECK((averaging_Z(c, n).values - c.values).cwiseAbs().maxCoeff() <=
          1e-15);
}

TEST_CASE("averaging_Z commutes with the cyclic shift exactly") {
  SplitRng rng(3);
  auto om = MeasureSpace::counting(8);
  auto sg = MeasureSpace::counting(2);
  auto shift = make_shift(8);
  auto f = random_function(om, sg, rng);
  for (int n : {1, 2}) {
    auto lhs = averaging_Z(shift.apply(f), n);
    auto rhs = shift.apply(averaging_Z(f, n));
    CHECK((lhs.values - rhs.values).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("averaging_R_sampled is exact on affine signals") {
  SampledSignal f;
  f.start = 0.0;
  f.step = 0.125;
  for (int i = 0; i <= 32; ++i) f.values.push_back(f.start + f.step * i);

  auto out = averaging_R_sampled(f, 1.0);
  // (1/t) int_0^t (s + r) dr = s + t/2
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    double s = out.start + out.step * double(i);
    CHECK(out.values[i] == doctest::Approx(s + 0.5).epsilon(1e-14));
  }

  SampledSignal c;
  c.step = 0.25;
  c.values.assign(16, 3.0);
  auto avg = averaging_R_sampled(c, 1.5);
  for (double v : avg.values) CHECK(v == doctest::Approx(3.0).epsilon(1e-15));

  CHECK_THROWS_AS(averaging_R_sampled(c, 0.1), ValidationError);
}

TEST_CASE("averaging_R_sampled converges at rate h^2 on s^2") {
  // exact value: (1/t) int_0^t (s+r)^2 dr = s^2 + s t + t^2/3 at t = 1
  auto run = [](double h) {
    SampledSignal f;
    f.step = h;
    int n = int(std::round(2.0 / h));
    for (int i = 0; i <= n; ++i) {
      double s = h * i;
      f.values.push_back(s * s);
    }
    auto out = averaging_R_sampled(f, 1.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      double s = out.step * double(i);
      worst = std::max(worst,
                       std::abs(out.values[i] - (s * s + s + 1.0 / 3.0)));
    }
    return worst;
  };
  double e1 = run(1.0 / 64.0);
  double e2 = run(1.0 / 128.0);
  CHECK(e2 > 0.0);
  double order = std::log2(e1 / e2);
  CHECK(order == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("build_regular_operator certificates") {
  auto ds = make_doubly_stochastic_random(6, 42);
  CHECK(ds.certificates.l1_contractive);
  CHECK(ds.certificates.linf_contractive);
  CHECK(ds.certificates.contractively_regular());

  auto scaled = build_regular_operator(
      2.0 * Eigen::MatrixXd::Identity(3, 3), MeasureSpace::counting(3));
  CHECK_FALSE(scaled.certificates.l1_contractive);
  CHECK_FALSE(scaled.certificates.linf_contractive);

  auto perm = make_shift(5);
  CHECK(perm.certificates.l1_contractive);
  CHECK(perm.certificates.linf_contractive);

  auto bd = make_birth_death(6, 0.3);
  CHECK(bd.certificates.l1_contractive);
  CHECK(bd.certificates.linf_contractive);
}

TEST_CASE("analyticity index: identity, shift, lazy walk") {
  auto id = build_regular_operator(Eigen::MatrixXd::Identity(4, 4),
                                   MeasureSpace::counting(4));
  auto a_id = analyticity_index(id, 2.0, 16);
  CHECK(a_id.index == 0.0);

  // circulant eigenvalues give ||T^n - T^{n-1}||_2 = max_w |w - 1| = 2 on Z_8
  auto shift = make_shift(8);
  auto a_sh = analyticity_index(shift, 2.0, 32);
  for (int n = 1; n <= 32; ++n) {
    CHECK(a_sh.values[std::size_t(n - 1)] ==
          doctest::Approx(2.0 * n).epsilon(1e-6));
  }
  CHECK_FALSE(a_sh.flat_trend);

  auto lazy = make_lazy_walk(8);
  auto a_lz = analyticity_index(lazy, 2.0, 64);
  CHECK(a_lz.flat_trend);
  CHECK(a_lz.index < 1.0);  // sup_x n x^{n-1}(1-x) <= 1/e on [0,1] spectra
}

TEST_CASE("lp operator norm: exact cases and power iteration agree") {
  SplitRng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd m(4, 4);
    for (int i = 0; i < 16; ++i) m(i / 4, i % 4) = rng.next_gaussian();
    std::vector<double> mu = {1.0, 2.0, 0.5, 1.5};

    // p = 2 with counting-free similarity: compare against SVD of the
    // weighted modulus matrix
    auto est = lp_operator_norm_abs(m, mu, 2.0);
    Eigen::MatrixXd b = m.cwiseAbs();
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        b(i, j) *= std::sqrt(mu[std::size_t(i)]) / std::sqrt(mu[std::size_t(j)]);
    double svd = b.jacobiSvd().singularValues()(0);
    CHECK(est.converged);
    CHECK(est.value == doctest::Approx(svd).epsilon(1e-7));

    // interpolation endpoints
    auto e1 = lp_operator_norm_abs(m, mu, 1.0);
    double col_max = 0.0;
    for (int j = 0; j < 4; ++j) {
      double c = 0.0;
      for (int i = 0; i < 4; ++i) c += mu[std::size_t(i)] * std::abs(m(i, j));
      col_max = std::max(col_max, c / mu[std::size_t(j)]);
    }
    CHECK(e1.value == doctest::Approx(col_max).epsilon(1e-14));

    auto einf = lp_operator_norm_abs(
        m, mu, std::numeric_limits<double>::infinity());
    double row_max = 0.0;
    for (int i = 0; i < 4; ++i)
      row_max = std::max(row_max, m.row(i).cwiseAbs().sum());
    CHECK(einf.value == doctest::Approx(row_max).epsilon(1e-14));
  }
}

TEST_CASE("semigroup_eval basics and the semigroup law") {
  auto om = MeasureSpace::counting(4);
  auto sg = MeasureSpace::counting(2);
  SplitRng rng(12);
  auto f = random_function(om, sg, rng);

  Generator zero(om, Eigen::MatrixXd::Zero(4, 4));
  CHECK((semigroup_eval(zero, 3.0, f).values - f.values)
            .cwiseAbs()
            .maxCoeff() == 0.0);

  Generator idgen(om, Eigen::MatrixXd::Identity(4, 4));
  auto ft = semigroup_eval(idgen, 0.7, f);
  CHECK((ft.values - std::exp(-0.7) * f.values).cwiseAbs().maxCoeff() <=
        1e-12);

  auto lap = make_cycle_laplacian(4);
  auto e0 = LatticeFunction::delta(om, sg, 0, 0);
  auto late = semigroup_eval(lap, 60.0, e0);
  for (Eigen::Index i = 0; i < 4; ++i)
    CHECK(late.values(i, 0) == doctest::Approx(0.25).epsilon(1e-9));

  CHECK((semigroup_eval(lap, 0.0, f).values - f.values).cwiseAbs().maxCoeff() ==
        0.0);

  for (int trial = 0; trial < 25; ++trial) {
    double s = 2.0 * rng.next_double();
    double t = 2.0 * rng.next_double();
    auto lhs = semigroup_eval(lap, s + t, f);
    auto rhs = semigroup_eval(lap, s, semigroup_eval(lap, t, f));
    CHECK((lhs.values - rhs.values).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("ergodic_average_discrete examples and the direct-sum oracle") {
  auto om3 = MeasureSpace::counting(3);
  auto sg = MeasureSpace::counting(1);
  auto shift = make_shift(3);
  auto e0 = LatticeFunction::delta(om3, sg, 0, 0);
  auto m2 = ergodic_average_discrete(shift, 2, e0);
  for (Eigen::Index i = 0; i < 3; ++i)
    CHECK(m2.values(i, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  auto id = build_regular_operator(Eigen::MatrixXd::Identity(3, 3), om3);
  SplitRng rng(13);
  auto f3 = random_function(om3, sg, rng);
  for (int n : {0, 1, 5})
    CHECK((ergodic_average_discrete(id, n, f3).values - f3.values)
              .cwiseAbs()
              .maxCoeff() <= 1e-14);

  // independent direct power-sum evaluation
  auto om8 = MeasureSpace::counting(8);
  auto T = make_doubly_stochastic_random(8, 7);
  auto f = random_function(om8, MeasureSpace::counting(2), rng);
  for (int n : {1, 4, 9}) {
    Eigen::MatrixXd direct = Eigen::MatrixXd::Zero(8, 2);
    Eigen::MatrixXd power = f.values;
    for (int k = 0; k <= n; ++k) {
      direct += power;
      power = T.kernel * power;
    }
    direct /= double(n + 1);
    auto rec = ergodic_average_discrete(T, n, f);
    CHECK((rec.values - direct).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("certified contractions do not expand L^1, L^2, L^inf norms") {
  SplitRng rng(14);
  auto sg = MeasureSpace::counting(2);
  std::vector<RegularOperator> ops = {make_lazy_walk(8),
                                      make_doubly_stochastic_random(8, 3),
                                      make_birth_death(8, 0.35)};
  for (const auto& T : ops) {
    REQUIRE(T.certificates.contractively_regular());
    auto f = random_function(
        MeasureSpace::weighted(T.space.weights), sg, rng);
    LatticeFunction g = f;
    for (int n = 1; n <= 16; ++n) {
      g = T.apply(g);
      for (double p : {1.0, 2.0, std::numeric_limits<double>::infinity()})
        CHECK(lp_vector_norm(g, T.space.weights, p) <=
              lp_vector_norm(f, T.space.weights, p) * (1.0 + 1e-10));
    }
  }
}

TEST_CASE("ergodic_average_continuous: closed forms and t -> 0") {
  auto om = MeasureSpace::counting(3);
  auto sg = MeasureSpace::counting(1);
  SplitRng rng(15);
  auto f = random_function(om, sg, rng);

  Generator zero(om, Eigen::MatrixXd::Zero(3, 3));
  auto mz = ergodic_average_continuous(zero, 2.0, f);
  CHECK((mz.value.values - f.values).cwiseAbs().maxCoeff() <= 1e-12);

  Generator idgen(om, Eigen::MatrixXd::Identity(3, 3));
  for (double t : {0.3, 1.0, 4.0}) {
    auto mt = ergodic_average_continuous(idgen, t, f);
    double factor = (1.0 - std::exp(-t)) / t;
    CHECK((mt.value.values - factor * f.values).cwiseAbs().maxCoeff() <=
          1e-9);
  }

  // M_t f -> f as t -> 0+
  auto lap = make_cycle_laplacian(3);
  double prev = 1e9;
  for (double t : {1.0, 0.1, 0.01, 0.001}) {
    auto mt = ergodic_average_continuous(lap, t, f);
    double err = (mt.value.values - f.values).cwiseAbs().maxCoeff();
    CHECK(err < prev + 1e-15);
    prev = err;
  }
  CHECK(prev <= 1e-2);

  // t -> infinity: constant vector at the mean
  auto om16 = MeasureSpace::counting(16);
  auto lap16 = make_cycle_laplacian(16);
  auto e0 = LatticeFunction::delta(om16, sg, 0, 0);
  auto minf = ergodic_average_continuous(lap16, 4000.0, e0, 1e-9);
  for (Eigen::Index i = 0; i < 16; ++i)
    CHECK(minf.value.values(i, 0) == doctest::Approx(1.0 / 16.0).epsilon(5e-3));
}

TEST_CASE("delta_power reduces to binomial expansions") {
  auto om = MeasureSpace::counting(6);
  auto sg = MeasureSpace::counting(2);
  SplitRng rng(16);
  auto f = random_function(om, sg, rng);

  auto id = build_regular_operator(Eigen::MatrixXd::Identity(6, 6), om);
  CHECK((delta_power(id, {0, 0}, f).values - f.values).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(delta_power(id, {2, 3}, f).values.cwiseAbs().maxCoeff() == 0.0);

  auto T = make_doubly_stochastic_random(6, 99);
  auto got = delta_power(T, {2, 3}, f);
  // sum_j C(2,j) (-1)^{2-j} T^{3+j} f
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(6, 2);
  double coef[3] = {1.0, -2.0, 1.0};
  for (int j = 0; j <= 2; ++j) {
    Eigen::MatrixXd power = f.values;
    for (int k = 0; k < 3 + j; ++k) power = T.kernel * power;
    expect += coef[j] * power;
  }
  CHECK((got.values - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("square_function_discrete: identity, decay, direct summation") {
  auto om = MeasureSpace::counting(16);
  auto sg = MeasureSpace::counting(1);
  SplitRng rng(17);

  auto id = build_regular_operator(Eigen::MatrixXd::Identity(16, 16), om);
  auto f = random_function(om, sg, rng);
  auto s_id = square_function_discrete(id, f, 0, 32);
  CHECK(s_id.values.values.cwiseAbs().maxCoeff() == 0.0);

  // strict contraction: doubling N_max moves the value less than the tail
  auto half = build_regular_operator(
      0.5 * make_doubly_stochastic_random(16, 5).kernel, om);
  auto s1 = square_function_discrete(half, f, 0, 64);
  auto s2 = square_function_discrete(half, f, 0, 128);
  CHECK(s1.tail_ok);
  double moved = (s2.values.values - s1.values.values).cwiseAbs().maxCoeff();
  double tail_bound = s1.tail_ratio *
                      s1.values.values.cwiseAbs().maxCoeff() + 1e-15;
  CHECK(moved <= std::max(tail_bound, 1e-12));
  // nondecreasing in N_max
  CHECK(((s2.values.values - s1.values.values).array() >= -1e-15).all());

  // mean-zero data on the lazy walk:direct summation oracle
  auto lazy = make_lazy_walk(16);
  auto g = random_function(om, sg, rng);
  g.values.array() -= g.values.mean();
  int n_max = 512;
  auto sq = square_function_discrete(lazy, g, 0, n_max);
  REQUIRE(sq.tail_ok);
  Eigen::ArrayXXd acc = Eigen::ArrayXXd::Zero(16, 1);
  Eigen::MatrixXd prev = g.values;
  for (int n = 0; n <= n_max; ++n) {
    Eigen::MatrixXd next = lazy.kernel * prev;
    acc += double(n + 1) * (next - prev).array().square();
    prev = next;
  }
  CHECK((sq.values.values.array() - acc.sqrt()).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("square_function_discrete m-order weights match the definition") {
  auto om = MeasureSpace::counting(8);
  auto sg = MeasureSpace::counting(1);
  SplitRng rng(18);
  auto lazy = make_lazy_walk(8);
  auto f = random_function(om, sg, rng);
  f.values.array() -= f.values.mean();
  int m = 1, n_max = 256;
  auto sq = square_function_discrete(lazy, f, m, n_max);
  Eigen::ArrayXXd acc = Eigen::ArrayXXd::Zero(8, 1);
  for (int n = 0; n <= n_max; ++n) {
    auto d = delta_power(lazy, {m + 1, n}, f);
    acc += std::pow(double(n + 1), 2 * m + 1) * d.values.array().square();
  }
  CHECK((sq.values.values.array() - acc.sqrt()).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("square_function_continuous closed form and null invariance") {
  auto om1 = MeasureSpace::counting(1);
  auto sg = MeasureSpace::counting(1);

  // scalar generator a: (int_0^infty s a^2 e^{-2as} ds)^{1/2} = 1/2 for all a
  for (double a : {0.5, 1.0, 3.0}) {
    Generator g(om1, a * Eigen::MatrixXd::Identity(1, 1));
    LatticeFunction one = LatticeFunction::zero(om1, sg);
    one.values(0, 0) = 1.0;
    auto s = square_function_continuous(g, one, 0, 1e-10);
    CHECK(s.converged);
    CHECK(s.values.values(0, 0) == doctest::Approx(0.5).epsilon(1e-8));
  }

  Generator zero(om1, Eigen::MatrixXd::Zero(1, 1));
  LatticeFunction one = LatticeFunction::zero(om1, sg);
  one.values(0, 0) = 1.0;
  auto sz = square_function_continuous(zero, one, 0, 1e-10);
  CHECK(sz.values.values.cwiseAbs().maxCoeff() == 0.0);

  // constants are killed for Laplacian generators, and adding a null
  // component to f does not change the square function
  auto om8 = MeasureSpace::counting(8);
  auto lap = make_cycle_laplacian(8);
  LatticeFunction c = LatticeFunction::zero(om8, sg);
  c.values.setConstant(4.2);
  auto sc = square_function_continuous(lap, c, 0, 1e-10);
  CHECK(sc.values.values.cwiseAbs().maxCoeff() == 0.0);

  SplitRng rng(19);
  auto f = random_function(om8, sg, rng);
  LatticeFunction shifted = f;
  shifted.values.array() += 7.0;
  auto s1 = square_function_continuous(lap, f, 1, 1e-10);
  auto s2 = square_function_continuous(lap, shifted, 1, 1e-10);
  CHECK((s1.values.values - s2.values.values).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("mean_projection: identity, stochastic kernels, permutations") {
  auto sg = MeasureSpace::counting(2);
  SplitRng rng(20);

  auto om3 = MeasureSpace::counting(3);
  auto id = build_regular_operator(Eigen::MatrixXd::Identity(3, 3), om3);
  auto f3 = random_function(om3, sg, rng);
  auto pid = mean_projection(id, f3);
  CHECK(pid.exact);
  CHECK((pid.value.values - f3.values).cwiseAbs().maxCoeff() <= 1e-10);

  auto om8 = MeasureSpace::counting(8);
  auto T = make_doubly_stochastic_random(8, 21);
  auto f = random_function(om8, sg, rng);
  auto p = mean_projection(T, f);
  CHECK(p.exact);
  for (Eigen::Index j = 0; j < 2; ++j) {
    double mean = f.values.col(j).mean();
    for (Eigen::Index i = 0; i < 8; ++i)
      CHECK(p.value.values(i, j) == doctest::Approx(mean).epsilon(1e-9));
  }
  // P^2 = P and T P = P
  auto pp = mean_projection(T, p.value);
  CHECK((pp.value.values - p.value.values).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((T.apply(p.value).values - p.value.values).cwiseAbs().maxCoeff() <=
        1e-10);
  // cross-check against a long Cesaro average
  auto m_long = ergodic_average_discrete(T, 10000, f);
  CHECK((m_long.values - p.value.values).cwiseAbs().maxCoeff() <= 1e-3);

  // permutation orbit: fixed space of the 3-cycle is the constants
  auto shift3 = make_shift(3);
  auto psh = mean_projection(shift3, f3);
  CHECK(psh.exact);
  for (Eigen::Index j = 0; j < 2; ++j) {
    double mean = f3.values.col(j).mean();
    for (Eigen::Index i = 0; i < 3; ++i)
      CHECK(psh.value.values(i, j) == doctest::Approx(mean).epsilon(1e-10));
  }
}

TEST_CASE("mean_projection falls back to long averaging on defective kernels") {
  auto om = MeasureSpace::counting(2);
  auto sg = MeasureSpace::counting(1);
  Eigen::MatrixXd nil(2, 2);
  nil << 0, 1, 0, 0;  // nilpotent Jordan block, not diagonalizable
  auto T = build_regular_operator(nil, om);
  LatticeFunction f = LatticeFunction::zero(om, sg);
  f.values << 1.0, 0.5;
  auto p = mean_projection(T, f);
  CHECK_FALSE(p.exact);
  CHECK(p.defect > 1e-8);
  // fixed space is {0}; the long average must be near zero
  CHECK(p.value.values.cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("mean_projection of a generator projects onto N(A)") {
  auto om = MeasureSpace::counting(8);
  auto sg = MeasureSpace::counting(2);
  SplitRng rng(22);
  auto lap = make_cycle_laplacian(8);
  auto f = random_function(om, sg, rng);
  auto p = mean_projection(lap, f);
  CHECK(p.exact);
  for (Eigen::Index j = 0; j < 2; ++j) {
    double mean = f.values.col(j).mean();
    for (Eigen::Index i = 0; i < 8; ++i)
      CHECK(p.value.values(i, j) == doctest::Approx(mean).epsilon(1e-9));
  }
  auto far = semigroup_eval(lap, 500.0, f);
  CHECK((far.values - p.value.values).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("identity residuals vanish for arbitrary operators") {
  auto sg = MeasureSpace::counting(2);
  SplitRng rng(23);

  auto om = MeasureSpace::counting(8);
  auto lap = make_cycle_laplacian(8);
  auto id = build_regular_operator(Eigen::MatrixXd::Identity(8, 8), om);
  auto f0 = random_function(om, sg, rng);
  auto r0 = identity_residuals(id, f0, 3, 1, lap, 0.3);
  CHECK(r0.decomposition == 0.0);
  CHECK(r0.doubling <= 1e-12);

  for (int trial = 0; trial < 10; ++trial) {
    auto T = make_doubly_stochastic_random(8, 100 + std::uint64_t(trial));
    auto f = random_function(om, sg, rng);
    for (int n = 1; n <= 10; ++n) {
      for (int m = 0; m <= 2; ++m) {
        double t = 0.1 + 0.4 * rng.next_double();
        auto res = identity_residuals(T, f, n, m, lap, t);
        CHECK(res.decomposition <= 1e-10);
        CHECK(res.doubling <= 1e-10);
      }
    }
  }
  CHECK_THROWS_AS(identity_residuals(id, f0, 0, 0, lap, 0.3),
                  ValidationError);
}

TEST_CASE("observation inequality holds pointwise with matched truncation") {
  auto sg = MeasureSpace::counting(1);
  SplitRng rng(24);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t dim = trial % 2 == 0 ? 8 : 16;
    auto om = MeasureSpace::counting(dim);
    auto lap = make_cycle_laplacian(dim);
    double t = 0.2 + rng.next_double();
    int m = int(rng.next_int(0, 2));
    auto f = random_function(om, sg, rng);

    Eigen::MatrixXd Tt = lap.exp_at(t);
    Eigen::MatrixXd T2t = lap.exp_at(2.0 * t);
    auto Tt_op = build_regular_operator(Tt, om);
    auto T2t_op = build_regular_operator(T2t, om);

    const int N = 192;
    Eigen::ArrayXXd lhs = Eigen::ArrayXXd::Zero(Eigen::Index(dim), 1);
    Eigen::ArrayXXd rhs = Eigen::ArrayXXd::Zero(Eigen::Index(dim), 1);
    for (int n = 0; n <= N; ++n) {
      auto d = delta_power(T2t_op, {m + 1, n}, f);
      lhs += std::pow(double(n), 2 * m + 1) * d.values.array().square();
    }
    for (int n = 0; n <= 2 * N + m + 1; ++n) {
      auto d = delta_power(Tt_op, {m + 1, n}, f);
      rhs += std::pow(double(n), 2 * m + 1) * d.values.array().square();
    }
    double slack =
        (rhs.sqrt() - lhs.sqrt()).minCoeff();
    CHECK(slack >= -1e-8);
  }
}

TEST_CASE("built-in parser and fixtures") {
  auto v = make_operator("lazy_walk(8)");
  CHECK(std::holds_alternative<RegularOperator>(v));
  auto g = make_operator("cycle_laplacian(8)");
  CHECK(std::holds_alternative<Generator>(g));
  CHECK_THROWS_AS(make_operator("frobnicate(3)"), ValidationError);
  CHECK_THROWS_AS(make_operator("no/such/file.txt"), ValidationError);
  CHECK_THROWS_AS(make_operator("shift(2,3)"), ValidationError);
}

TEST_CASE("generator cache returns consistent powers") {
  auto lap = make_cycle_laplacian(6);
  auto a = lap.exp_at(0.5);
  auto b = lap.exp_at(0.5);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  auto c = lap.exp_at(1.0);
  CHECK((a * a - c).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(lap.exp_at(-1.0), ValidationError);
}
