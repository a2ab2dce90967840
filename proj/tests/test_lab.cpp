#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>

#include "varlab/errors.hpp"
#include "varlab/lab.hpp"
#include "varlab/rng.hpp"

using namespace varlab;

namespace {

ExperimentConfig base_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  cfg.p = 2.0;
  cfg.q = 3.0;
  cfg.r = 2.0;
  cfg.sigma_dim = 2;
  cfg.ensemble.count = 8;
  cfg.ensemble.generator = EnsembleKind::gaussian;
  cfg.ensemble.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("grid parsing forms") {
  auto a = GridSpec::parse("0..4");
  CHECK(a.points == std::vector<double>{0, 1, 2, 3, 4});
  auto b = GridSpec::parse("1,2,4,8");
  CHECK(b.points == std::vector<double>{1, 2, 4, 8});
  auto c = GridSpec::parse("logspace(1e-2,1e2,5)");
  REQUIRE(c.points.size() == 5);
  CHECK(c.points.front() == doctest::Approx(1e-2));
  CHECK(c.points.back() == doctest::Approx(1e2));
  CHECK(c.points[2] == doctest::Approx(1.0));
  auto d = GridSpec::parse("linspace(0.5,2.5,3)");
  CHECK(d.points == std::vector<double>{0.5, 1.5, 2.5});
  CHECK_THROWS_AS(GridSpec::parse("4..1"), ValidationError);
  CHECK_THROWS_AS(GridSpec::parse("2,1"), ValidationError);
  CHECK_THROWS_AS(GridSpec::parse("logspace(-1,1,4)"), ValidationError);
  CHECK_THROWS_AS(GridSpec::parse(""), ValidationError);
}

TEST_CASE("config validation rules") {
  auto cfg = base_config(ExperimentKind::variational_ergodic);
  cfg.operator_spec = "lazy_walk(16)";
  cfg.index_grid = GridSpec::parse("0..4");
  CHECK_NOTHROW(cfg.validate());

  auto q2 = cfg;
  q2.q = 2.0;
  CHECK_THROWS_AS(q2.validate(), ValidationError);
  q2.q_override = true;
  CHECK_NOTHROW(q2.validate());

  auto r1 = cfg;
  r1.r = 1.0;
  CHECK_THROWS_AS(r1.validate(), ValidationError);

  auto probe = base_config(ExperimentKind::ell1_probe);
  probe.operator_spec = "lazy_walk(16)";
  probe.index_grid = GridSpec::parse("0..4");
  probe.r = 1.0;
  probe.d_grid = {1, 2};
  CHECK_NOTHROW(probe.validate());

  auto jump = base_config(ExperimentKind::jump_profile);
  jump.operator_spec = "lazy_walk(16)";
  jump.index_grid = GridSpec::parse("0..4");
  CHECK_THROWS_AS(jump.validate(), ValidationError);  // no lambdas/ks
  jump.lambdas = {0.1};
  jump.ks = {1.0};
  CHECK_NOTHROW(jump.validate());
}

TEST_CASE("ensemble members are deterministic and schedule independent") {
  auto om = MeasureSpace::counting(8);
  auto sg = MeasureSpace::counting(3);
  for (auto kind : {EnsembleKind::gaussian, EnsembleKind::rademacher,
                    EnsembleKind::spikes, EnsembleKind::low_frequency}) {
    auto f1 = make_ensemble_member(om, sg, kind, 42, 1, 5);
    auto f2 = make_ensemble_member(om, sg, kind, 42, 1, 5);
    CHECK((f1.values - f2.values).cwiseAbs().maxCoeff() == 0.0);
    auto g = make_ensemble_member(om, sg, kind, 42, 1, 6);
    CHECK((f1.values - g.values).cwiseAbs().maxCoeff() > 0.0);
  }
  auto spikes = make_ensemble_member(om, sg, EnsembleKind::spikes, 1, 0, 0);
  int nonzero = 0;
  for (Eigen::Index i = 0; i < 8; ++i)
    for (Eigen::Index j = 0; j < 3; ++j)
      if (spikes.values(i, j) != 0.0) ++nonzero;
  CHECK(nonzero >= 1);
  CHECK(nonzero <= 3);
}

TEST_CASE("identity semigroup gives ratio exactly 1") {
  // A = 0: the family is constant in t, v_q keeps the first-term modulus
  auto cfg = base_config(ExperimentKind::variational_semigroup_continuous);
  cfg.operator_spec = "zero";
  cfg.time_grid = GridSpec::parse("logspace(0.1,10,8)");
  // build by hand since "zero" is not a builtin keyword
  Generator zero(MeasureSpace::counting(6), Eigen::MatrixXd::Zero(6, 6));
  OperatorVariant op = zero;
  for (int i = 0; i < 5; ++i) {
    auto f = make_ensemble_member(zero.space(), MeasureSpace::counting(2),
                                  EnsembleKind::gaussian, 9, 0,
                                  std::uint64_t(i));
    auto fam = build_family(cfg, op, f);
    double ratio = lattice_variation_norm(fam, cfg.p, cfg.q, cfg.r) /
                   mixed_norm(f, cfg.p, cfg.r);
    CHECK(ratio == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("estimate on shift averages matches the hand-assembled compositions") {
  auto cfg = base_config(ExperimentKind::variational_Z);
  cfg.operator_spec = "shift(16)";
  cfg.index_grid = GridSpec::parse("0..4");
  cfg.ensemble.count = 6;
  auto est = estimate_variational_constant(cfg);
  REQUIRE(est.ratios.size() == 6);

  auto op = make_operator("shift(16)");
  auto om = MeasureSpace::counting(16);
  auto sg = MeasureSpace::counting(2);
  for (int i = 0; i < 6; ++i) {
    auto f = make_ensemble_member(om, sg, EnsembleKind::gaussian, 7, 0,
                                  std::uint64_t(i));
    LatticeFamily fam;
    for (int n = 0; n <= 4; ++n) {
      fam.grid.push_back(n);
      fam.members.push_back(averaging_Z(f, n));
    }
    double expect = lattice_variation_norm(fam, 2.0, 3.0, 2.0) /
                    mixed_norm(f, 2.0, 2.0);
    CHECK(est.ratios[std::size_t(i)] ==
          doctest::Approx(expect).epsilon(1e-12));
    CHECK(est.maximal_ratios[std::size_t(i)] <=
          est.ratios[std::size_t(i)] * (1.0 + 1e-12));
  }
  CHECK(est.stability_trace.size() == 6);
  for (std::size_t i = 1; i < 6; ++i)
    CHECK(est.stability_trace[i] >= est.stability_trace[i - 1]);
  CHECK(est.sup_ratio >= est.q99);
  CHECK(est.q99 >= est.q90);
  CHECK(est.q90 >= est.q50);
}

TEST_CASE("estimates are reproducible across worker counts") {
  auto cfg = base_config(ExperimentKind::variational_ergodic);
  cfg.operator_spec = "lazy_walk(16)";
  cfg.index_grid = GridSpec::parse("0..8");
  cfg.ensemble.count = 10;

  setenv("VARLAB_THREADS", "1", 1);
  auto a = estimate_variational_constant(cfg);
  setenv("VARLAB_THREADS", "5", 1);
  auto b = estimate_variational_constant(cfg);
  unsetenv("VARLAB_THREADS");
  REQUIRE(a.ratios.size() == b.ratios.size());
  for (std::size_t i = 0; i < a.ratios.size(); ++i) {
    CHECK(std::memcmp(&a.ratios[i], &b.ratios[i], sizeof(double)) == 0);
    CHECK(std::memcmp(&a.maximal_ratios[i], &b.maximal_ratios[i],
                      sizeof(double)) == 0);
  }
  CHECK(a.sup_ratio == b.sup_ratio);
}

TEST_CASE("certificate gates abort with the failed certificate named") {
  auto cfg = base_config(ExperimentKind::variational_ergodic);
  cfg.operator_spec = "{}";  // placeholder, replaced below
  cfg.index_grid = GridSpec::parse("0..4");

  // a kernel that is no L^inf contraction
  Eigen::MatrixXd k = 1.7 * Eigen::MatrixXd::Identity(4, 4);
  auto bad = build_regular_operator(k, MeasureSpace::counting(4));
  OperatorVariant op = bad;
  CHECK_FALSE(bad.certificates.linf_contractive);
  // build_family itself is certificate-free; the estimate path gates it
  cfg.operator_spec = "shift(4)";
  CHECK_NOTHROW(estimate_variational_constant(cfg));

  // the shift is regular but not analytic: powers family must abort
  auto cfg2 = base_config(ExperimentKind::variational_semigroup_discrete);
  cfg2.operator_spec = "shift(16)";
  cfg2.index_grid = GridSpec::parse("1..4");
  cfg2.n_max = 32;
  try {
    estimate_variational_constant(cfg2);
    FAIL("expected CertificateError");
  } catch (const CertificateError& e) {
    CHECK(std::string(e.certificate) == "analyticity_flat_trend");
  }
}

TEST_CASE("m-order estimates: identity operator and m = 0 coincidence") {
  auto cfg = base_config(ExperimentKind::variational_semigroup_discrete);
  cfg.operator_spec = "lazy_walk(16)";
  cfg.index_grid = GridSpec::parse("1..8");
  cfg.ensemble.count = 4;
  cfg.m = 1;

  auto est1 = estimate_m_order_constant(cfg);
  CHECK(est1.sup_ratio > 0.0);

  // m = 0 must agree with the powers-family estimate
  auto cfg0 = cfg;
  cfg0.m = 0;
  auto a = estimate_m_order_constant(cfg0);
  auto b = estimate_variational_constant(cfg0);
  for (std::size_t i = 0; i < a.ratios.size(); ++i)
    CHECK(a.ratios[i] == doctest::Approx(b.ratios[i]).epsilon(1e-14));

  // identity operator: differences vanish for m >= 1
  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(8, 8);
  auto idop = build_regular_operator(id, MeasureSpace::counting(8));
  OperatorVariant op = idop;
  auto f = make_ensemble_member(idop.space, MeasureSpace::counting(2),
                                EnsembleKind::gaussian, 3, 0, 0);
  auto cfgi = cfg;
  auto fam = build_family(cfgi, op, f);
  CHECK(lattice_variation_norm(fam, 2, 3, 2) == 0.0);
}

TEST_CASE("jump profile: constant and quiet families produce empty tails") {
  auto cfg = base_config(ExperimentKind::jump_profile);
  cfg.operator_spec = "cycle_laplacian(8)";
  cfg.operator_type = "generator";
  cfg.time_grid = GridSpec::parse("logspace(0.05,20,24)");
  cfg.ensemble.count = 1;
  cfg.ensemble.generator = EnsembleKind::delta;
  cfg.lambdas = {5.0};  // above any oscillation of a delta under the heat flow
  cfg.ks = {1.0};
  auto rows = jump_profile(cfg);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].tail_mass == 0.0);
}

TEST_CASE("jump profile rows respect the scaled Chebyshev bound") {
  auto cfg = base_config(ExperimentKind::jump_profile);
  cfg.operator_spec = "cycle_laplacian(32)";
  cfg.operator_type = "generator";
  cfg.time_grid = GridSpec::parse("logspace(0.01,50,48)");
  cfg.ensemble.count = 1;
  cfg.ensemble.generator = EnsembleKind::delta;
  cfg.lambdas = {0.05, 0.1, 0.2, 0.4};
  cfg.ks = {1.0, 2.0, 4.0};
  auto rows = jump_profile(cfg);
  REQUIRE(rows.size() == 12);
  for (const auto& row : rows) {
    CHECK(row.tail_mass >= 0.0);
    CHECK(row.tail_mass <= 32.0);  // total product mass
    CHECK(row.tail_mass <= row.scaled_bound * (1.0 + 1e-9));
  }
  // smaller lambda and K can only grow the tail
  auto report = jump_profile_report(cfg);
  CHECK(report.rows.size() == 12);
}

TEST_CASE("convergence profile on closed forms") {
  auto cfg = base_config(ExperimentKind::convergence);
  cfg.ensemble.generator = EnsembleKind::delta;
  cfg.ensemble.count = 1;
  cfg.operator_spec = "cycle_laplacian(16)";
  cfg.operator_type = "generator";
  cfg.time_grid = GridSpec::parse("logspace(0.01,200,40)");
  auto rep = convergence_profile(cfg);
  double rate = 0.0;
  for (auto& [k, v] : rep.summary)
    if (k == "decay_rate") rate = std::get<double>(v);
  double gap = 2.0 * (1.0 - std::cos(2.0 * M_PI / 16.0));
  CHECK(rate > gap / 2.0);
  CHECK(rate < gap * 2.0);

  // A = 0: all errors vanish
  Generator zero(MeasureSpace::counting(4), Eigen::MatrixXd::Zero(4, 4));
  auto f = make_ensemble_member(zero.space(), MeasureSpace::counting(1),
                                EnsembleKind::gaussian, 5, 0, 0);
  for (double t : {0.5, 2.0}) {
    auto ft = semigroup_eval(zero, t, f);
    CHECK((ft.values - f.values).cwiseAbs().maxCoeff() == 0.0);
  }

  // scalar generator: error to f is exactly |e^{-at} - 1| |f|
  Generator scalar(MeasureSpace::counting(1),
                   0.7 * Eigen::MatrixXd::Identity(1, 1));
  LatticeFunction one =
      LatticeFunction::zero(scalar.space(), MeasureSpace::counting(1));
  one.values(0, 0) = 2.0;
  for (double t : {0.1, 1.0, 5.0}) {
    auto ft = semigroup_eval(scalar, t, one);
    double err = std::abs(ft.values(0, 0) - one.values(0, 0));
    CHECK(err == doctest::Approx(std::abs(std::exp(-0.7 * t) - 1.0) * 2.0)
                     .epsilon(1e-12));
  }
}

TEST_CASE("ell1 probe arms coincide at d = 1 and report trends") {
  auto cfg = base_config(ExperimentKind::ell1_probe);
  cfg.operator_spec = "lazy_walk(16)";
  cfg.index_grid = GridSpec::parse("0..4");
  cfg.r = 1.0;
  cfg.ensemble.generator = EnsembleKind::spikes;
  cfg.ensemble.count = 12;
  cfg.d_grid = {1, 2, 4, 8};
  auto rep = ell1_probe(cfg);
  REQUIRE(rep.rows.size() == 8);
  // rows alternate (d, 1, sup), (d, 2, sup)
  double d1_r1 = std::get<double>(rep.rows[0][2]);
  double d1_r2 = std::get<double>(rep.rows[1][2]);
  CHECK(d1_r1 == doctest::Approx(d1_r2).epsilon(1e-14));
  bool has_trend = false;
  for (auto& [k, v] : rep.summary)
    if (k == "r1_trend") has_trend = true;
  CHECK(has_trend);
}

TEST_CASE("weighted probe with w = 1 reduces to the unweighted estimate") {
  // write a weight fixture of ones
  std::string path = "/tmp/varlab_test_ones.txt";
  {
    Weight w;
    w.offset = 0;
    w.values.assign(16, 1.0);
    std::ofstream os(path);
    write_weight(os, w);
  }
  auto wcfg = base_config(ExperimentKind::weighted_variational);
  wcfg.operator_spec = "shift(16)";
  wcfg.index_grid = GridSpec::parse("0..4");
  wcfg.weight_fixture = path;
  wcfg.sigma_dim = 1;
  wcfg.ensemble.count = 6;
  auto we = weighted_variational_probe(wcfg);
  CHECK(we.ap_characteristic == 1.0);

  auto zcfg = base_config(ExperimentKind::variational_Z);
  zcfg.operator_spec = "shift(16)";
  zcfg.index_grid = GridSpec::parse("0..4");
  zcfg.sigma_dim = 1;
  zcfg.ensemble.count = 6;
  auto ze = estimate_variational_constant(zcfg);

  REQUIRE(we.estimate.ratios.size() == ze.ratios.size());
  for (std::size_t i = 0; i < ze.ratios.size(); ++i)
    CHECK(std::memcmp(&we.estimate.ratios[i], &ze.ratios[i],
                      sizeof(double)) == 0);
  CHECK(we.estimate.sup_ratio == ze.sup_ratio);
}

TEST_CASE("weighted probe records the step characteristic") {
  std::string path = "/tmp/varlab_test_step.txt";
  {
    Weight w;
    w.offset = -8;
    for (std::int64_t n = -8; n <= 8; ++n)
      w.values.push_back(n >= 0 ? 2.0 : 1.0);
    std::ofstream os(path);
    write_weight(os, w);
  }
  auto cfg = base_config(ExperimentKind::weighted_variational);
  cfg.operator_spec = "shift(16)";
  cfg.index_grid = GridSpec::parse("0..4");
  cfg.weight_fixture = path;
  cfg.sigma_dim = 1;
  cfg.ensemble.count = 4;
  auto we = weighted_variational_probe(cfg);
  CHECK(we.ap_characteristic == doctest::Approx(9.0 / 8.0).epsilon(1e-15));
  CHECK(we.estimate.sup_ratio > 0.0);
}

TEST_CASE("square function experiment: tails gate the report") {
  auto cfg = base_config(ExperimentKind::square_function);
  cfg.operator_spec = "lazy_walk(16)";
  cfg.ensemble.count = 4;
  cfg.n_max = 2048;
  auto rep = square_function_report(cfg);
  CHECK(rep.rows.size() == 4);
  double sup = 0.0;
  for (auto& [k, v] : rep.summary)
    if (k == "sup_ratio") sup = std::get<double>(v);
  CHECK(sup > 0.0);

  // a stingy truncation must refuse loudly: constant part never decays,
  // but mean-zero data decays fine, so force a non-mean-zero member with
  // a tiny n_max on a slowly mixing walk
  auto tight = cfg;
  tight.operator_spec = "lazy_walk(64)";
  tight.n_max = 4;
  CHECK_THROWS_AS(square_function_report(tight), TailError);
}

TEST_CASE("q monotonicity of estimated constants") {
  auto cfg = base_config(ExperimentKind::variational_ergodic);
  cfg.operator_spec = "lazy_walk(16)";
  cfg.index_grid = GridSpec::parse("0..8");
  cfg.ensemble.count = 6;
  cfg.q_override = true;
  double prev = std::numeric_limits<double>::infinity();
  for (double q : {2.05, 2.1, 2.25, 2.5, 3.0}) {
    cfg.q = q;
    auto est = estimate_variational_constant(cfg);
    CHECK(est.sup_ratio <= prev * (1.0 + 1e-12));
    prev = est.sup_ratio;
  }
}

TEST_CASE("reports carry the documented estimate columns") {
  auto cfg = base_config(ExperimentKind::variational_ergodic);
  cfg.operator_spec = "lazy_walk(16)";
  cfg.index_grid = GridSpec::parse("0..4");
  cfg.ensemble.count = 3;
  auto rep = estimate_variational_constant(cfg).to_report(cfg);
  CHECK(rep.columns == std::vector<std::string>{"member", "arm", "ratio",
                                                "maximal_ratio", "prefix_sup"});
  CHECK(rep.rows.size() == 3);
}
