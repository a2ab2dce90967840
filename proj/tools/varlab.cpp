// varlab: q-variation norms, jump counts, operator families and the
// experiment engine behind them, from the command line.

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "varlab/config.hpp"
#include "varlab/errors.hpp"
#include "varlab/lab.hpp"
#include "varlab/rng.hpp"
#include "varlab/runner.hpp"

namespace {

using nlohmann::ordered_json;

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    auto comma = csv.find(',', pos);
    std::string tok = csv.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    out.push_back(std::stod(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

varlab::ScalarSequence make_sequence(const std::string& values,
                                     const std::string& indices) {
  varlab::ScalarSequence seq =
      varlab::ScalarSequence::from_values(parse_values(values));
  if (!indices.empty()) seq.indices = parse_values(indices);
  return seq;
}

ordered_json report_json(const varlab::Report& r) {
  return ordered_json::parse(varlab::report_to_json(r));
}

int print_and_exit(const ordered_json& j) {
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"varlab: variational inequalities laboratory"};
  app.require_subcommand(1);

  // ---- run ----------------------------------------------------------------
  auto* run = app.add_subcommand("run", "run an experiment config");
  std::string config_path, out_dir = "out";
  std::optional<std::uint64_t> seed_override;
  std::uint64_t seed_arg = 0;
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--out", out_dir, "output directory");
  auto* seed_opt = run->add_option("--seed", seed_arg,
                                   "override the config seed");

  // ---- variation ----------------------------------------------------------
  auto* variation = app.add_subcommand("variation", "q-variation norm");
  std::string var_values, var_indices;
  double var_q = 2.0;
  bool var_oracle = false;
  variation->add_option("--values", var_values, "comma separated values")
      ->required();
  variation->add_option("--indices", var_indices, "optional index grid");
  variation->add_option("--q", var_q, "variation exponent, q >= 1");
  variation->add_flag("--oracle", var_oracle, "use the brute-force oracle");

  // ---- jump ---------------------------------------------------------------
  auto* jump = app.add_subcommand("jump", "lambda-jump count");
  std::string jump_values, jump_indices;
  double jump_lambda = 0.0;
  bool jump_oracle = false;
  jump->add_option("--values", jump_values, "comma separated values")
      ->required();
  jump->add_option("--indices", jump_indices, "optional index grid");
  jump->add_option("--lambda", jump_lambda, "jump threshold > 0")->required();
  jump->add_flag("--oracle", jump_oracle, "use the exhaustive oracle");

  // ---- estimate -----------------------------------------------------------
  auto* estimate = app.add_subcommand(
      "estimate", "empirical variational constant for an operator family");
  std::string est_kind = "variational_ergodic", est_op, est_generator = "all";
  std::string est_index, est_time, est_family = "auto", est_type = "auto";
  double est_p = 2, est_q = 3, est_r = 2;
  int est_m = 0, est_count = 100, est_sigma = 1, est_nmax = 64;
  std::uint64_t est_seed = 1;
  bool est_override = false;
  estimate->add_option("--kind", est_kind, "experiment kind");
  estimate->add_option("--operator", est_op, "built-in keyword or fixture")
      ->required();
  estimate->add_option("--type", est_type, "kernel|generator|auto");
  estimate->add_option("--family", est_family,
                       "averages|ergodic|powers|m_order|semigroup|auto");
  estimate->add_option("--p", est_p);
  estimate->add_option("--q", est_q);
  estimate->add_option("--r", est_r);
  estimate->add_option("--m", est_m, "difference order");
  estimate->add_option("--sigma-dim", est_sigma);
  estimate->add_option("--count", est_count, "ensemble members per arm");
  estimate->add_option("--generator", est_generator, "ensemble generator");
  estimate->add_option("--seed", est_seed);
  estimate->add_option("--index", est_index, "index grid, e.g. 0..64");
  estimate->add_option("--time", est_time, "time grid, e.g. logspace(1e-3,1e2,64)");
  estimate->add_option("--n-max", est_nmax);
  estimate->add_flag("--q-override", est_override, "allow q <= 2");

  // ---- convergence ----------------------------------------------------------
  auto* conv = app.add_subcommand("convergence",
                                  "pointwise convergence rate profile");
  std::string conv_op, conv_index, conv_time, conv_type = "auto";
  std::string conv_gen = "delta";
  std::uint64_t conv_seed = 1;
  conv->add_option("--operator", conv_op)->required();
  conv->add_option("--type", conv_type);
  conv->add_option("--index", conv_index);
  conv->add_option("--time", conv_time);
  conv->add_option("--f", conv_gen, "ensemble generator for the probe f");
  conv->add_option("--seed", conv_seed);

  // ---- identity-check -------------------------------------------------------
  auto* idc = app.add_subcommand(
      "identity-check",
      "verify the decomposition and doubling identities on a seeded batch");
  std::string idc_op = "doubly_stochastic_random(8,42)";
  int idc_batch = 20;
  std::uint64_t idc_seed = 1;
  idc->add_option("--operator", idc_op, "kernel operator");
  idc->add_option("--batch", idc_batch, "number of random (f, n, m) draws");
  idc->add_option("--seed", idc_seed);

  // ---- probe-ell1 -----------------------------------------------------------
  auto* ell1 = app.add_subcommand("probe-ell1",
                                  "maximal-ratio growth probe at r = 1");
  std::string ell1_op, ell1_d = "1,2,4,8", ell1_gen = "spikes";
  std::string ell1_index, ell1_time, ell1_type = "auto";
  int ell1_count = 50;
  std::uint64_t ell1_seed = 1;
  double ell1_p = 2;
  ell1->add_option("--operator", ell1_op)->required();
  ell1->add_option("--type", ell1_type);
  ell1->add_option("--d", ell1_d, "sigma dimension sweep");
  ell1->add_option("--p", ell1_p);
  ell1->add_option("--count", ell1_count);
  ell1->add_option("--generator", ell1_gen);
  ell1->add_option("--seed", ell1_seed);
  ell1->add_option("--index", ell1_index);
  ell1->add_option("--time", ell1_time);

  // ---- weights --------------------------------------------------------------
  auto* weights = app.add_subcommand("weights",
                                     "Muckenhoupt characteristics and the "
                                     "discrete Hilbert transform");
  weights->require_subcommand(1);
  auto* wap = weights->add_subcommand("ap", "A_p characteristic");
  std::string wap_fixture, wap_values;
  double wap_p = 2.0;
  int wap_maxlen = 512;
  std::int64_t wap_offset = 0;
  wap->add_option("--fixture", wap_fixture, "weight fixture path");
  wap->add_option("--values", wap_values, "inline weight values");
  wap->add_option("--offset", wap_offset, "segment offset for inline values");
  wap->add_option("--p", wap_p);
  wap->add_option("--max-len", wap_maxlen);
  auto* whil = weights->add_subcommand("hilbert", "discrete Hilbert transform");
  std::string whil_values;
  std::int64_t whil_offset = 0, whil_margin = 64;
  whil->add_option("--values", whil_values)->required();
  whil->add_option("--offset", whil_offset);
  whil->add_option("--margin", whil_margin);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (*run) {
      if (seed_opt->count() > 0) seed_override = seed_arg;
      return varlab::run_experiment_files(config_path, out_dir, seed_override);
    }

    if (*variation) {
      auto seq = make_sequence(var_values, var_indices);
      auto res = var_oracle ? varlab::vq_norm_oracle(seq, var_q)
                            : varlab::vq_norm(seq, var_q);
      ordered_json j;
      j["norm"] = res.norm;
      j["q"] = var_q;
      j["witness"] = res.witness;
      return print_and_exit(j);
    }

    if (*jump) {
      auto seq = make_sequence(jump_values, jump_indices);
      auto res = jump_oracle ? varlab::jump_count_oracle(seq, jump_lambda)
                             : varlab::jump_count(seq, jump_lambda);
      ordered_json j;
      j["count"] = res.count;
      j["lambda"] = jump_lambda;
      auto pairs = ordered_json::array();
      for (const auto& pr : res.pairs) pairs.push_back({pr.s, pr.t});
      j["pairs"] = pairs;
      return print_and_exit(j);
    }

    if (*estimate) {
      varlab::ExperimentConfig cfg;
      cfg.kind = varlab::experiment_kind_from_string(est_kind);
      cfg.operator_spec = est_op;
      cfg.operator_type = est_type;
      cfg.family = est_family;
      cfg.p = est_p;
      cfg.q = est_q;
      cfg.r = est_r;
      cfg.m = est_m;
      cfg.q_override = est_override;
      cfg.sigma_dim = est_sigma;
      cfg.ensemble.count = est_count;
      cfg.ensemble.generator = varlab::ensemble_kind_from_string(est_generator);
      cfg.ensemble.seed = est_seed;
      cfg.n_max = est_nmax;
      if (!est_index.empty()) cfg.index_grid = varlab::GridSpec::parse(est_index);
      if (!est_time.empty()) cfg.time_grid = varlab::GridSpec::parse(est_time);
      auto report = varlab::run_experiment(cfg);
      report.config_text = varlab::canonical_config_text(cfg);
      return print_and_exit(report_json(report));
    }

    if (*conv) {
      varlab::ExperimentConfig cfg;
      cfg.kind = varlab::ExperimentKind::convergence;
      cfg.operator_spec = conv_op;
      cfg.operator_type = conv_type;
      cfg.ensemble.count = 1;
      cfg.ensemble.generator = varlab::ensemble_kind_from_string(conv_gen);
      cfg.ensemble.seed = conv_seed;
      if (!conv_index.empty())
        cfg.index_grid = varlab::GridSpec::parse(conv_index);
      if (!conv_time.empty()) cfg.time_grid = varlab::GridSpec::parse(conv_time);
      auto report = varlab::convergence_profile(cfg);
      report.config_text = varlab::canonical_config_text(cfg);
      return print_and_exit(report_json(report));
    }

    if (*idc) {
      auto op = varlab::make_operator(idc_op);
      if (!std::holds_alternative<varlab::RegularOperator>(op))
        throw varlab::ValidationError("identity-check needs a kernel operator");
      const auto& T = std::get<varlab::RegularOperator>(op);
      auto gen = varlab::make_cycle_laplacian(T.space.size());
      varlab::SplitRng rng(idc_seed);
      double worst_dec = 0.0, worst_dbl = 0.0;
      auto sigma = varlab::MeasureSpace::counting(1);
      for (int b = 0; b < idc_batch; ++b) {
        auto f = varlab::make_ensemble_member(T.space, sigma,
                                              varlab::EnsembleKind::gaussian,
                                              idc_seed, 0, std::uint64_t(b));
        int n = int(rng.next_int(1, 10));
        int mm = int(rng.next_int(0, 2));
        double t = 0.05 + 0.5 * rng.next_double();
        auto res = varlab::identity_residuals(T, f, n, mm, gen, t);
        worst_dec = std::max(worst_dec, res.decomposition);
        worst_dbl = std::max(worst_dbl, res.doubling);
      }
      ordered_json j;
      j["batch"] = idc_batch;
      j["max_decomposition_residual"] = worst_dec;
      j["max_doubling_residual"] = worst_dbl;
      bool ok = worst_dec <= 1e-10 && worst_dbl <= 1e-10;
      j["ok"] = ok;
      std::cout << j.dump(2) << "\n";
      return ok ? 0 : 3;
    }

    if (*ell1) {
      varlab::ExperimentConfig cfg;
      cfg.kind = varlab::ExperimentKind::ell1_probe;
      cfg.operator_spec = ell1_op;
      cfg.operator_type = ell1_type;
      cfg.p = ell1_p;
      cfg.r = 1.0;
      cfg.ensemble.count = ell1_count;
      cfg.ensemble.generator = varlab::ensemble_kind_from_string(ell1_gen);
      cfg.ensemble.seed = ell1_seed;
      for (double d : parse_values(ell1_d))
        cfg.d_grid.push_back(std::int64_t(d));
      if (!ell1_index.empty())
        cfg.index_grid = varlab::GridSpec::parse(ell1_index);
      if (!ell1_time.empty()) cfg.time_grid = varlab::GridSpec::parse(ell1_time);
      auto report = varlab::ell1_probe(cfg);
      report.config_text = varlab::canonical_config_text(cfg);
      return print_and_exit(report_json(report));
    }

    if (*wap) {
      varlab::Weight w;
      if (!wap_fixture.empty()) {
        w = varlab::load_weight(wap_fixture);
      } else if (!wap_values.empty()) {
        w.offset = wap_offset;
        w.values = parse_values(wap_values);
      } else {
        throw varlab::ValidationError("need --fixture or --values");
      }
      ordered_json j;
      j["p"] = wap_p;
      j["max_len"] = wap_maxlen;
      j["ap_characteristic"] =
          varlab::ap_characteristic(w, wap_p, std::size_t(wap_maxlen));
      return print_and_exit(j);
    }

    if (*whil) {
      varlab::IntegerSequence a;
      a.offset = whil_offset;
      a.values = parse_values(whil_values);
      auto h = varlab::discrete_hilbert(a, whil_margin);
      ordered_json j;
      j["offset"] = h.offset;
      j["values"] = h.values;
      return print_and_exit(j);
    }
  } catch (const varlab::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const varlab::CertificateError& e) {
    std::cerr << "certificate failure [" << e.certificate << "]: " << e.what()
              << "\n";
    return 3;
  } catch (const varlab::TailError& e) {
    std::cerr << "tail diagnostic failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
