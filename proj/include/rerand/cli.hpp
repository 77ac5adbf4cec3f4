#pragma once

// Command layer behind the `rerand` executable. Each command takes a
// RunConfig and returns the JSON artifact it produces; run() adds
// provenance, writes outputs, and maps errors to exit codes
// (0 ok, 2 validation, 3 budget / feasibility).

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rerand/assignments.hpp"
#include "rerand/balance.hpp"
#include "rerand/criteria.hpp"
#include "rerand/error.hpp"
#include "rerand/harness.hpp"
#include "rerand/inference.hpp"
#include "rerand/io.hpp"
#include "rerand/rng.hpp"
#include "rerand/sampler.hpp"
#include "rerand/theory.hpp"
#include "rerand/version.hpp"

namespace rerand::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_validation = 2;
inline constexpr int exit_budget = 3;

struct RunConfig {
  std::string subcommand;

  // Inputs.
  std::string covariates;
  std::string outcomes;
  std::string outcome_column;
  std::string design;
  std::string id_column;
  bool squares = false;
  bool interactions = false;

  // Criterion: inline JSON, a file, or a Mahalanobis threshold from a / p_a.
  std::string criterion;
  std::string criterion_file;
  std::optional<double> a;
  std::optional<double> p_a;
  std::string calibration = "asymptotic";  // asymptotic | empirical | exact
  std::size_t calibration_draws = 100'000;

  std::optional<std::size_t> n_treated;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  std::string out;
  std::string assignment_out;
  std::size_t n_sim = 10'000;
  double level = 0.95;
  std::string tail = "two-sided";
  bool exact = false;
  std::optional<std::size_t> max_proposals;
  unsigned threads = 1;

  // theory / simulate.
  std::size_t k = 2;
  std::optional<double> r_squared;
  std::optional<double> m_observed;
  double n = 100;
  std::string grid;  // "", "covariate", "tau"
  std::string experiment;
  std::optional<std::size_t> draws;
  std::optional<std::size_t> replications;
  double rho = 0.5;
  double tau = 1.0;
};

inline nlohmann::json config_to_json(const RunConfig& c) {
  auto opt = [](const auto& o) { return o ? nlohmann::json(*o) : nlohmann::json(); };
  return {{"subcommand", c.subcommand},
          {"covariates", c.covariates},
          {"outcomes", c.outcomes},
          {"outcome_column", c.outcome_column},
          {"design", c.design},
          {"id_column", c.id_column},
          {"squares", c.squares},
          {"interactions", c.interactions},
          {"criterion", c.criterion},
          {"criterion_file", c.criterion_file},
          {"a", opt(c.a)},
          {"p_a", opt(c.p_a)},
          {"calibration", c.calibration},
          {"calibration_draws", c.calibration_draws},
          {"n_treated", opt(c.n_treated)},
          {"seed", c.seed},
          {"stream", c.stream},
          {"out", c.out},
          {"assignment_out", c.assignment_out},
          {"n_sim", c.n_sim},
          {"level", c.level},
          {"tail", c.tail},
          {"exact", c.exact},
          {"max_proposals", opt(c.max_proposals)},
          {"threads", c.threads},
          {"k", c.k},
          {"r_squared", opt(c.r_squared)},
          {"m_observed", opt(c.m_observed)},
          {"n", c.n},
          {"grid", c.grid},
          {"experiment", c.experiment},
          {"draws", opt(c.draws)},
          {"replications", opt(c.replications)},
          {"rho", c.rho},
          {"tau", c.tau}};
}

namespace detail {

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid JSON in " + path + ": " + e.what());
  }
}

inline io::CovariateData load_covariates(const RunConfig& c) {
  rerand::detail::require(!c.covariates.empty(), "--covariates is required");
  return io::ingest_covariates(c.covariates, {c.id_column, c.squares, c.interactions});
}

inline RngSpec rng_spec(const RunConfig& c) { return RngSpec{c.seed, c.stream}; }

struct ResolvedCriterion {
  BalanceCriterion criterion;
  std::optional<CalibrationResult> calibration;
};

// Criterion from --criterion / --criterion-file, else a Mahalanobis threshold
// from --a or calibrated from --pa. Returns nullopt when nothing was given.
inline std::optional<ResolvedCriterion> resolve_criterion(const RunConfig& c, const BalanceContext* ctx, Rng& rng) {
  if (!c.criterion.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(c.criterion);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("invalid --criterion JSON: ") + e.what());
    }
    return ResolvedCriterion{criterion_from_json(j), std::nullopt};
  }
  if (!c.criterion_file.empty()) return ResolvedCriterion{criterion_from_json(read_json_file(c.criterion_file)), std::nullopt};
  if (c.a) return ResolvedCriterion{mahalanobis_threshold(*c.a), std::nullopt};
  if (c.p_a) {
    rerand::detail::require(ctx != nullptr, "calibration needs covariates");
    CalibrationResult cal;
    if (c.calibration == "asymptotic") {
      cal = calibrate_threshold_asymptotic(ctx->rank(), *c.p_a);
    } else if (c.calibration == "empirical") {
      cal = calibrate_threshold_empirical(*ctx, *c.p_a, c.calibration_draws, rng);
    } else if (c.calibration == "exact") {
      cal = calibrate_threshold_exact(*ctx, *c.p_a);
    } else {
      throw ValidationError("unknown calibration method '" + c.calibration + "'");
    }
    return ResolvedCriterion{cal.criterion(), cal};
  }
  return std::nullopt;
}

inline std::size_t treated_count(const RunConfig& c, std::size_t n) { return c.n_treated.value_or(n / 2); }

}  // namespace detail

/// Chooses an acceptable assignment by rejection sampling.
inline nlohmann::json cmd_design(const RunConfig& c, std::vector<std::string>* warnings = nullptr) {
  const auto data = detail::load_covariates(c);
  const auto ctx = build_context(data.x, detail::treated_count(c, data.x.n()));
  Rng rng(detail::rng_spec(c));
  auto resolved = detail::resolve_criterion(c, &ctx, rng);
  if (!resolved) resolved = detail::ResolvedCriterion{always_accept(), std::nullopt};
  const double p_a_target = resolved->calibration ? resolved->calibration->p_a_target : 1.0;
  const std::size_t budget = c.max_proposals.value_or(default_max_proposals(p_a_target));

  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };
  if (resolved->criterion.requires_exact_balance()) {
    warn("threshold a = 0 accepts only assignments with exactly equal covariate means");
  }
  std::optional<std::size_t> acceptable_count;
  const auto total = exact_binomial(ctx.n(), ctx.n_treated());
  if (total && *total <= default_enumeration_ceiling) {
    acceptable_count = enumerate_acceptable(ctx, resolved->criterion).size();
    if (*acceptable_count < 1000) {
      warn("only " + std::to_string(*acceptable_count) +
           " acceptable assignments exist; a randomization test will have coarse p-values");
    }
  }

  const auto result = rerandomize(ctx, resolved->criterion, rng, budget);
  auto j = design_to_json(result);
  j["ids"] = data.ids;
  j["covariate_names"] = data.x.column_names();
  j["rank"] = ctx.rank();
  if (resolved->calibration) j["calibration"] = calibration_to_json(*resolved->calibration);
  j["acceptable_count"] = acceptable_count ? nlohmann::json(*acceptable_count) : nlohmann::json();
  j["max_proposals"] = budget;
  return j;
}

/// Assignment CSV (id,w) for a design JSON document.
inline std::string assignment_csv(const nlohmann::json& design) {
  std::ostringstream out;
  out << "id,w\n";
  const auto bits = design.at("assignment").get<std::vector<int>>();
  const auto ids = design.at("ids").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < bits.size(); ++i) out << ids[i] << ',' << bits[i] << '\n';
  return out.str();
}

inline nlohmann::json cmd_calibrate(const RunConfig& c) {
  rerand::detail::require(c.p_a.has_value(), "--pa is required for calibrate");
  const auto data = detail::load_covariates(c);
  const auto ctx = build_context(data.x, detail::treated_count(c, data.x.n()));
  Rng rng(detail::rng_spec(c));
  RunConfig only_pa = c;
  only_pa.criterion.clear();
  only_pa.criterion_file.clear();
  only_pa.a.reset();
  auto resolved = detail::resolve_criterion(only_pa, &ctx, rng);
  auto j = calibration_to_json(*resolved->calibration);
  j["criterion"] = criterion_to_json(resolved->criterion);
  j["k"] = ctx.k();
  j["rank"] = ctx.rank();
  return j;
}

namespace detail {

struct AnalysisInputs {
  io::CovariateData data;
  BalanceContext ctx;
  BalanceCriterion criterion;
  Assignment w_obs;
  OutcomeVector y;
};

// Loads design + covariates + outcomes and checks that the observed
// assignment satisfies the criterion the analysis will condition on.
inline AnalysisInputs load_analysis(const RunConfig& c) {
  rerand::detail::require(!c.design.empty(), "--design is required");
  rerand::detail::require(!c.outcomes.empty(), "--outcomes is required");
  const auto design_json = read_json_file(c.design);
  const auto design = design_from_json(design_json);
  auto data = load_covariates(c);
  rerand::detail::require(design.assignment.size() == data.x.n(), "design and covariate file disagree on unit count");
  if (design_json.contains("ids")) {
    rerand::detail::require(design_json["ids"].get<std::vector<std::string>>() == data.ids,
                            "unit id mismatch between design and covariate file");
  }
  const auto ctx = build_context(data.x, design.assignment.n_treated());
  Rng unused(rng_spec(c));
  auto resolved = resolve_criterion(c, &ctx, unused);
  const BalanceCriterion criterion = resolved ? resolved->criterion : criterion_from_json(design.criterion);
  if (!criterion.evaluate(ctx, design.assignment)) {
    throw ValidationError("criterion mismatch: the design's assignment fails criterion " +
                          criterion_to_json(criterion).dump());
  }
  auto y = io::outcomes_from_table(io::read_csv(c.outcomes), data.ids, c.outcome_column, c.id_column.empty() ? "id" : c.id_column);
  return {std::move(data), ctx, criterion, design.assignment, OutcomeVector(std::move(y))};
}

}  // namespace detail

inline nlohmann::json cmd_test(const RunConfig& c) {
  const auto in = detail::load_analysis(c);
  const Tail tail = tail_from_string(c.tail);
  Rng rng(detail::rng_spec(c));
  const auto report = c.exact ? randomization_test_exact(in.ctx, in.criterion, in.w_obs, in.y, tail)
                              : randomization_test(in.ctx, in.criterion, in.w_obs, in.y,
                                                   draw_reference(in.ctx, in.criterion, c.n_sim, rng,
                                                                  c.max_proposals.value_or(default_max_proposals())),
                                                   tail);
  auto j = test_report_to_json(report);
  j["classical_se"] = in.w_obs.n_treated() >= 2 && in.w_obs.n_control() >= 2 ? nlohmann::json(classical_se(in.y, in.w_obs))
                                                                             : nlohmann::json();
  return j;
}

inline nlohmann::json cmd_ci(const RunConfig& c) {
  const auto in = detail::load_analysis(c);
  Rng rng(detail::rng_spec(c));
  const auto ref = c.exact ? enumerate_reference(in.ctx, in.criterion)
                           : draw_reference(in.ctx, in.criterion, c.n_sim, rng,
                                            c.max_proposals.value_or(default_max_proposals()));
  return interval_report_to_json(confidence_interval(in.ctx, in.criterion, in.w_obs, in.y, c.level, ref));
}

/// Analytic quantities, or a CSV grid when c.grid is set (returned as {"csv": ...}).
inline nlohmann::json cmd_theory(const RunConfig& c) {
  if (!c.grid.empty()) {
    std::vector<std::size_t> ks;
    for (std::size_t k = 1; k <= 50; ++k) ks.push_back(k);
    const std::vector<double> p_as{0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0};
    std::vector<double> r2s{1.0};
    if (c.grid == "tau") {
      r2s = {0.1, 0.25, 0.5, 0.75, 0.9};
    } else {
      rerand::detail::require(c.grid == "covariate", "--grid must be 'covariate' or 'tau'");
    }
    std::ostringstream csv;
    csv << std::setprecision(12);
    csv << (c.grid == "tau" ? "k,p_a,a,r_squared,v_a,priv_tau\n" : "k,p_a,a,v_a,priv_covariate\n");
    for (const auto& row : theory::priv_grid(ks, p_as, r2s)) {
      csv << row.k << ',' << row.p_a << ',' << (std::isinf(row.a) ? std::string("inf") : std::to_string(row.a)) << ',';
      if (c.grid == "tau") {
        csv << row.r_squared << ',' << row.v_a << ',' << row.priv_tau << '\n';
      } else {
        csv << row.v_a << ',' << row.priv_covariate << '\n';
      }
    }
    return {{"csv", csv.str()}};
  }
  theory::TheoryInputs in;
  in.k = c.k;
  in.a = c.a;
  in.p_a = c.p_a;
  in.r_squared = c.r_squared.value_or(0.0);
  in.n = c.n;
  in.m_observed = c.m_observed;
  if (!in.a && !in.p_a) in.p_a = 1.0;
  in.resolve();
  const auto detail_va = theory::v_a_detail(in.k, *in.a);
  nlohmann::json j = {{"k", in.k},
                      {"a", std::isinf(*in.a) ? nlohmann::json("inf") : nlohmann::json(*in.a)},
                      {"p_a", *in.p_a},
                      {"v_a", detail_va.value},
                      {"v_a_gamma_ratio", detail_va.gamma_ratio},
                      {"v_a_cdf_ratio", detail_va.cdf_ratio},
                      {"priv_covariate", 100.0 * (1.0 - detail_va.value)},
                      {"expected_m_accepted", *in.a > 0.0 ? nlohmann::json(theory::expected_m_truncated(in.k, *in.a))
                                                          : nlohmann::json(0.0)}};
  if (detail_va.zero_threshold) j["warning"] = "a = 0: limit value v_a = 0";
  if (c.r_squared) {
    j["r_squared"] = in.r_squared;
    j["priv_tau"] = 100.0 * (1.0 - detail_va.value) * in.r_squared;
  }
  if (c.m_observed) {
    rerand::detail::require(c.r_squared.has_value(), "--m needs --r2");
    j["priv_regression"] = theory::priv_regression(*c.m_observed, c.n, in.r_squared);
  }
  return j;
}

inline harness::ExperimentReport run_experiment(const RunConfig& c) {
  const RngSpec spec = detail::rng_spec(c);
  const unsigned threads = std::max(1u, c.threads);
  const auto n = static_cast<std::size_t>(c.n);
  const double p_a = c.p_a.value_or(0.1);
  const double r2 = c.r_squared.value_or(0.5);
  const auto& e = c.experiment;
  if (e == "h1") return harness::h1_covariance_shrinkage(n, c.k, p_a, c.draws.value_or(200'000), spec, threads);
  if (e == "h2") return harness::h2_priv_per_covariate(n, c.k, p_a, c.draws.value_or(200'000), spec, threads);
  if (e == "h3") return harness::h3_priv_tau(n, c.k, p_a, r2, c.tau, c.replications.value_or(2000), spec, threads);
  if (e == "h4") return harness::h4_unbiasedness(spec);
  if (e == "h5") return harness::h5_counterexample();
  if (e == "h6") return harness::h6_affine_invariance(n, c.k, c.rho, p_a, c.draws.value_or(200'000), spec, threads);
  if (e == "h7") {
    harness::H7Options opt;
    opt.n = n;
    opt.k = c.k;
    opt.p_a = c.p_a.value_or(0.01);
    opt.r_squared = r2;
    opt.replications = c.replications.value_or(2000);
    opt.n_sim = c.n_sim == RunConfig{}.n_sim ? opt.n_sim : c.n_sim;
    return harness::h7_inference_validity(opt, spec, threads);
  }
  if (e == "law") return harness::m_chi_square_law(n, c.k, c.draws.value_or(50'000), spec, threads);
  if (e == "wait") return harness::waiting_time(p_a, c.replications.value_or(10'000), spec);
  if (e == "oracle") return harness::oracle_equivalence(c.draws.value_or(50'000), spec);
  throw ValidationError("unknown experiment '" + e + "' (h1..h7, law, wait, oracle)");
}

inline nlohmann::json cmd_simulate(const RunConfig& c) { return harness::report_to_json(run_experiment(c)); }

/// Acceptable assignments of a small design, by exhaustive enumeration.
inline nlohmann::json cmd_enumerate(const RunConfig& c) {
  const auto data = detail::load_covariates(c);
  const auto ctx = build_context(data.x, detail::treated_count(c, data.x.n()));
  Rng rng(detail::rng_spec(c));
  auto resolved = detail::resolve_criterion(c, &ctx, rng);
  const BalanceCriterion criterion = resolved ? resolved->criterion : always_accept();
  const auto set = enumerate_acceptable(ctx, criterion);
  nlohmann::json assignments = nlohmann::json::array();
  for (const auto& w : set) assignments.push_back(w.bits());
  const auto total = exact_binomial(ctx.n(), ctx.n_treated());
  return {{"n", ctx.n()},
          {"n_treated", ctx.n_treated()},
          {"total", total ? nlohmann::json(*total) : nlohmann::json()},
          {"acceptable", set.size()},
          {"p_a", total ? static_cast<double>(set.size()) / static_cast<double>(*total) : 0.0},
          {"criterion", criterion_to_json(criterion)},
          {"assignments", assignments}};
}

inline nlohmann::json provenance(const RunConfig& c) {
  return {{"tool", "rerand"}, {"version", version}, {"config", config_to_json(c)}};
}

/// Runs one subcommand, writing the artifact to c.out (or `out`) and
/// diagnostics to `err`. Returns the process exit code.
inline int run(const RunConfig& c, std::ostream& out, std::ostream& err) {
  std::vector<std::string> warnings;
  auto flush_warnings = [&] {
    for (const auto& w : warnings) err << "warning: " << w << '\n';
  };
  try {
    nlohmann::json result;
    std::optional<std::string> text;
    if (c.subcommand == "design") {
      result = cmd_design(c, &warnings);
      if (!c.assignment_out.empty()) {
        std::ofstream f(c.assignment_out);
        if (!f) throw ValidationError("cannot write " + c.assignment_out);
        f << assignment_csv(result);
      }
    } else if (c.subcommand == "calibrate") {
      result = cmd_calibrate(c);
    } else if (c.subcommand == "test") {
      result = cmd_test(c);
    } else if (c.subcommand == "ci") {
      result = cmd_ci(c);
    } else if (c.subcommand == "theory") {
      result = cmd_theory(c);
      if (result.contains("csv")) text = result["csv"].get<std::string>();
    } else if (c.subcommand == "simulate") {
      const auto report = run_experiment(c);
      result = harness::report_to_json(report);
      err << harness::report_to_table(report);
    } else if (c.subcommand == "enumerate") {
      result = cmd_enumerate(c);
    } else {
      throw ValidationError("unknown subcommand '" + c.subcommand + "'");
    }
    flush_warnings();
    if (!warnings.empty()) result["warnings"] = warnings;
    std::string body;
    if (text) {
      body = *text;
    } else {
      result["provenance"] = provenance(c);
      body = result.dump(2) + "\n";
    }
    if (c.out.empty()) {
      out << body;
    } else {
      std::ofstream f(c.out, std::ios::binary);
      if (!f) throw ValidationError("cannot write " + c.out);
      f << body;
    }
    return exit_ok;
  } catch (const BudgetError& e) {
    flush_warnings();
    err << "error: " << e.what() << " (proposals=" << e.proposals()
        << ", acceptance estimate=" << e.acceptance_estimate() << ")\n";
    return exit_budget;
  } catch (const ValidationError& e) {
    flush_warnings();
    err << "error: " << e.what() << '\n';
    return exit_validation;
  }
}

}  // namespace rerand::cli
