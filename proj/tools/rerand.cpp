// rerand: design, calibrate, analyze, and verify rerandomized experiments.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rerand/cli.hpp"

namespace {

void add_common(CLI::App* cmd, rerand::cli::RunConfig& c) {
  cmd->add_option("--seed", c.seed, "RNG seed");
  cmd->add_option("--stream", c.stream, "RNG sub-stream");
  cmd->add_option("--out,-o", c.out, "output file (default: stdout)");
  cmd->add_option("--threads", c.threads, "worker threads");
}

void add_covariates(CLI::App* cmd, rerand::cli::RunConfig& c) {
  cmd->add_option("--covariates,-x", c.covariates, "covariate CSV (header row, numeric cells)")->check(CLI::ExistingFile);
  cmd->add_option("--id-column", c.id_column, "unit id column (default: 'id' when present)");
  cmd->add_flag("--squares", c.squares, "append squared covariates");
  cmd->add_flag("--interactions", c.interactions, "append pairwise products");
}

void add_criterion(CLI::App* cmd, rerand::cli::RunConfig& c) {
  cmd->add_option("--criterion", c.criterion, "criterion JSON, e.g. '{\"type\":\"mahalanobis\",\"a\":1.5}'");
  cmd->add_option("--criterion-file", c.criterion_file, "criterion JSON file")->check(CLI::ExistingFile);
  cmd->add_option("--a", c.a, "Mahalanobis threshold");
  cmd->add_option("--pa", c.p_a, "target acceptance probability");
  cmd->add_option("--calibration", c.calibration, "asymptotic | empirical | exact")
      ->check(CLI::IsMember({"asymptotic", "empirical", "exact"}));
  cmd->add_option("--calibration-draws", c.calibration_draws, "draws for empirical calibration");
  cmd->add_option("--treated", c.n_treated, "treated group size (default n/2)");
  cmd->add_option("--max-proposals", c.max_proposals, "proposal budget per acceptable draw");
}

void add_analysis(CLI::App* cmd, rerand::cli::RunConfig& c) {
  cmd->add_option("--design", c.design, "design JSON written by `rerand design`")->required()->check(CLI::ExistingFile);
  cmd->add_option("--outcomes,-y", c.outcomes, "outcome CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--outcome-column", c.outcome_column, "outcome column name");
  cmd->add_option("--n-sim", c.n_sim, "simulated acceptable assignments");
  cmd->add_flag("--exact", c.exact, "enumerate the whole acceptable set");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rerandomization: balanced experimental designs and randomization inference"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rerand::version));
  rerand::cli::RunConfig c;

  auto* design = app.add_subcommand("design", "draw an acceptable assignment");
  add_common(design, c);
  add_covariates(design, c);
  add_criterion(design, c);
  design->add_option("--assignment-out", c.assignment_out, "write id,w CSV here");

  auto* calibrate = app.add_subcommand("calibrate", "threshold a for a target acceptance probability");
  add_common(calibrate, c);
  add_covariates(calibrate, c);
  add_criterion(calibrate, c);

  auto* test = app.add_subcommand("test", "sharp-null randomization test conditioned on the criterion");
  add_common(test, c);
  add_covariates(test, c);
  add_criterion(test, c);
  add_analysis(test, c);
  test->add_option("--tail", c.tail, "two-sided | lower | upper")->check(CLI::IsMember({"two-sided", "lower", "upper"}));

  auto* ci = app.add_subcommand("ci", "confidence interval for an additive effect by test inversion");
  add_common(ci, c);
  add_covariates(ci, c);
  add_criterion(ci, c);
  add_analysis(ci, c);
  ci->add_option("--level", c.level, "confidence level");

  auto* theory = app.add_subcommand("theory", "v_a and percent reduction in variance");
  add_common(theory, c);
  theory->add_option("--k", c.k, "number of covariates");
  theory->add_option("--a", c.a, "threshold");
  theory->add_option("--pa", c.p_a, "acceptance probability");
  theory->add_option("--r2", c.r_squared, "R^2 of outcome on covariates");
  theory->add_option("--m", c.m_observed, "observed Mahalanobis distance (regression comparison)");
  theory->add_option("--n", c.n, "sample size (regression comparison)");
  theory->add_option("--grid", c.grid, "emit CSV grid: covariate | tau")->check(CLI::IsMember({"covariate", "tau"}));

  auto* simulate = app.add_subcommand("simulate", "run a verification experiment");
  add_common(simulate, c);
  simulate->add_option("experiment", c.experiment, "h1..h7, law, wait, oracle")->required();
  simulate->add_option("--n", c.n, "units");
  simulate->add_option("--k", c.k, "covariates");
  simulate->add_option("--pa", c.p_a, "acceptance probability");
  simulate->add_option("--r2", c.r_squared, "R^2");
  simulate->add_option("--rho", c.rho, "covariate correlation (h6)");
  simulate->add_option("--tau", c.tau, "additive effect (h3)");
  simulate->add_option("--draws", c.draws, "proposals / draws");
  simulate->add_option("--replications", c.replications, "replications");
  simulate->add_option("--n-sim", c.n_sim, "reference draws per test (h7)");

  auto* enumerate = app.add_subcommand("enumerate", "list every acceptable assignment (small n)");
  add_common(enumerate, c);
  add_covariates(enumerate, c);
  add_criterion(enumerate, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rerand::cli::exit_validation;
  }
  c.subcommand = app.get_subcommands().front()->get_name();
  return rerand::cli::run(c, std::cout, std::cerr);
}
