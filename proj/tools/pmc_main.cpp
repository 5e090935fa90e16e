#include <iostream>

#include "CLI11.hpp"
#include "pmc/commands.hpp"

int main(int argc, char** argv) {
  using namespace pmc::cli;
  std::vector<std::string> arguments(argv, argv + argc);

  CLI::App app{"Two-stage set estimation for panel multinomial choice"};
  app.set_version_flag("--version", pmc::version);
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* s = app.add_subcommand("simulate", "Draw a synthetic panel from a design config");
  s->add_option("-c,--config", sim.config, "key = value file with dgp.* keys");
  s->add_option("-o,--out", sim.out_dir, "output directory")->required();
  s->add_option("--set", sim.overrides, "override a setting, key=value (repeatable)");
  s->add_option("--seed", sim.seed, "master seed (overrides dgp.seed)");

  EstimateOptions est;
  std::string covariates;
  auto* e = app.add_subcommand("estimate", "Fit the first stage and compute the set estimate");
  e->add_option("data", est.data, "long-format panel CSV")->required();
  e->add_option("-o,--out", est.out_dir, "output directory")->required();
  e->add_option("-c,--config", est.config, "key = value file with estimator.* and grid.* keys");
  e->add_option("--set", est.overrides, "override a setting, key=value (repeatable)");
  e->add_option("--covariates", covariates, "comma-separated covariate columns (default x1, x2, ...)");
  e->add_flag("--shares", est.shares, "outcome column holds market shares");
  e->add_flag("--outside-option", est.outside_option, "an outside good absorbs the remaining share");
  e->add_option("--smoother", est.smoother, "indicator | positive-part | adjusted-normal-cdf");
  e->add_option("--chat", est.c_hat, "c_hat list: numbers, 'rule' or 'rule:<kappa>'");
  e->add_option("--chat-scale", est.c_hat_scale, "count | average");
  e->add_option("--pairs", est.pairs, "auto | all | adjacent | random");
  e->add_option("--regressor", est.regressor, "network | kernel");
  e->add_option("--hidden", est.hidden_units, "hidden units of the network");
  e->add_flag("--cv", est.cross_validate, "cross-validate the first stage");
  e->add_option("--gamma", est.gamma_in, "saved first stage (gamma.json) to reuse");
  e->add_option("--seed", est.seed, "master seed");
  e->add_option("-j,--jobs", est.jobs, "worker threads")->check(CLI::PositiveNumber);

  McOptions mc;
  auto* m = app.add_subcommand("mc", "Run a Monte Carlo suite or a custom design");
  std::string suite_help = "suite:";
  for (const auto& n : suite_names()) suite_help += " " + n;
  m->add_option("suite", mc.suite, suite_help);
  m->add_option("-c,--config", mc.config, "custom design (dgp.*, estimator.*, grid.*, mc.* keys)");
  m->add_option("-o,--out", mc.out_dir, "output directory")->required();
  m->add_option("-M,--replications", mc.replications, "replications per case");
  m->add_flag("--full-scale", mc.full_scale, "full-size designs and 100 replications");
  m->add_option("--seed", mc.seed, "master seed");
  m->add_option("-j,--jobs", mc.jobs, "replications in flight")->check(CLI::PositiveNumber);
  m->add_option("--chat", mc.c_hat, "c_hat list");
  m->add_option("--smoother", mc.smoother, "indicator | positive-part | adjusted-normal-cdf");
  m->add_option("--pairs", mc.pairs, "auto | all | adjacent | random");
  m->add_option("--regressor", mc.regressor, "network | kernel");
  m->add_option("--set", mc.overrides, "override a setting, key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? success : validation;
  }

  if (*s) {
    sim.arguments = arguments;
    return guarded([&] { return cmd_simulate(sim, std::cout); }, std::cerr);
  }
  if (*e) {
    est.arguments = arguments;
    return guarded(
        [&] {
          if (!covariates.empty()) est.covariates = pmc::detail::split_list(covariates);
          return cmd_estimate(est, std::cout);
        },
        std::cerr);
  }
  mc.arguments = arguments;
  return guarded([&] { return cmd_mc(mc, std::cout); }, std::cerr);
}
