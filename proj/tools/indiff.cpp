#include <iostream>

#include "CLI11.hpp"
#include "indiff/cli.hpp"

int main(int argc, char** argv) {
  using indiff::cli::RunConfig;
  CLI::App app{"Large-trader indifference pricing engine"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", cfg.out, "output directory")->capture_default_str();
    sub->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    sub->add_option("--tol", cfg.tol, "tolerance override");
  };
  auto inputs = [&](CLI::App* sub, bool tree, bool panel, bool claim) {
    if (tree) sub->add_option("--tree", cfg.tree, "tree JSON")->required();
    if (panel) sub->add_option("--panel", cfg.panel, "market-maker panel (TOML or JSON)")->required();
    if (claim) sub->add_option("--claim", cfg.claim, "claim JSON")->required();
  };
  auto search = [&](CLI::App* sub) {
    sub->add_option("--budget", cfg.budget, "maximum dynamics evaluations in the search");
    sub->add_option("--levels", cfg.levels, "box levels of the search")->capture_default_str();
  };
  auto schedule = [&](CLI::App* sub, const std::string& name, const std::string& help) {
    sub->add_option(name, cfg.q_schedule, help)->delimiter(',');
  };

  auto* simulate = app.add_subcommand("simulate", "evolve the indifference dynamics for a strategy");
  inputs(simulate, true, true, false);
  simulate->add_option("--strategy", cfg.strategy, "strategy JSON (default: no trading)");
  simulate->add_option("--u0", cfg.u_start, "initial utilities, one per maker")->delimiter(',');

  auto* superrep = app.add_subcommand("superreplicate", "search for the superreplication price of a claim");
  inputs(superrep, true, true, true);
  search(superrep);

  auto* complete = app.add_subcommand("completeness", "completeness check of a binomial model");
  complete->add_option("--model", cfg.model, "binomial model JSON")->required();

  auto* replicate = app.add_subcommand("replicate", "exact replication in a binomial model");
  replicate->add_option("--model", cfg.model, "binomial model JSON")->required();
  replicate->add_option("--claim", cfg.claim, "claim JSON")->required();

  auto* counter = app.add_subcommand("counterexample", "two-period model without an optimal superreplicating strategy");
  counter->add_option("--p1", cfg.p1, "P(Y1 = +1)")->capture_default_str();
  counter->add_option("--p2", cfg.p2, "P(Y2 = +1) after an up move")->capture_default_str();
  counter->add_option("--p3", cfg.p3, "P(Y2 = +1) after a down move")->capture_default_str();
  counter->add_option("--alpha", cfg.alpha, "maker risk aversion")->capture_default_str();
  counter->add_option("--psi-u", cfg.psi_u, "payoff when Y2 = +1")->capture_default_str();
  counter->add_option("--psi-d", cfg.psi_d, "payoff when Y2 = -1")->capture_default_str();
  schedule(counter, "--q", "first-period positions to tabulate");
  search(counter);

  auto* friction = app.add_subcommand("friction-probe", "losses of growing positions traded at time t-1");
  inputs(friction, true, true, false);
  friction->add_option("--t", cfg.t, "trading period (positions at t-1)")->capture_default_str();
  schedule(friction, "--scales", "position scales");
  friction->add_option("--u-levels", cfg.u_levels, "maker utilities at t-1")->delimiter(',');

  auto* tails_tree = app.add_subcommand("tails-tree", "decreasing exponential tails on a tree");
  inputs(tails_tree, true, false, false);
  tails_tree->add_option("--t", cfg.t, "period of the conditional distributions")->capture_default_str();
  schedule(tails_tree, "--q", "|q| schedule of the ray check");

  auto* tails_levy = app.add_subcommand("tails-levy", "tail check for a Levy triplet");
  tails_levy->add_option("--triplet", cfg.triplet, "triplet TOML")->required();
  tails_levy->add_option("--samples", cfg.samples, "increment samples (CSV)")->required();
  tails_levy->set_help_flag("--help", "print this help message and exit");
  tails_levy->add_option("--h", cfg.h, "increment length")->capture_default_str();
  tails_levy->add_option("--t", cfg.t_start, "start time");
  tails_levy->add_option("--T", cfg.horizon, "horizon (default t + h)");
  schedule(tails_levy, "--q", "|q| schedule");

  auto* tails_bns = app.add_subcommand("tails-bns", "tail check for the stochastic-volatility model");
  tails_bns->add_option("--params", cfg.params, "parameter TOML")->required();
  schedule(tails_bns, "--q", "|q| schedule");

  for (auto* sub : app.get_subcommands({})) common(sub);

  CLI11_PARSE(app, argc, argv);
  const auto* chosen = app.get_subcommands().front();
  cfg.subcommand = chosen->get_name();

  const auto result = indiff::cli::run(cfg);
  if (result.exit_code == 1) {
    std::cerr << "error: " << result.error << "\n";
    return 1;
  }
  std::cout << indiff::io::dump(result.summary);
  return result.exit_code;
}
