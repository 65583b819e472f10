#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "indiff/io.hpp"

namespace indiff::cli {

inline const std::vector<std::string> kSubcommands{"simulate",      "superreplicate", "completeness",
                                                   "replicate",     "counterexample", "friction-probe",
                                                   "tails-tree",    "tails-levy",     "tails-bns"};

struct RunConfig {
  std::string subcommand;
  // Inputs.
  std::string tree, panel, claim, model, strategy, triplet, params, samples;
  // Search budget (maximum dynamics evaluations) and tolerance override.
  std::optional<std::size_t> budget;
  std::optional<double> tol;
  std::string out = ".";
  std::uint64_t seed = 0;
  // Subcommand parameters.
  double p1 = 0.5, p2 = 0.6, p3 = 0.4, alpha = 1.0, psi_u = 1.0, psi_d = 0.0;
  int t = 1;
  double h = 0.1;
  std::optional<double> t_start, horizon;  // levy: t and T
  int sign = 1;
  int levels = 8;
  std::vector<double> q_schedule;  // empty: subcommand default
  std::vector<double> u_levels;    // empty: -1 for every maker
  std::vector<double> u_start;     // simulate: empty means the Pareto split of the endowment
};

struct RunResult {
  int exit_code = 0;  // 0 success, 2 model infeasible, 1 error
  io::Json summary;   // also written to <out>/<subcommand>.json
  std::vector<std::string> artifacts;
  std::string error;
};

/// Dispatches one subcommand and writes its JSON summary and CSV tables into `out`.
RunResult run(const RunConfig& config);

}  // namespace indiff::cli
