#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "indiff/pareto.hpp"
#include "indiff/tails.hpp"
#include "indiff/tree.hpp"

namespace indiff::io {

using Json = nlohmann::json;

/// Reads and parses a JSON file; ConfigError carries the file and line.
Json read_json(const std::string& path);

/// Tree file: {"securities": J, "root": {"id", "children": [{"id", "prob", "children" | "payoff"}]}}.
/// A payoff is a number (J = 1) or an array of J numbers.
ScenarioTree tree_from_json(const Json& j, const std::string& source = {});
ScenarioTree load_tree(const std::string& path);
Json tree_to_json(const ScenarioTree& tree);

/// Panel file, TOML or JSON (by extension):
///   endowment_base = s, endowment_position = [..]
///   [[maker]] kind = "exponential", alpha = a, initial_wealth = x
///   [[maker]] kind = "mixture", atoms = [[a1, w1], [a2, w2]], initial_wealth = x
MarketMakerPanel load_panel(const std::string& path);

/// Binomial model file: a tree file plus "alpha" and an optional
/// "endowment": {"base": s, "position": [..]}.
struct ModelFile {
  ScenarioTree tree;
  MarketMakerPanel panel;
};
ModelFile load_model(const std::string& path);

/// Claim file: {"values": {leaf_id: h}}; every leaf must be present.
std::vector<double> load_claim(const std::string& path, const ScenarioTree& tree);
/// Strategy file: {"positions": {node_id: [q_1..q_J] or q}}; missing nodes hold zero.
Strategy load_strategy(const std::string& path, const ScenarioTree& tree);

/// Levy triplet TOML: b = .., c = .., jumps = [[x, mass], ..].
LevyTriplet load_levy(const std::string& path);

/// BNS TOML: m, beta, lambda, rho, sigma0_sq, jumps = [[y, mass], ..] plus
/// optional [check] t, h, T, paths.
struct BNSFile {
  BNSParams params;
  double t = 0.0;
  double h = 0.5;
  double T = 1.0;
  std::size_t paths = 20;
};
BNSFile load_bns(const std::string& path);

/// One number per line (first column of a CSV); a non-numeric first line is a header.
std::vector<double> load_samples(const std::string& path);

/// Rounds every number to 15 significant digits and maps non-finite values to strings.
Json canonical(const Json& j);
/// Writes canonical(j) with sorted keys and two-space indentation.
void write_json(const std::string& path, const Json& j);
std::string dump(const Json& j);

/// Writes a CSV table; numbers use 15 significant digits.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<Json>>& rows);

/// Finite doubles pass through, non-finite become "inf", "-inf" or "nan".
Json number(double x);

}  // namespace indiff::io
