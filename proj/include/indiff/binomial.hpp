#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "indiff/dynamics.hpp"
#include "indiff/pareto.hpp"
#include "indiff/tree.hpp"

namespace indiff {

/// A binary tree with one security and a single exponential market maker.
class BinomialModel {
 public:
  /// Throws NotBinomial unless every non-leaf node has exactly two children,
  /// J = 1 and the panel is one exponential maker.
  BinomialModel(ScenarioTree tree, MarketMakerPanel panel);

  const ScenarioTree& tree() const { return tree_; }
  const MarketMakerPanel& panel() const { return panel_; }
  double alpha() const { return alpha_; }
  const LeafValues& endowment() const { return endowment_; }
  /// Tree under dP'/dP = exp(-alpha Sigma_0) / E[exp(-alpha Sigma_0)].
  const ScenarioTree& normalized_tree() const { return normalized_; }
  /// The maker's utility with no trading: E[u(Sigma_0)].
  double initial_utility() const;

 private:
  ScenarioTree tree_;
  MarketMakerPanel panel_;
  double alpha_;
  LeafValues endowment_;
  ScenarioTree normalized_;
};

struct CompletenessViolation {
  NodeIndex node;
  NodeIndex child;
  std::string reason;
};

struct CompletenessReport {
  bool complete = true;
  std::vector<CompletenessViolation> violations;
  /// At every node at least one child improves a bound (the weaker union condition).
  bool weak_condition = true;
};

/// Complete iff along every branch the conditional lower bound of psi rises
/// strictly or the conditional upper bound falls strictly.
CompletenessReport completeness_check(const BinomialModel& model);

struct Replication {
  double pi;
  Strategy positions;
};

struct Infeasible {
  NodeIndex node;
  std::string reason;
};

using ReplicationResult = std::variant<Replication, Infeasible>;

/// Exact replication of a leaf-indexed claim.
ReplicationResult replicate(const BinomialModel& model, std::span<const double> claim);

struct RatioInterval {
  double lower;  // ratio limit as Q -> +infinity (mass at the conditional minimum)
  double upper;  // ratio limit as Q -> -infinity (mass at the conditional maximum)
};

/// Endpoints of E'[e^{-a Q psi} | child] / E'[e^{-a Q psi} | node] as Q sweeps the line.
RatioInterval claim3_interval(const BinomialModel& model, NodeIndex node, NodeIndex child);
/// Same for the first child of `node`.
RatioInterval claim3_interval(const BinomialModel& model, NodeIndex node);

/// log E'[e^{-a Q psi} | child] - log E'[e^{-a Q psi} | node].
double log_ratio_map(const BinomialModel& model, NodeIndex node, NodeIndex child, double q);

/// Evolves the dynamics with the positions and returns max_leaf |pi - X_T - Q_T psi - H|.
double replication_verify(const BinomialModel& model, std::span<const double> claim, double pi,
                          const Strategy& positions);

}  // namespace indiff
