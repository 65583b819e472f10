#pragma once

#include <span>
#include <vector>

#include "indiff/tree.hpp"
#include "indiff/utility.hpp"

namespace indiff {

/// The market makers with their Pareto-optimal initial wealths and the
/// aggregate initial endowment Sigma_0 = endowment_base + <endowment_position, psi>.
struct MarketMakerPanel {
  std::vector<UtilitySpec> makers;
  std::vector<double> initial_allocation;
  double endowment_base = 0.0;
  std::vector<double> endowment_position;  // empty means zero

  std::size_t size() const { return makers.size(); }
  /// Throws InvalidUtility / InvalidParams.
  void validate() const;
  /// Largest risk-aversion constant c over the makers.
  double risk_aversion_bound() const;
  /// Sigma_0 evaluated on every leaf of the tree.
  LeafValues endowment(const ScenarioTree& tree) const;
};

/// Maximizer of sum_m v_m u_m(x_m) subject to sum_m x_m = x.
struct ParetoAllocation {
  std::vector<double> shares;
  double multiplier = 0.0;      // lambda = v_m u_m'(shares_m) = d/dx r(v, x)
  double log_multiplier = 0.0;
  double value = 0.0;           // r(v, x)
  double log_neg_value = 0.0;   // log(-r(v, x))
};

ParetoAllocation representative_utility(std::span<const double> v, double x, const MarketMakerPanel& panel);
/// Same with weights given as log v; stays finite where v itself would not.
ParetoAllocation representative_utility_log(std::span<const double> log_v, double x, const MarketMakerPanel& panel);

/// 1 / sum_m 1/a_m(shares_m).
double representative_risk_aversion(std::span<const double> v, double x, const MarketMakerPanel& panel);

/// Weights equalizing v_m u_m'(alpha_m), normalized so v_1 = 1.
std::vector<double> initial_weights(const MarketMakerPanel& panel);

struct ExponentialSandwich {
  double c1;  // largest ratio u / envelope on the grid
  double c2;  // smallest ratio u / envelope on the grid
};

/// Ratio extrema of u(x) against -e^{-a_lo x} - e^{-a_hi x}; throws StabilizationMissing.
ExponentialSandwich lemma2_bounds(const UtilitySpec& spec, std::span<const double> grid);
/// lemma2_bounds on linspace(-50, 50, 10001).
ExponentialSandwich lemma2_bounds(const UtilitySpec& spec);

struct ConditionalLowerBound {
  double bound;      // C f(y)
  double exact;      // E[u(x + Sigma) | node_t]
  double constant;   // C
  double argument;   // y
};

/// Lower bound on E[u(x + Sigma) | F_t] at `node_t` from quantities known at
/// its parent. Sandwich constants come from lemma2_bounds on the default grid.
ConditionalLowerBound lemma3_lower_bound(const UtilitySpec& spec, double x, std::span<const double> sigma,
                                         const ScenarioTree& tree, NodeIndex node_t, NodeIndex node_parent);

}  // namespace indiff
