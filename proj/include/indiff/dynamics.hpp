#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "indiff/pareto.hpp"
#include "indiff/tree.hpp"

namespace indiff {

struct StepOptions {
  enum class Method { Automatic, Newton, Nested };
  Method method = Method::Automatic;
  double residual_tol = 1e-13;  // on log(-E u_m) - log(-U_m)
  int max_iter = 200;
};

/// One application of the indifference rule at a node.
struct StepResult {
  double cash = 0.0;                     // X for the period after the node
  std::vector<double> log_weights;       // log v with v_1 = 1
  std::vector<double> log_natural;       // log V, scaled so E[d/dx r(V, Sigma)] = 1
  std::vector<std::vector<double>> log_neg_children;  // per child: log(-U_child)
  int iterations = 0;
  bool used_fallback = false;

  std::vector<double> normalized_weights() const;
  std::vector<double> natural_weights() const;
  std::vector<std::vector<double>> child_utilities() const;
};

/// Solves for the cash X and Pareto weights that keep each maker's
/// conditional expected utility at `u_prev` (given in log(-U) form) when the
/// aggregate endowment becomes Sigma_0 + X + <q, psi>, and returns the
/// resulting utilities at the children.
StepResult indifference_step_log(const ScenarioTree& tree, const MarketMakerPanel& panel, NodeIndex node,
                                 std::span<const double> log_neg_u_prev, std::span<const double> q,
                                 std::span<const double> endowment,
                                 std::optional<std::vector<double>> log_weight_guess = {},
                                 const StepOptions& opt = {});

StepResult indifference_step(const ScenarioTree& tree, const MarketMakerPanel& panel, NodeIndex node,
                             std::span<const double> u_prev, std::span<const double> q, const StepOptions& opt = {});

/// Cash for a single exponential maker: (1/a) log(E[exp(-a (Sigma_0 + <q,psi>))] / (-U)).
double closed_form_cash(const ScenarioTree& tree, double alpha, NodeIndex node, double u_prev,
                        std::span<const double> q, std::span<const double> endowment);

/// Node-indexed state of the system along the whole tree.
struct SystemPath {
  std::size_t makers = 0;
  std::size_t securities = 0;
  NodeIndex start = 0;
  std::vector<double> log_neg_utility;  // node-major, M per node
  std::vector<double> cash;             // per non-leaf node: X for the next period (NaN elsewhere)
  std::vector<double> log_weights;      // per non-leaf node, M entries, v_1 = 1
  std::vector<double> log_natural;      // per non-leaf node, M entries
  std::vector<double> positions;        // per non-leaf node, J entries
  std::vector<char> evolved;            // node reached by the evolution

  double utility(NodeIndex n, std::size_t m) const;
  std::vector<double> utilities(NodeIndex n) const;
  std::span<const double> log_neg(NodeIndex n) const { return {log_neg_utility.data() + n * makers, makers}; }
  std::span<const double> position(NodeIndex n) const { return {positions.data() + n * securities, securities}; }
  std::vector<double> natural_weights(NodeIndex n) const;
  std::vector<double> normalized_weights(NodeIndex n) const;
};

/// Runs the indifference dynamics from `start` (utilities `u_start`) down to
/// the horizon. Errors carry the offending node id.
SystemPath evolve(const ScenarioTree& tree, const MarketMakerPanel& panel, std::span<const double> u_start,
                  const Strategy& strategy, NodeIndex start = 0, const StepOptions& opt = {});

/// Recomputes the subtree below `node` after its position or utilities changed.
void evolve_subtree(const ScenarioTree& tree, const MarketMakerPanel& panel, SystemPath& path,
                    const Strategy& strategy, NodeIndex node, std::span<const double> endowment,
                    const StepOptions& opt = {});

/// Root utilities E[u_m(share_m)] when Sigma_0 is split Pareto-optimally with
/// the panel's initial weights.
std::vector<double> initial_utilities(const ScenarioTree& tree, const MarketMakerPanel& panel);

/// Per leaf: X_T + <Q_T, psi>, the makers' trading gain (the investor's loss).
LeafValues investor_pnl(const ScenarioTree& tree, const SystemPath& path);

struct InvariantReport {
  double martingale_residual = 0.0;  // max |U_{t-1} - E[U_t | F_{t-1}]| / max|U_{t-1}|
  double band_low = 0.0;             // min over nodes and makers of -U V
  double band_high = 0.0;            // max of the same
  double c = 0.0;
  bool band_ok() const { return band_low >= 1.0 / c * (1 - 1e-12) && band_high <= c * (1 + 1e-12); }
};

InvariantReport check_invariants(const ScenarioTree& tree, const MarketMakerPanel& panel, const SystemPath& path);

struct ConjugacySample {
  std::vector<double> v;
  double x;
  std::vector<double> q;
};

/// Worst relative gap between F(v,x,q) = E[r(v, Sigma(x,q)) | node] and its
/// dual sup{<u, v> : G(u, 1, q) <= x}, G being the indifference cash.
double conjugacy_check(const ScenarioTree& tree, const MarketMakerPanel& panel, NodeIndex node,
                       std::span<const ConjugacySample> samples);

}  // namespace indiff
