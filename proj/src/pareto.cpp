#include "indiff/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "indiff/errors.hpp"
#include "indiff/numeric.hpp"

namespace indiff {

void MarketMakerPanel::validate() const {
  if (makers.empty()) throw InvalidParams("panel needs at least one market maker");
  if (!initial_allocation.empty() && initial_allocation.size() != makers.size())
    throw InvalidParams("initial allocation has " + std::to_string(initial_allocation.size()) + " entries for " +
                        std::to_string(makers.size()) + " makers");
  for (const auto& m : makers) m.validate();
  if (!std::isfinite(endowment_base)) throw InvalidParams("endowment base must be finite");
}

double MarketMakerPanel::risk_aversion_bound() const {
  double c = 0.0;
  for (const auto& m : makers) c = std::max(c, m.risk_aversion_bound());
  return c;
}

LeafValues MarketMakerPanel::endowment(const ScenarioTree& tree) const {
  if (!endowment_position.empty() && static_cast<int>(endowment_position.size()) != tree.securities())
    throw InvalidParams("endowment position dimension does not match the tree");
  LeafValues out(tree.leaf_count(), endowment_base);
  if (endowment_position.empty()) return out;
  for (std::size_t k = 0; k < out.size(); ++k) {
    auto psi = tree.payoff(k);
    for (std::size_t j = 0; j < psi.size(); ++j) out[k] += endowment_position[j] * psi[j];
  }
  return out;
}

ParetoAllocation representative_utility_log(std::span<const double> log_v, double x, const MarketMakerPanel& panel) {
  const std::size_t M = panel.size();
  if (log_v.size() != M) throw InvalidParams("weight vector length does not match the panel");
  for (double lv : log_v)
    if (!std::isfinite(lv)) throw InvalidParams("Pareto weights must be positive and finite");

  ParetoAllocation out;
  out.shares.assign(M, 0.0);
  double level = 0.0;

  if (M == 1) {
    out.shares[0] = x;
    level = log_v[0] + panel.makers[0].log_marginal(x);
  } else if (std::all_of(panel.makers.begin(), panel.makers.end(), [](const UtilitySpec& u) { return u.is_exponential(); })) {
    // Shares are affine in the log multiplier: x_m = (log a_m + log v_m - s) / a_m.
    double intercept = 0.0, slope = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      const double a = std::get<Exponential>(panel.makers[m].kind()).alpha;
      intercept += (std::log(a) + log_v[m]) / a;
      slope += 1.0 / a;
    }
    level = (intercept - x) / slope;
    for (std::size_t m = 0; m < M; ++m) out.shares[m] = panel.makers[m].inverse_log_marginal(level - log_v[m]);
  } else {
    // Budget residual in s = log lambda: decreasing and convex, derivative -sum 1/a_m.
    auto budget = [&](double s) {
      double sum = 0.0, deriv = 0.0;
      for (std::size_t m = 0; m < M; ++m) {
        const double xm = panel.makers[m].inverse_log_marginal(s - log_v[m]);
        sum += xm;
        deriv -= 1.0 / panel.makers[m].risk_aversion(xm);
      }
      return std::pair{sum - x, deriv};
    };
    double s0 = 0.0;
    for (std::size_t m = 0; m < M; ++m) s0 += log_v[m] + panel.makers[m].log_marginal(x / static_cast<double>(M));
    s0 /= static_cast<double>(M);
    try {
      level = numeric::solve_monotone(budget, s0, 1.0);
    } catch (const NonConvergence& e) {
      throw NonConvergence(std::string("Pareto allocation: ") + e.what());
    }
    for (std::size_t m = 0; m < M; ++m) out.shares[m] = panel.makers[m].inverse_log_marginal(level - log_v[m]);
  }

  if (M > 1) {
    // Spread the remaining budget error along the allocation's sensitivity to x.
    double total = 0.0, tolerance_sum = 0.0;
    std::vector<double> tol(M);
    for (std::size_t m = 0; m < M; ++m) {
      total += out.shares[m];
      tol[m] = 1.0 / panel.makers[m].risk_aversion(out.shares[m]);
      tolerance_sum += tol[m];
    }
    const double residual = x - total;
    for (std::size_t m = 0; m < M; ++m) out.shares[m] += residual * tol[m] / tolerance_sum;
    for (double s : out.shares)
      if (!std::isfinite(s)) throw NonConvergence("Pareto allocation left the representable range");
  }

  out.log_multiplier = level;
  out.multiplier = std::exp(level);
  numeric::LogSumExp acc;
  for (std::size_t m = 0; m < M; ++m) acc.add(log_v[m] + panel.makers[m].log_neg_value(out.shares[m]));
  out.log_neg_value = acc.value();
  out.value = -std::exp(out.log_neg_value);
  return out;
}

ParetoAllocation representative_utility(std::span<const double> v, double x, const MarketMakerPanel& panel) {
  std::vector<double> log_v(v.size());
  for (std::size_t m = 0; m < v.size(); ++m) {
    if (!(v[m] > 0.0)) throw InvalidParams("Pareto weights must be positive");
    log_v[m] = std::log(v[m]);
  }
  return representative_utility_log(log_v, x, panel);
}

double representative_risk_aversion(std::span<const double> v, double x, const MarketMakerPanel& panel) {
  const auto alloc = representative_utility(v, x, panel);
  double tolerance = 0.0;
  for (std::size_t m = 0; m < panel.size(); ++m) tolerance += 1.0 / panel.makers[m].risk_aversion(alloc.shares[m]);
  return 1.0 / tolerance;
}

std::vector<double> initial_weights(const MarketMakerPanel& panel) {
  const std::size_t M = panel.size();
  std::vector<double> v(M, 1.0);
  if (panel.initial_allocation.empty()) return v;
  const double ref = panel.makers[0].log_marginal(panel.initial_allocation[0]);
  for (std::size_t m = 1; m < M; ++m) v[m] = std::exp(ref - panel.makers[m].log_marginal(panel.initial_allocation[m]));
  return v;
}

ExponentialSandwich lemma2_bounds(const UtilitySpec& spec, std::span<const double> grid) {
  const auto& stab = spec.stabilization();
  if (!stab) throw StabilizationMissing("utility has no risk-aversion stabilization levels");
  if (grid.empty()) throw InvalidParams("lemma2_bounds needs a non-empty grid");
  ExponentialSandwich out{-numeric::kInf, numeric::kInf};
  for (double x : grid) {
    const double hi = std::max(-stab->lower * x, -stab->upper * x);
    const double lo = std::min(-stab->lower * x, -stab->upper * x);
    const double log_env = hi + std::log1p(std::exp(lo - hi));
    const double ratio = std::exp(spec.log_neg_value(x) - log_env);
    out.c1 = std::max(out.c1, ratio);
    out.c2 = std::min(out.c2, ratio);
  }
  return out;
}

ExponentialSandwich lemma2_bounds(const UtilitySpec& spec) {
  const auto grid = numeric::linspace(-50.0, 50.0, 10001);
  return lemma2_bounds(spec, grid);
}

ConditionalLowerBound lemma3_lower_bound(const UtilitySpec& spec, double x, std::span<const double> sigma,
                                         const ScenarioTree& tree, NodeIndex node_t, NodeIndex node_parent) {
  const auto& stab = spec.stabilization();
  if (!stab) throw StabilizationMissing("utility has no risk-aversion stabilization levels");
  if (sigma.size() != tree.leaf_count()) throw InvalidParams("Sigma must be leaf-indexed");
  const auto& child = tree.node(node_t);
  if (!child.parent || *child.parent != node_parent) throw InvalidParams("node_t must be a child of node_parent");

  const double a_lo = stab->lower, a_hi = stab->upper;
  const double r = a_lo / a_hi;
  const auto sandwich = lemma2_bounds(spec);

  auto log_moment = [&](NodeIndex node) {
    const auto& nd = tree.node(node);
    numeric::LogSumExp acc;
    for (std::size_t k = nd.leaf_begin; k < nd.leaf_end; ++k)
      acc.add(std::log(conditional_leaf_prob(tree, node, k)) - a_hi * sigma[k]);
    return acc.value();
  };
  auto expected_utility = [&](NodeIndex node) {
    const auto& nd = tree.node(node);
    double sum = 0.0;
    for (std::size_t k = nd.leaf_begin; k < nd.leaf_end; ++k) sum += conditional_leaf_prob(tree, node, k) * spec.value(x + sigma[k]);
    return sum;
  };

  ConditionalLowerBound out;
  out.argument = expected_utility(node_parent) * std::exp(log_moment(node_t) - log_moment(node_parent));
  out.constant = std::max(sandwich.c1 / sandwich.c2, sandwich.c1 * std::pow(sandwich.c2, -r));
  out.bound = out.constant * (out.argument - std::pow(-out.argument, r));
  out.exact = expected_utility(node_t);
  return out;
}

}  // namespace indiff
