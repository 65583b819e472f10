#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "indiff/pareto.hpp"
#include "indiff/tree.hpp"

namespace testing_support {

using indiff::ScenarioTree;
using indiff::TreeBuilder;

/// One period; leaf k has payoff values[k] (J = 1) with probability probs[k].
inline ScenarioTree one_period(const std::vector<double>& values, const std::vector<double>& probs) {
  TreeBuilder b(1);
  auto root = b.add_root();
  for (std::size_t k = 0; k < values.size(); ++k) {
    auto c = b.add_child(root, probs[k], "l" + std::to_string(k));
    b.set_payoff(c, {values[k]});
  }
  return b.build();
}

/// Two-period tree: Y1 = +-1 with P(Y1 = +1) = p1, then Y2 = +-1 with
/// P(Y2 = +1) = p2 after an up move and p3 after a down move; psi depends on Y2 only.
inline ScenarioTree two_period_coin(double p1, double p2, double p3, double psi_u, double psi_d) {
  TreeBuilder b(1);
  auto root = b.add_root();
  auto up = b.add_child(root, p1, "u");
  auto down = b.add_child(root, 1 - p1, "d");
  auto uu = b.add_child(up, p2, "uu");
  auto ud = b.add_child(up, 1 - p2, "ud");
  auto du = b.add_child(down, p3, "du");
  auto dd = b.add_child(down, 1 - p3, "dd");
  b.set_payoff(uu, {psi_u});
  b.set_payoff(ud, {psi_d});
  b.set_payoff(du, {psi_u});
  b.set_payoff(dd, {psi_d});
  return b.build();
}

/// Random tree of depth T, min..max_children children per node, payoffs drawn from `atoms`;
/// branch probabilities are uniform(weight_floor, 1) draws normalized per node.
inline ScenarioTree random_tree(std::mt19937_64& rng, int T, int min_children, int max_children,
                                const std::vector<double>& atoms, int J = 1, double weight_floor = 0.2) {
  std::uniform_int_distribution<int> nchild(min_children, max_children);
  std::uniform_real_distribution<double> unif(weight_floor, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, atoms.size() - 1);
  TreeBuilder b(J);
  std::vector<std::pair<TreeBuilder::Handle, int>> frontier{{b.add_root(), 0}};
  while (!frontier.empty()) {
    auto [h, t] = frontier.back();
    frontier.pop_back();
    if (t == T) {
      std::vector<double> psi(J);
      for (auto& x : psi) x = atoms[pick(rng)];
      b.set_payoff(h, psi);
      continue;
    }
    const int n = nchild(rng);
    std::vector<double> w(n);
    double total = 0.0;
    for (auto& x : w) total += (x = unif(rng));
    for (int c = 0; c < n; ++c) frontier.push_back({b.add_child(h, w[c] / total), t + 1});
  }
  return b.build();
}

inline indiff::MarketMakerPanel exponential_panel(std::vector<double> alphas) {
  indiff::MarketMakerPanel p;
  for (double a : alphas) p.makers.push_back(indiff::UtilitySpec::exponential(a));
  p.initial_allocation.assign(alphas.size(), 0.0);
  return p;
}

/// Random panel of 1..max_makers makers, each exponential or a two-atom mixture.
inline indiff::MarketMakerPanel random_panel(std::mt19937_64& rng, int max_makers) {
  std::uniform_int_distribution<int> count(1, max_makers);
  std::uniform_real_distribution<double> ra(0.5, 2.0), wt(0.3, 1.5), alloc(-0.5, 0.5);
  std::bernoulli_distribution mix(0.6);
  indiff::MarketMakerPanel p;
  const int M = count(rng);
  for (int m = 0; m < M; ++m) {
    if (mix(rng)) {
      p.makers.push_back(indiff::UtilitySpec::mixture({{ra(rng), wt(rng)}, {ra(rng) + 0.5, wt(rng)}}));
    } else {
      p.makers.push_back(indiff::UtilitySpec::exponential(ra(rng)));
    }
    p.initial_allocation.push_back(alloc(rng));
  }
  return p;
}

}  // namespace testing_support
