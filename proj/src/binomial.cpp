#include "indiff/binomial.hpp"

#include <algorithm>
#include <cmath>

#include "indiff/errors.hpp"
#include "indiff/numeric.hpp"

namespace indiff {

namespace {

constexpr double kEndpointTol = 1e-9;

// log E[exp(f) | node] for every node, f leaf-indexed.
std::vector<double> log_conditional_mgf(const ScenarioTree& tree, std::span<const double> f) {
  std::vector<double> out(tree.size());
  for (NodeIndex n = tree.size(); n-- > 0;) {
    const auto& nd = tree.node(n);
    if (nd.is_leaf()) {
      out[n] = f[nd.leaf_begin];
      continue;
    }
    numeric::LogSumExp acc;
    for (NodeIndex c : nd.children) acc.add(std::log(tree.node(c).prob) + out[c]);
    out[n] = acc.value();
  }
  return out;
}

double log_cond_sum(const ScenarioTree& tree, NodeIndex node, double a, double q) {
  const auto& nd = tree.node(node);
  numeric::LogSumExp acc;
  for (std::size_t k = nd.leaf_begin; k < nd.leaf_end; ++k)
    acc.add(std::log(conditional_leaf_prob(tree, node, k)) - a * q * tree.payoff(k)[0]);
  return acc.value();
}

double cond_mass_at(const ScenarioTree& tree, NodeIndex node, double value) {
  const auto& nd = tree.node(node);
  double mass = 0.0;
  for (std::size_t k = nd.leaf_begin; k < nd.leaf_end; ++k)
    if (tree.payoff(k)[0] == value) mass += conditional_leaf_prob(tree, node, k);
  return mass;
}

std::string describe(const ScenarioTree& tree, NodeIndex n) { return "'" + tree.node(n).id + "'"; }

}  // namespace

BinomialModel::BinomialModel(ScenarioTree tree, MarketMakerPanel panel)
    : tree_(std::move(tree)), panel_(std::move(panel)) {
  if (tree_.securities() != 1) throw NotBinomial("binomial model needs exactly one security");
  for (const auto& nd : tree_.nodes())
    if (!nd.is_leaf() && nd.children.size() != 2)
      throw NotBinomial("node '" + nd.id + "' has " + std::to_string(nd.children.size()) + " children, expected 2");
  if (panel_.size() != 1 || !panel_.makers[0].is_exponential())
    throw NotBinomial("binomial model needs a single exponential market maker");
  alpha_ = std::get<Exponential>(panel_.makers[0].kind()).alpha;
  endowment_ = panel_.endowment(tree_);

  std::vector<double> neg(endowment_.size());
  for (std::size_t k = 0; k < neg.size(); ++k) neg[k] = -alpha_ * endowment_[k];
  const auto lm = log_conditional_mgf(tree_, neg);
  std::vector<double> probs(tree_.size(), 1.0);
  for (NodeIndex n = 0; n < tree_.size(); ++n) {
    const auto& nd = tree_.node(n);
    if (nd.parent) probs[n] = nd.prob * std::exp(lm[n] - lm[*nd.parent]);
  }
  // Renormalize siblings against rounding.
  for (const auto& nd : tree_.nodes()) {
    if (nd.is_leaf()) continue;
    double total = 0.0;
    for (NodeIndex c : nd.children) total += probs[c];
    for (NodeIndex c : nd.children) probs[c] /= total;
  }
  normalized_ = tree_.with_transition_probabilities(probs);
}

double BinomialModel::initial_utility() const {
  numeric::LogSumExp acc;
  for (std::size_t k = 0; k < tree_.leaf_count(); ++k) acc.add(std::log(tree_.leaf_prob(k)) - alpha_ * endowment_[k]);
  return -std::exp(acc.value());
}

CompletenessReport completeness_check(const BinomialModel& model) {
  const auto& tree = model.tree();
  CompletenessReport rep;
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    const auto& nd = tree.node(n);
    if (nd.is_leaf()) continue;
    const auto e = conditional_extrema(tree, n);
    bool any = false;
    for (NodeIndex c : nd.children) {
      const auto ec = conditional_extrema(tree, c);
      const bool improves = e.lower < ec.lower || e.upper > ec.upper;
      any = any || improves;
      if (!improves) {
        rep.complete = false;
        rep.violations.push_back({n, c, "neither conditional bound of psi moves from " + describe(tree, n) + " to " + describe(tree, c)});
      }
    }
    rep.weak_condition = rep.weak_condition && any;
  }
  return rep;
}

double log_ratio_map(const BinomialModel& model, NodeIndex node, NodeIndex child, double q) {
  const auto& tree = model.normalized_tree();
  return log_cond_sum(tree, child, model.alpha(), q) - log_cond_sum(tree, node, model.alpha(), q);
}

RatioInterval claim3_interval(const BinomialModel& model, NodeIndex node, NodeIndex child) {
  const auto& tree = model.normalized_tree();
  const auto& c = tree.node(child);
  if (!c.parent || *c.parent != node) throw InvalidParams("child does not belong to node");
  const auto e = conditional_extrema(tree, node);
  const double lo_n = cond_mass_at(tree, node, e.lower);
  const double hi_n = cond_mass_at(tree, node, e.upper);
  return {cond_mass_at(tree, child, e.lower) / lo_n, cond_mass_at(tree, child, e.upper) / hi_n};
}

RatioInterval claim3_interval(const BinomialModel& model, NodeIndex node) {
  const auto& nd = model.tree().node(node);
  if (nd.is_leaf()) throw InvalidParams("claim3_interval needs a non-leaf node");
  return claim3_interval(model, node, nd.children.front());
}

ReplicationResult replicate(const BinomialModel& model, std::span<const double> claim) {
  const auto& tree = model.normalized_tree();
  const double a = model.alpha();
  if (claim.size() != tree.leaf_count()) throw InvalidParams("claim must be leaf-indexed");
  std::vector<double> scaled(claim.size());
  for (std::size_t k = 0; k < claim.size(); ++k) scaled[k] = a * claim[k];
  const auto lh = log_conditional_mgf(tree, scaled);

  Replication out{lh[0] / a, Strategy(tree)};
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    const auto& nd = tree.node(n);
    if (nd.is_leaf()) continue;
    const NodeIndex c = nd.children.front();
    const double target = lh[c] - lh[n];
    const auto e = conditional_extrema(tree, n);

    if (e.lower == e.upper) {
      // The security carries no information below this node; only a flat claim is attainable.
      if (std::abs(target) > 1e-12 * std::max(1.0, std::abs(lh[n])))
        return Infeasible{n, "payoff is constant below " + describe(tree, n) + " but the claim is not"};
      continue;
    }

    const auto ends = claim3_interval(model, n, c);
    const double rt = std::exp(target);
    if (std::abs(rt - ends.lower) <= kEndpointTol || std::abs(rt - ends.upper) <= kEndpointTol)
      return Infeasible{n, "target ratio sits on an endpoint of the attainable interval at " + describe(tree, n)};

    auto phi = [&](double q) { return log_ratio_map(model, n, c, q) - target; };
    double cap = 700.0 / (a * (e.upper - e.lower));
    std::optional<double> root;
    const bool inside = rt > std::min(ends.lower, ends.upper) && rt < std::max(ends.lower, ends.upper);
    if (inside) {
      for (int attempt = 0; attempt < 3 && !root; ++attempt, cap *= 10.0) {
        const double fl = phi(-cap), fh = phi(cap);
        if ((fl > 0) != (fh > 0) || fl == 0.0 || fh == 0.0)
          root = numeric::bisect(phi, -cap, cap, 1e-15 * cap, 2000);
      }
    }
    if (!root) {
      // The map need not be monotone: look for a sign change on a grid.
      const auto grid = numeric::linspace(-cap, cap, 8001);
      double prev = phi(grid[0]);
      for (std::size_t i = 1; i < grid.size() && !root; ++i) {
        const double cur = phi(grid[i]);
        if (cur == 0.0) root = grid[i];
        else if ((cur > 0) != (prev > 0)) root = numeric::bisect(phi, grid[i - 1], grid[i], 1e-16 * cap, 2000);
        prev = cur;
      }
    }
    if (!root) return Infeasible{n, "no position attains the target ratio at " + describe(tree, n)};
    // Polish with Newton steps on the smooth map.
    double q = *root;
    for (int it = 0; it < 5; ++it) {
      const double h = 1e-6 * std::max(1.0, std::abs(q));
      const double d = (phi(q + h) - phi(q - h)) / (2 * h);
      const double f = phi(q);
      if (d == 0.0 || !std::isfinite(d)) break;
      const double next = q - f / d;
      if (!(std::abs(phi(next)) < std::abs(f))) break;
      q = next;
    }
    out.positions.at(n)[0] = q;
  }
  return out;
}

double replication_verify(const BinomialModel& model, std::span<const double> claim, double pi,
                          const Strategy& positions) {
  const double u0[] = {model.initial_utility()};
  const auto path = evolve(model.tree(), model.panel(), u0, positions);
  const auto pnl = investor_pnl(model.tree(), path);
  double worst = 0.0;
  for (std::size_t k = 0; k < pnl.size(); ++k) worst = std::max(worst, std::abs(pi - pnl[k] - claim[k]));
  return worst;
}

}  // namespace indiff
