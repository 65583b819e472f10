#include "indiff/tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "indiff/errors.hpp"
#include "indiff/numeric.hpp"

namespace indiff {

LeafValues ScenarioTree::payoff_component(int j) const {
  LeafValues out(leaf_count());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = payoff(k)[j];
  return out;
}

std::vector<NodeIndex> ScenarioTree::nodes_at(int t) const {
  std::vector<NodeIndex> out;
  for (NodeIndex n = 0; n < nodes_.size(); ++n)
    if (nodes_[n].time == t) out.push_back(n);
  return out;
}

std::optional<NodeIndex> ScenarioTree::find(std::string_view id) const {
  for (NodeIndex n = 0; n < nodes_.size(); ++n)
    if (nodes_[n].id == id) return n;
  return std::nullopt;
}

ScenarioTree ScenarioTree::with_transition_probabilities(std::span<const double> probs) const {
  if (probs.size() != nodes_.size()) throw InvalidTree("transition probability vector has the wrong length");
  ScenarioTree out = *this;
  for (NodeIndex n = 0; n < out.nodes_.size(); ++n) {
    auto& nd = out.nodes_[n];
    if (!nd.parent) continue;
    if (!(probs[n] > 0.0)) throw InvalidTree("transition probabilities must be positive");
    nd.prob = probs[n];
    nd.path_prob = out.nodes_[*nd.parent].path_prob * nd.prob;
  }
  for (const auto& nd : out.nodes_) {
    if (nd.is_leaf()) continue;
    double total = 0.0;
    for (NodeIndex c : nd.children) total += out.nodes_[c].prob;
    if (std::abs(total - 1.0) > 1e-9) throw InvalidTree("transition probabilities at node '" + nd.id + "' do not sum to 1");
  }
  return out;
}

TreeBuilder::Handle TreeBuilder::add_root(std::string id) {
  if (!pending_.empty()) throw InvalidTree("root must be the first node added");
  pending_.push_back({std::move(id), std::nullopt, 1.0, {}, std::nullopt});
  return 0;
}

TreeBuilder::Handle TreeBuilder::add_child(Handle parent, double prob, std::string id) {
  if (parent >= pending_.size()) throw InvalidTree("unknown parent handle");
  const Handle h = pending_.size();
  if (id.empty()) id = "n" + std::to_string(h);
  pending_.push_back({std::move(id), parent, prob, {}, std::nullopt});
  pending_[parent].children.push_back(h);
  return h;
}

void TreeBuilder::set_payoff(Handle leaf, std::vector<double> psi) {
  if (leaf >= pending_.size()) throw InvalidTree("unknown leaf handle");
  if (static_cast<int>(psi.size()) != securities_) throw InvalidTree("payoff dimension does not match the number of securities");
  pending_[leaf].payoff = std::move(psi);
}

ScenarioTree TreeBuilder::build() const {
  if (pending_.empty()) throw InvalidTree("empty tree");
  if (securities_ < 1) throw InvalidTree("need at least one security");
  ScenarioTree tree;
  tree.securities_ = securities_;
  std::vector<NodeIndex> new_index(pending_.size());

  // Preorder walk; explicit stack keeps deep trees off the call stack.
  std::vector<std::pair<Handle, std::optional<NodeIndex>>> stack{{0, std::nullopt}};
  while (!stack.empty()) {
    auto [h, parent] = stack.back();
    stack.pop_back();
    const auto& p = pending_[h];
    Node nd;
    nd.id = p.id;
    nd.parent = parent;
    if (parent) {
      if (!(p.prob > 0.0) || !(p.prob <= 1.0 + 1e-12)) throw InvalidTree("node '" + p.id + "' has a non-positive transition probability");
      nd.prob = p.prob;
      nd.time = tree.nodes_[*parent].time + 1;
      nd.path_prob = tree.nodes_[*parent].path_prob * p.prob;
    }
    const NodeIndex idx = tree.nodes_.size();
    new_index[h] = idx;
    tree.nodes_.push_back(std::move(nd));
    if (parent) tree.nodes_[*parent].children.push_back(idx);
    for (auto it = p.children.rbegin(); it != p.children.rend(); ++it) stack.push_back({*it, idx});
  }

  int horizon = -1;
  for (NodeIndex n = 0; n < tree.nodes_.size(); ++n) {
    const auto& nd = tree.nodes_[n];
    if (nd.is_leaf()) {
      if (horizon < 0) horizon = nd.time;
      if (nd.time != horizon) throw InvalidTree("leaves must all sit at the horizon (leaf '" + nd.id + "' at time " + std::to_string(nd.time) + ")");
    } else {
      double total = 0.0;
      for (NodeIndex c : nd.children) total += tree.nodes_[c].prob;
      if (std::abs(total - 1.0) > 1e-9) throw InvalidTree("transition probabilities at node '" + nd.id + "' do not sum to 1");
    }
  }
  if (horizon < 1) throw InvalidTree("horizon must be at least 1");
  tree.horizon_ = horizon;

  // Leaf ranges, filled bottom-up over the preorder.
  for (NodeIndex n = 0; n < tree.nodes_.size(); ++n) {
    if (tree.nodes_[n].is_leaf()) {
      tree.nodes_[n].leaf_begin = tree.leaves_.size();
      tree.nodes_[n].leaf_end = tree.leaves_.size() + 1;
      tree.leaves_.push_back(n);
    }
  }
  for (NodeIndex n = tree.nodes_.size(); n-- > 0;) {
    auto& nd = tree.nodes_[n];
    if (nd.is_leaf()) continue;
    nd.leaf_begin = tree.nodes_[nd.children.front()].leaf_begin;
    nd.leaf_end = tree.nodes_[nd.children.back()].leaf_end;
  }

  tree.payoff_.resize(tree.leaves_.size() * securities_);
  for (Handle h = 0; h < pending_.size(); ++h) {
    const NodeIndex n = new_index[h];
    if (!tree.nodes_[n].is_leaf()) {
      if (pending_[h].payoff) throw InvalidTree("payoff given for non-leaf node '" + pending_[h].id + "'");
      continue;
    }
    if (!pending_[h].payoff) throw InvalidTree("leaf '" + pending_[h].id + "' has no payoff");
    std::copy(pending_[h].payoff->begin(), pending_[h].payoff->end(),
              tree.payoff_.begin() + static_cast<std::ptrdiff_t>(tree.nodes_[n].leaf_begin * securities_));
  }
  return tree;
}

double conditional_leaf_prob(const ScenarioTree& tree, NodeIndex node, std::size_t leaf) {
  const auto& nd = tree.node(node);
  if (leaf < nd.leaf_begin || leaf >= nd.leaf_end) return 0.0;
  // Product of transition probabilities from the node down to the leaf.
  double p = 1.0;
  for (NodeIndex n = tree.leaf_node(leaf); n != node; n = *tree.node(n).parent) p *= tree.node(n).prob;
  return p;
}

double conditional_expectation(const ScenarioTree& tree, NodeIndex node, std::span<const double> leaf_values) {
  const auto& nd = tree.node(node);
  if (leaf_values.size() != tree.leaf_count()) throw InvalidTree("leaf-indexed vector has the wrong length");
  if (nd.is_leaf()) return leaf_values[nd.leaf_begin];
  double sum = 0.0;
  for (NodeIndex c : nd.children) sum += tree.node(c).prob * conditional_expectation(tree, c, leaf_values);
  return sum;
}

Extrema conditional_extrema(const ScenarioTree& tree, NodeIndex node) {
  if (tree.securities() != 1) throw MultiAssetUnsupported("conditional extrema are defined for a single security only");
  const auto& nd = tree.node(node);
  Extrema e{numeric::kInf, -numeric::kInf};
  for (std::size_t k = nd.leaf_begin; k < nd.leaf_end; ++k) {
    const double v = tree.payoff(k)[0];
    e.lower = std::min(e.lower, v);
    e.upper = std::max(e.upper, v);
  }
  return e;
}

double canonical_payoff(double x) { return numeric::round_significant(x, 12); }

ConditionalDistribution conditional_distribution(const ScenarioTree& tree, NodeIndex node) {
  const auto& nd = tree.node(node);
  std::map<std::vector<double>, double> merged;
  for (std::size_t k = nd.leaf_begin; k < nd.leaf_end; ++k) {
    auto psi = tree.payoff(k);
    std::vector<double> key(psi.begin(), psi.end());
    for (double& v : key) v = canonical_payoff(v);
    merged[key] += conditional_leaf_prob(tree, node, k);
  }
  ConditionalDistribution out;
  out.node = node;
  out.support.reserve(merged.size());
  for (auto& [value, prob] : merged) out.support.push_back({value, prob});
  return out;
}

}  // namespace indiff
