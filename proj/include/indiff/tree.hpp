#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace indiff {

using NodeIndex = std::size_t;

struct Node {
  std::string id;
  int time = 0;
  std::optional<NodeIndex> parent;
  double prob = 1.0;       // transition probability from the parent
  double path_prob = 1.0;  // unconditional probability of reaching the node
  std::vector<NodeIndex> children;
  std::size_t leaf_begin = 0;  // leaves reachable from the node are [leaf_begin, leaf_end)
  std::size_t leaf_end = 0;

  bool is_leaf() const { return children.empty(); }
};

/// Leaf-indexed scalar random variable (one entry per leaf, in tree leaf order).
using LeafValues = std::vector<double>;

/// A finite filtered probability space: a rooted tree with positive
/// transition probabilities, uniform leaf depth T, and a payoff vector psi
/// in R^J on every leaf.
///
/// Nodes are stored in depth-first preorder so the leaves reachable from any
/// node form a contiguous range. Immutable after construction.
class ScenarioTree {
 public:
  int horizon() const { return horizon_; }
  int securities() const { return securities_; }
  std::size_t size() const { return nodes_.size(); }
  NodeIndex root() const { return 0; }
  const Node& node(NodeIndex n) const { return nodes_.at(n); }
  const std::vector<Node>& nodes() const { return nodes_; }

  std::size_t leaf_count() const { return leaves_.size(); }
  NodeIndex leaf_node(std::size_t leaf) const { return leaves_.at(leaf); }
  double leaf_prob(std::size_t leaf) const { return nodes_[leaves_[leaf]].path_prob; }
  std::span<const double> payoff(std::size_t leaf) const {
    return {payoff_.data() + leaf * securities_, static_cast<std::size_t>(securities_)};
  }
  /// Component j of psi as a leaf-indexed vector.
  LeafValues payoff_component(int j) const;

  std::vector<NodeIndex> nodes_at(int t) const;
  std::optional<NodeIndex> find(std::string_view id) const;

  /// Same shape and payoffs with new transition probabilities (indexed by node).
  ScenarioTree with_transition_probabilities(std::span<const double> probs) const;

 private:
  friend class TreeBuilder;

  int horizon_ = 0;
  int securities_ = 0;
  std::vector<Node> nodes_;
  std::vector<NodeIndex> leaves_;
  std::vector<double> payoff_;  // leaf-major, J per leaf
};

/// Incremental construction of a ScenarioTree. Node handles returned by the
/// builder are builder-local; the built tree reindexes in preorder but keeps ids.
class TreeBuilder {
 public:
  using Handle = std::size_t;

  explicit TreeBuilder(int securities) : securities_(securities) {}

  Handle add_root(std::string id = "root");
  Handle add_child(Handle parent, double prob, std::string id = {});
  void set_payoff(Handle leaf, std::vector<double> psi);
  /// Validates and builds; throws InvalidTree.
  ScenarioTree build() const;

 private:
  struct Pending {
    std::string id;
    std::optional<Handle> parent;
    double prob;
    std::vector<Handle> children;
    std::optional<std::vector<double>> payoff;
  };
  int securities_;
  std::vector<Pending> pending_;
};

/// Position process: a J-vector on every non-leaf node, held over the next period.
class Strategy {
 public:
  Strategy() = default;
  explicit Strategy(const ScenarioTree& tree)
      : securities_(static_cast<std::size_t>(tree.securities())), data_(tree.size() * securities_, 0.0) {}

  std::size_t securities() const { return securities_; }
  std::size_t size() const { return securities_ == 0 ? 0 : data_.size() / securities_; }
  std::span<const double> at(NodeIndex n) const { return {data_.data() + n * securities_, securities_}; }
  std::span<double> at(NodeIndex n) { return {data_.data() + n * securities_, securities_}; }
  const std::vector<double>& raw() const { return data_; }

  friend bool operator==(const Strategy&, const Strategy&) = default;

 private:
  std::size_t securities_ = 0;
  std::vector<double> data_;
};

struct DistributionAtom {
  std::vector<double> value;
  double prob;
};

/// Law of psi given the information at `node`.
struct ConditionalDistribution {
  NodeIndex node = 0;
  std::vector<DistributionAtom> support;  // sorted lexicographically by value
};

struct Extrema {
  double lower;
  double upper;
};

double conditional_expectation(const ScenarioTree& tree, NodeIndex node, std::span<const double> leaf_values);
/// Conditional probability of each leaf below `node` (entries outside the subtree are 0).
double conditional_leaf_prob(const ScenarioTree& tree, NodeIndex node, std::size_t leaf);
/// Essential inf/sup of psi given the node; single security only (MultiAssetUnsupported).
Extrema conditional_extrema(const ScenarioTree& tree, NodeIndex node);
ConditionalDistribution conditional_distribution(const ScenarioTree& tree, NodeIndex node);

/// Rounding used to merge payoff atoms (12 significant digits).
double canonical_payoff(double x);

}  // namespace indiff
