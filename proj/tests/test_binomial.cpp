#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "indiff/binomial.hpp"
#include "indiff/errors.hpp"
#include "support/support.hpp"

using namespace indiff;
using testing_support::exponential_panel;

namespace {

BinomialModel coin_model(double alpha = 1.0) {
  return BinomialModel(testing_support::one_period({1.0, -1.0}, {0.5, 0.5}), exponential_panel({alpha}));
}

// Binary tree of depth T with the given leaf payoffs (in preorder) and random probabilities.
ScenarioTree binary_tree(const std::vector<double>& leaves, int T, std::mt19937_64* rng = nullptr) {
  std::uniform_real_distribution<double> pd(0.2, 0.8);
  TreeBuilder b(1);
  std::size_t next_leaf = 0;
  std::function<void(TreeBuilder::Handle, int)> grow = [&](TreeBuilder::Handle h, int t) {
    if (t == T) {
      b.set_payoff(h, {leaves[next_leaf++]});
      return;
    }
    const double p = rng ? pd(*rng) : 0.5;
    grow(b.add_child(h, p), t + 1);
    grow(b.add_child(h, 1 - p), t + 1);
  };
  grow(b.add_root(), 0);
  return b.build();
}

}  // namespace

TEST_CASE("completeness examples") {
  SUBCASE("single period with distinct payoffs") {
    const BinomialModel m(testing_support::one_period({1.0, 0.0}, {0.5, 0.5}), exponential_panel({1.0}));
    const auto rep = completeness_check(m);
    CHECK(rep.complete);
    CHECK(rep.violations.empty());
  }
  SUBCASE("payoff independent of the first coin") {
    const BinomialModel m(testing_support::two_period_coin(0.5, 0.6, 0.4, 1.0, 0.0), exponential_panel({1.0}));
    const auto rep = completeness_check(m);
    CHECK_FALSE(rep.complete);
    CHECK(rep.violations.size() == 2);
    for (const auto& v : rep.violations) CHECK(v.node == 0);
    CHECK_FALSE(rep.weak_condition);
  }
  SUBCASE("deterministic payoff") {
    const BinomialModel m(testing_support::two_period_coin(0.5, 0.6, 0.4, 2.0, 2.0), exponential_panel({1.0}));
    CHECK_FALSE(completeness_check(m).complete);
  }
  SUBCASE("non-binary trees are rejected") {
    CHECK_THROWS_AS(BinomialModel(testing_support::one_period({1.0, 0.0, -1.0}, {0.3, 0.3, 0.4}), exponential_panel({1.0})),
                    NotBinomial);
    CHECK_THROWS_AS(BinomialModel(testing_support::one_period({1.0, 0.0}, {0.5, 0.5}), exponential_panel({1.0, 2.0})),
                    NotBinomial);
  }
}

TEST_CASE("replication of a constant claim") {
  const auto m = coin_model();
  const std::vector<double> h{0.7, 0.7};
  const auto r = replicate(m, h);
  REQUIRE(std::holds_alternative<Replication>(r));
  const auto& rep = std::get<Replication>(r);
  CHECK(rep.pi == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(std::abs(rep.positions.at(0)[0]) < 1e-12);
}

TEST_CASE("replication of the security on a fair coin") {
  const auto m = coin_model();
  const std::vector<double> h{1.0, -1.0};
  const auto r = replicate(m, h);
  REQUIRE(std::holds_alternative<Replication>(r));
  const auto& rep = std::get<Replication>(r);
  CHECK(std::abs(rep.pi - std::log(std::cosh(1.0))) < 1e-9);
  CHECK(std::abs(rep.positions.at(0)[0] + 1.0) < 1e-9);
  // Hand check: e^{1}/cosh(1) = e^{-Q}/cosh(Q) at Q = -1.
  CHECK(std::exp(1.0) / std::cosh(1.0) == doctest::Approx(std::exp(1.0) / std::cosh(-1.0)));
  CHECK(replication_verify(m, h, rep.pi, rep.positions) < 1e-9);

  Strategy bumped = rep.positions;
  bumped.at(0)[0] += 0.1;
  CHECK(replication_verify(m, h, rep.pi, bumped) > 1e-3);
  CHECK(replication_verify(m, std::vector<double>{0.0, 0.0}, 0.0, Strategy(m.tree())) == 0.0);
}

TEST_CASE("claim with a friction-free limit is not replicable") {
  const BinomialModel m(testing_support::two_period_coin(0.5, 0.6, 0.4, 1.0, 0.0), exponential_panel({1.0}));
  const auto& tree = m.tree();
  std::vector<double> h(tree.leaf_count());
  for (std::size_t k = 0; k < h.size(); ++k) {
    const auto& parent = tree.node(*tree.node(tree.leaf_node(k)).parent);
    h[k] = parent.id == "u" ? -std::log(1.25) : -std::log(5.0 / 6.0);
  }
  const auto r = replicate(m, h);
  REQUIRE(std::holds_alternative<Infeasible>(r));
  CHECK(std::get<Infeasible>(r).node == 0);
}

TEST_CASE("attainable ratio interval") {
  SUBCASE("deterministic payoff") {
    const BinomialModel m(testing_support::two_period_coin(0.5, 0.6, 0.4, 3.0, 3.0), exponential_panel({1.0}));
    const auto iv = claim3_interval(m, 0);
    CHECK(iv.lower == doctest::Approx(1.0));
    CHECK(iv.upper == doctest::Approx(1.0));
  }
  SUBCASE("fair coin") {
    const auto m = coin_model();
    const NodeIndex up = m.tree().leaf_node(0);
    const auto iv = claim3_interval(m, 0, up);
    CHECK(iv.upper == doctest::Approx(2.0));
    CHECK(iv.lower == 0.0);
  }
  SUBCASE("two-period coin, atom masses") {
    const double p1 = 0.5, p2 = 0.6, p3 = 0.4;
    const BinomialModel m(testing_support::two_period_coin(p1, p2, p3, 1.0, 0.0), exponential_panel({1.0}));
    const NodeIndex up = *m.tree().find("u");
    const auto iv = claim3_interval(m, 0, up);
    const double B = p1 * p2 + (1 - p1) * p3;
    CHECK(iv.lower == doctest::Approx((1 - p2) / (1 - B)));
    CHECK(iv.upper == doctest::Approx(p2 / B));
    // The map approaches the endpoints.
    CHECK(std::exp(log_ratio_map(m, 0, up, 60.0)) == doctest::Approx(iv.lower).epsilon(1e-9));
    CHECK(std::exp(log_ratio_map(m, 0, up, -60.0)) == doctest::Approx(iv.upper).epsilon(1e-9));
  }
}

TEST_CASE("replication on random complete binomial trees") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> hd(-1.0, 1.0);
  std::uniform_int_distribution<int> vd(0, 3);
  int complete = 0;
  for (int trial = 0; trial < 200 && complete < 30; ++trial) {
    const int T = 1 + trial % 3;
    std::vector<double> leaves(std::size_t{1} << T);
    for (auto& v : leaves) v = vd(rng);
    const BinomialModel m(binary_tree(leaves, T, &rng), exponential_panel({0.8}));
    if (!completeness_check(m).complete) continue;
    ++complete;
    std::vector<double> h(leaves.size());
    for (auto& x : h) x = hd(rng);
    const auto r = replicate(m, h);
    REQUIRE(std::holds_alternative<Replication>(r));
    const auto& rep = std::get<Replication>(r);
    CHECK(replication_verify(m, h, rep.pi, rep.positions) < 1e-9);
    // The second child's ratio equation holds as well.
    for (NodeIndex n = 0; n < m.tree().size(); ++n) {
      const auto& nd = m.tree().node(n);
      if (nd.is_leaf()) continue;
      const NodeIndex c = nd.children.back();
      double num = 0.0, den = 0.0;
      for (std::size_t k = nd.leaf_begin; k < nd.leaf_end; ++k) {
        den += conditional_leaf_prob(m.tree(), n, k) * std::exp(0.8 * h[k]);
        num += conditional_leaf_prob(m.tree(), c, k) * std::exp(0.8 * h[k]);
      }
      CHECK(log_ratio_map(m, n, c, rep.positions.at(n)[0]) == doctest::Approx(std::log(num / den)).epsilon(1e-8));
    }
  }
  CHECK(complete >= 10);
}

TEST_CASE("replication with a random endowment uses the changed measure") {
  std::mt19937_64 rng(29);
  const auto tree = binary_tree({0.0, 1.0, 2.0, 3.0}, 2, &rng);
  auto panel = exponential_panel({1.2});
  panel.endowment_base = 0.3;
  panel.endowment_position = {0.5};
  const BinomialModel m(tree, panel);
  const std::vector<double> h{0.2, -0.4, 1.0, 0.1};
  const auto r = replicate(m, h);
  REQUIRE(std::holds_alternative<Replication>(r));
  const auto& rep = std::get<Replication>(r);
  CHECK(replication_verify(m, h, rep.pi, rep.positions) < 1e-9);
}

TEST_CASE("ratio map is monotone when child supports are ordered") {
  std::mt19937_64 rng(31);
  const BinomialModel m(binary_tree({0.0, 1.0, 2.0, 3.0}, 2, &rng), exponential_panel({1.0}));
  const NodeIndex c = m.tree().node(0).children.front();  // carries {0, 1}, the lower atoms
  double prev = log_ratio_map(m, 0, c, -8.0);
  for (double q = -7.75; q <= 8.0; q += 0.25) {
    const double cur = log_ratio_map(m, 0, c, q);
    CHECK(cur > prev);
    prev = cur;
  }
}
