#include <cmath>
#include <random>

#include "doctest.h"
#include "indiff/binomial.hpp"
#include "indiff/errors.hpp"
#include "indiff/superrep.hpp"
#include "support/support.hpp"

using namespace indiff;
using testing_support::exponential_panel;

TEST_CASE("zero claim costs nothing") {
  const auto tree = testing_support::one_period({1.0, -1.0}, {0.5, 0.5});
  const std::vector<double> h{0.0, 0.0};
  const auto r = superreplication_price(tree, exponential_panel({1.0}), h);
  CHECK(std::abs(r.price_upper) < 1e-12);
  CHECK(r.attained == Attainment::Attained);
}

TEST_CASE("fair coin claim equal to the security") {
  const auto tree = testing_support::one_period({1.0, -1.0}, {0.5, 0.5});
  const std::vector<double> h{1.0, -1.0};
  const double exact = std::log(std::cosh(1.0));
  for (bool warm : {true, false}) {
    SearchConfig cfg;
    cfg.warm_start = warm;
    const auto r = superreplication_price(tree, exponential_panel({1.0}), h, cfg);
    CHECK(r.warm_started == warm);
    CHECK(std::abs(r.price_upper - exact) < 1e-8);
    CHECK(std::abs(r.best_strategy.at(0)[0] + 1.0) < 1e-6);
    CHECK(r.attained == Attainment::Attained);
  }
}

TEST_CASE("search result is reproducible and the curve is monotone") {
  std::mt19937_64 rng(5);
  const auto tree = testing_support::random_tree(rng, 2, 2, 3, {-1.0, 0.0, 0.5, 1.0});
  const auto panel = testing_support::random_panel(rng, 2);
  std::vector<double> h(tree.leaf_count());
  std::uniform_real_distribution<double> hd(-1.0, 1.0);
  for (auto& x : h) x = hd(rng);
  SearchConfig cfg;
  cfg.levels = 4;
  const auto r = superreplication_price(tree, panel, h, cfg);
  const auto u0 = initial_utilities(tree, panel);
  CHECK(std::abs(r.verification_gap) < 1e-12);
  CHECK(superreplication_cost(tree, panel, u0, r.best_strategy, h) == doctest::Approx(r.price_upper).epsilon(1e-14));
  CHECK(r.price_upper <= superreplication_cost(tree, panel, u0, Strategy(tree), h) + 1e-14);
  for (std::size_t k = 1; k < r.price_curve.size(); ++k) CHECK(r.price_curve[k].price <= r.price_curve[k - 1].price);
  const auto again = superreplication_price(tree, panel, h, cfg);
  CHECK(again.price_upper == r.price_upper);
  CHECK(again.best_strategy == r.best_strategy);
}

TEST_CASE("search budget is enforced") {
  const auto tree = testing_support::one_period({1.0, -1.0}, {0.5, 0.5});
  SearchConfig cfg;
  cfg.max_evaluations = 10;
  CHECK_THROWS_AS(superreplication_price(tree, exponential_panel({1.0}), std::vector<double>{1.0, 0.0}, cfg),
                  BudgetExceeded);
}

TEST_CASE("counterexample report") {
  const double p1 = 0.5, p2 = 0.6, p3 = 0.4, alpha = 1.0;
  const std::vector<double> qs{1.0, 10.0, 100.0, 1000.0};
  const auto rep = counterexample_run(p1, p2, p3, alpha, 1.0, 0.0, qs);
  CHECK(rep.B == doctest::Approx(0.5));
  REQUIRE(rep.nodes.size() == 2);
  const auto& up = rep.nodes[0];
  const auto& down = rep.nodes[1];
  CHECK(up.id == "u");
  CHECK(up.utility_limit == doctest::Approx(-0.8));
  CHECK(down.utility_limit == doctest::Approx(-1.2));
  CHECK(up.cash_limit == doctest::Approx(std::log(1.25)));
  CHECK(down.cash_limit == doctest::Approx(std::log(5.0 / 6.0)));
  // Closed form for U_1 at the first schedule point.
  for (const auto* node : {&up, &down}) {
    const double e = std::exp(-alpha * qs[0]);
    const double expected = -(node->A * e + 1 - node->A) / (rep.B * e + 1 - rep.B);
    CHECK(node->utility[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(node->utility.back() - node->utility_limit) < 1e-12);
    CHECK(std::abs(node->cash.back() - node->cash_limit) < 1e-12);
    CHECK(node->derivative_checked);
  }
  CHECK(up.derivative_sign == 1);
  CHECK(down.derivative_sign == -1);
  CHECK_FALSE(rep.replicable);
  CHECK(rep.superreplication.price_upper >= 0.0);
  CHECK(rep.superreplication.price_upper < 1e-6);
  CHECK(rep.superreplication.attained == Attainment::NotAttainedEvidence);
  CHECK_FALSE(rep.conclusion.empty());
}

TEST_CASE("counterexample parameters") {
  const std::vector<double> qs{1.0};
  CHECK_THROWS_AS(counterexample_run(0.5, 0.5, 0.5, 1.0, 1.0, 0.0, qs), InvalidParams);
  CHECK_THROWS_AS(counterexample_run(0.0, 0.6, 0.4, 1.0, 1.0, 0.0, qs), InvalidParams);
  CHECK_THROWS_AS(counterexample_run(0.5, 0.6, 0.4, 1.0, 0.0, 1.0, qs), InvalidParams);
  CHECK_THROWS_AS(counterexample_run(0.5, 0.6, 0.4, -1.0, 1.0, 0.0, qs), InvalidParams);
}

TEST_CASE("swapping p2 and p3 swaps the node roles") {
  SearchConfig cfg;
  cfg.levels = 2;
  const std::vector<double> qs{0.5, 3.0};
  const auto a = counterexample_run(0.5, 0.7, 0.2, 1.5, 1.0, -1.0, qs, cfg);
  const auto b = counterexample_run(0.5, 0.2, 0.7, 1.5, 1.0, -1.0, qs, cfg);
  for (int i = 0; i < 2; ++i) {
    const auto& x = a.nodes[static_cast<std::size_t>(i)];
    const auto& y = b.nodes[static_cast<std::size_t>(1 - i)];
    CHECK(x.utility_limit == doctest::Approx(y.utility_limit).epsilon(1e-14));
    CHECK(x.cash_limit == doctest::Approx(y.cash_limit).epsilon(1e-14));
    CHECK(x.derivative_sign == y.derivative_sign);
  }
}

TEST_CASE("friction probe") {
  const std::vector<double> scales{0.0, 10.0, 20.0, 40.0, 80.0};
  const double u[] = {-1.0};
  SUBCASE("counterexample tree: losses settle") {
    const auto tree = counterexample_tree(0.5, 0.6, 0.4, 1.0, 0.0);
    const auto rep = efficient_friction_probe(tree, exponential_panel({1.0}), 1, u, scales);
    CHECK_FALSE(rep.diverges);
    for (double l : rep.scales.front().losses) CHECK(std::abs(l) < 1e-14);
  }
  SUBCASE("trinomial with an interior atom: losses grow linearly") {
    const auto tree = testing_support::one_period({-1.0, 0.0, 1.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    const auto rep = efficient_friction_probe(tree, exponential_panel({1.0}), 1, u, scales);
    CHECK(rep.diverges);
    // The maker prices at the lowest atom; every higher atom loses linearly.
    CHECK(rep.diverging_leaves == std::vector<std::size_t>{1, 2});
    CHECK(std::abs(rep.final_slope[0]) < 1e-12);
    CHECK(rep.final_slope[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.final_slope[2] == doctest::Approx(2.0).epsilon(1e-9));
    // Loss at the middle atom is Q - log 3 up to e^{-Q} terms.
    CHECK(rep.scales.back().losses[1] == doctest::Approx(80.0 - std::log(3.0)).epsilon(1e-12));
  }
  SUBCASE("rejects bad input") {
    const auto tree = counterexample_tree(0.5, 0.6, 0.4, 1.0, 0.0);
    CHECK_THROWS_AS(efficient_friction_probe(tree, exponential_panel({1.0}), 3, u, scales), InvalidParams);
    const double pos[] = {1.0};
    CHECK_THROWS_AS(efficient_friction_probe(tree, exponential_panel({1.0}), 1, pos, scales), InvalidParams);
  }
}

TEST_CASE("cash ratio asymptotics") {
  const std::vector<double> scales{1.0, 10.0, 100.0, 1000.0};
  SUBCASE("trinomial, both directions") {
    const auto tree = testing_support::one_period({-1.0, 0.0, 2.0}, {0.2, 0.5, 0.3});
    for (int sign : {1, -1}) {
      const auto nodes = cash_ratio_asymptotics(tree, exponential_panel({1.5}), 1, sign, scales);
      REQUIRE(nodes.size() == 1);
      CHECK(nodes[0].limit == (sign > 0 ? 1.0 : -2.0));
      // Oracle: X(Q) = (1/a) log E[e^{-a Q psi}] at U = -1.
      for (std::size_t i = 0; i < scales.size(); ++i) {
        const double q = sign * scales[i];
        const double x = std::log(0.2 * std::exp(1.5 * q) + 0.5 + 0.3 * std::exp(-3.0 * q)) / 1.5;
        if (std::isfinite(x)) CHECK(nodes[0].ratios[i] == doctest::Approx(x / q).epsilon(1e-12));
      }
      const double pmin = sign > 0 ? 0.2 : 0.3;
      CHECK(nodes[0].error <= std::abs(std::log(pmin)) / (1.5 * 1000.0) + 1e-12);
    }
  }
  SUBCASE("deterministic payoff gives the exact ratio") {
    const auto tree = testing_support::one_period({0.7, 0.7}, {0.4, 0.6});
    const auto nodes = cash_ratio_asymptotics(tree, exponential_panel({1.0}), 1, 1, scales);
    for (double r : nodes[0].ratios) CHECK(r == doctest::Approx(-0.7).epsilon(1e-12));
  }
  SUBCASE("second period nodes") {
    const auto tree = counterexample_tree(0.5, 0.6, 0.4, 1.0, 0.0);
    const auto nodes = cash_ratio_asymptotics(tree, exponential_panel({1.0}), 2, -1, scales);
    CHECK(nodes.size() == 2);
    for (const auto& n : nodes) {
      CHECK(n.limit == -1.0);
      CHECK(n.error < 1e-3);
    }
  }
}
