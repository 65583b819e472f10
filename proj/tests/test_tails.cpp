#include <cmath>
#include <random>

#include "doctest.h"
#include "indiff/errors.hpp"
#include "indiff/numeric.hpp"
#include "indiff/tails.hpp"
#include "support/bns_mc.hpp"
#include "support/support.hpp"

using namespace indiff;

namespace {

ConditionalDistribution atoms(std::vector<std::pair<double, double>> xs) {
  ConditionalDistribution d;
  for (auto [x, p] : xs) d.support.push_back({{x}, p});
  return d;
}

const std::vector<double> kRay{10.0, 50.0, 100.0, 200.0};

BNSParams generic_bns() {
  BNSParams p;
  p.m = 0.0;
  p.beta = -0.5;
  p.lambda = 1.0;
  p.rho = -0.3;
  p.sigma0_sq = 0.04;
  p.subordinator.jumps = {{0.1, 1.0}};
  return p;
}

}  // namespace

TEST_CASE("tail dominance examples") {
  SUBCASE("identical measures") {
    const auto mu = atoms({{0.0, 0.3}, {1.0, 0.7}});
    const auto r = tail_dominance(mu, mu, kRay);
    CHECK(r.verdict == TailVerdict::NotDominated);
    CHECK(*r.exact == TailVerdict::NotDominated);
    for (const auto& ray : r.rays)
      for (double v : ray.log_ratio) CHECK(std::abs(v) < 1e-12);
  }
  SUBCASE("strictly narrower support") {
    const auto mu = atoms({{0.25, 0.5}, {0.75, 0.5}});
    const auto nu = atoms({{0.0, 0.5}, {1.0, 0.5}});
    const auto r = tail_dominance(mu, nu, kRay);
    CHECK(r.verdict == TailVerdict::Dominated);
    CHECK(*r.exact == TailVerdict::Dominated);
    // Oracle: both moments evaluated directly at q = 200, scaled by e^{-q}.
    const double q = 200.0;
    const double expected = std::log(0.5 * (std::exp(0.25 * q - q) + std::exp(0.75 * q - q))) -
                            std::log(0.5 * (std::exp(-q) + 1.0));
    CHECK(r.rays[0].log_ratio.back() == doctest::Approx(expected).epsilon(1e-12));
    // Reversed roles.
    CHECK(tail_dominance(nu, mu, kRay).verdict == TailVerdict::NotDominated);
  }
  SUBCASE("shared minimum atom") {
    const auto mu = atoms({{0.0, 0.4}, {0.5, 0.6}});
    const auto nu = atoms({{0.0, 0.2}, {1.0, 0.8}});
    const auto r = tail_dominance(mu, nu, kRay);
    CHECK(r.verdict == TailVerdict::NotDominated);
    CHECK(*r.exact == TailVerdict::NotDominated);
    const auto& down = r.rays[1];
    CHECK(down.direction == -1);
    CHECK(std::exp(down.log_ratio.back()) == doctest::Approx(0.4 / 0.2).epsilon(1e-12));
  }
  SUBCASE("two securities: exact criterion not reported") {
    ConditionalDistribution mu, nu;
    mu.support = {{{0.5, 0.5}, 1.0}};
    nu.support = {{{0.0, 0.0}, 0.5}, {{1.0, 1.0}, 0.5}};
    const auto r = tail_dominance(mu, nu, kRay);
    CHECK_FALSE(r.exact.has_value());
    CHECK(r.rays.size() == 4);
    CHECK(r.verdict == TailVerdict::Dominated);
  }
}

TEST_CASE("tail dominance symmetry on random atom sets") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> atom(-4, 4), count(1, 4);
  std::uniform_real_distribution<double> w(0.1, 1.0);
  int dominated = 0;
  for (int trial = 0; trial < 300; ++trial) {
    auto draw = [&] {
      std::vector<std::pair<double, double>> xs;
      const int n = count(rng);
      double total = 0.0;
      for (int i = 0; i < n; ++i) total += xs.emplace_back(0.5 * atom(rng), w(rng)).second;
      for (auto& x : xs) x.second /= total;
      return atoms(xs);
    };
    const auto mu = draw(), nu = draw();
    const auto r = tail_dominance(mu, nu, kRay);
    CHECK(r.verdict == *r.exact);
    if (r.verdict == TailVerdict::Dominated) {
      ++dominated;
      CHECK(tail_dominance(nu, mu, kRay).verdict == TailVerdict::NotDominated);
    }
  }
  CHECK(dominated > 5);
}

TEST_CASE("decreasing tails on trees") {
  SUBCASE("two-period coin: extrema never move at t = 1") {
    const auto tree = testing_support::two_period_coin(0.5, 0.6, 0.4, 1.0, 0.0);
    const auto r = decreasing_tails_check(tree, 1);
    CHECK(r.probability == 0.0);
    CHECK(r.nodes.at(0).witnesses.empty());
    // At t = 2 every leaf is a point mass at an extremum of its parent.
    CHECK(decreasing_tails_check(tree, 2).probability == 0.0);
  }
  SUBCASE("trinomial: only the interior atom shrinks both bounds") {
    const auto tree = testing_support::one_period({-1.0, 0.0, 1.0}, {0.25, 0.35, 0.4});
    const auto r = decreasing_tails_check(tree, 1);
    CHECK(r.probability == doctest::Approx(0.35));
    REQUIRE(r.nodes.at(0).witnesses.size() == 1);
    CHECK(tree.node(r.nodes[0].witnesses[0]).id == "l1");
  }
  SUBCASE("branch keeping the maximum is excluded") {
    TreeBuilder b(1);
    const auto root = b.add_root();
    const auto a = b.add_child(root, 0.3, "a");
    const auto c = b.add_child(root, 0.7, "c");
    b.set_payoff(b.add_child(a, 0.5, "a0"), {0.0});
    b.set_payoff(b.add_child(a, 0.5, "a1"), {3.0});
    b.set_payoff(b.add_child(c, 0.5, "c0"), {1.0});
    b.set_payoff(b.add_child(c, 0.5, "c1"), {2.0});
    const auto tree = b.build();
    const auto r = decreasing_tails_check(tree, 1);
    CHECK(r.probability == doctest::Approx(0.7));
    CHECK(r.nodes[0].witnesses == std::vector<NodeIndex>{*tree.find("c")});
  }
  SUBCASE("two securities") {
    std::mt19937_64 rng(1);
    const auto tree = testing_support::random_tree(rng, 2, 2, 2, {0.0, 1.0}, 2);
    CHECK_THROWS_AS(decreasing_tails_check(tree, 1), MultiAssetUnsupported);
    CHECK_NOTHROW(decreasing_tails_numeric(tree, 1, kRay));
  }
}

TEST_CASE("exact and numeric decreasing-tails criteria agree on random trees") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int T = 1 + trial % 3;
    const auto tree = testing_support::random_tree(rng, T, 1, 3, {-2.0, -1.0, 0.0, 0.5, 1.0, 3.0});
    for (int t = 1; t <= T; ++t) {
      const auto exact = decreasing_tails_check(tree, t);
      const auto numeric = decreasing_tails_numeric(tree, t, kRay);
      REQUIRE(exact.nodes.size() == numeric.nodes.size());
      for (std::size_t i = 0; i < exact.nodes.size(); ++i)
        CHECK(exact.nodes[i].witnesses == numeric.nodes[i].witnesses);
    }
  }
}

TEST_CASE("levy exponent") {
  LevyTriplet bm{0.0, 1.0, {}};
  CHECK(levy_exponent(bm, 3.0) == doctest::Approx(4.5));
  LevyTriplet poisson{0.0, 0.0, {{1.0, 2.0}}};
  CHECK(levy_exponent(poisson, 1.5) == doctest::Approx(2.0 * std::expm1(1.5)));
  LevyTriplet small{0.2, 0.0, {{0.5, 1.0}, {-0.3, 2.0}}};
  const double q = 0.7;
  const double expected = 0.2 * q + (std::exp(0.5 * q) - 1 - 0.5 * q) + 2.0 * (std::exp(-0.3 * q) - 1 + 0.3 * q);
  CHECK(levy_exponent(small, q) == doctest::Approx(expected).epsilon(1e-14));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    LevyTriplet tr{u(rng), std::abs(u(rng)), {{u(rng) + 2.5, 1.0}, {u(rng) - 2.5, 0.5}}};
    CHECK(levy_exponent(tr, 0.0) == 0.0);
    const auto grid = numeric::linspace(-20.0, 20.0, 401);
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
      const double d2 = levy_exponent(tr, grid[i - 1]) - 2 * levy_exponent(tr, grid[i]) + levy_exponent(tr, grid[i + 1]);
      CHECK(d2 >= -1e-9 * std::max(1.0, std::abs(levy_exponent(tr, grid[i]))));
    }
  }
  CHECK_THROWS_AS(levy_exponent(poisson, 800.0), Overflow);
  try {
    levy_exponent(poisson, 800.0);
  } catch (const Overflow& e) {
    CHECK(e.argument() == 800.0);
  }
}

TEST_CASE("levy tail check") {
  const std::vector<double> qs{10.0, 50.0, 100.0};
  SUBCASE("brownian motion decays for every increment") {
    LevyTriplet bm{0.0, 1.0, {}};
    const std::vector<double> deltas{-1.0, 0.0, 1.0};
    const auto r = levy_tails_check(bm, 0.0, 1.0, 1.0, deltas, qs);
    CHECK(r.regime_up == "quadratic");
    for (const auto& s : r.samples) {
      CHECK(s.decays_both);
      CHECK(s.up.decays_numeric);
      CHECK(s.down.decays_numeric);
      CHECK(s.up.exponent.back() == doctest::Approx(100.0 * s.delta - 5000.0));
      CHECK(s.up.exponent.back() <= -4.9e3);
      CHECK(s.down.exponent.back() <= -4.9e3);
    }
  }
  SUBCASE("diffusion bound holds once h c is large enough") {
    // q |Delta| - h c q^2 / 2 < -1e3 at q = 100, |Delta| <= 10 needs h c > 0.4.
    const std::vector<double> deltas{-10.0, 10.0};
    LevyTriplet tr{0.3, 0.5, {{-1.5, 0.2}}};
    for (double h : {0.8, 1.0, 2.0}) {
      const auto r = levy_tails_check(tr, 0.0, h, 2.0, deltas, qs);
      for (const auto& s : r.samples) {
        CHECK(s.up.exponent.back() < -1e3);
        CHECK(s.down.exponent.back() < -1e3);
      }
    }
    LevyTriplet thin{0.0, 1.0, {}};
    const auto r = levy_tails_check(thin, 0.0, 0.01, 1.0, deltas, qs);
    CHECK(r.samples[1].up.exponent.back() == doctest::Approx(1000.0 - 50.0));
  }
  SUBCASE("positive jumps decay on both rays when jumps occurred") {
    LevyTriplet cp{0.0, 0.0, {{1.0, 1.0}}};
    const std::vector<double> deltas{1.0, 2.0, 3.0, 0.0};
    const auto r = levy_tails_check(cp, 0.0, 1.0, 1.0, deltas, std::vector<double>{10.0, 30.0, 50.0});
    CHECK(r.regime_up == "exponential");
    CHECK(r.regime_down == "linear");
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(r.samples[i].decays_both);
      CHECK(r.samples[i].up.decays_numeric);
      CHECK(r.samples[i].down.decays_numeric);
      // f(50) = e^{50} - 1, so the exponent is 50 Delta - e^{50} + 1.
      CHECK(r.samples[i].up.exponent.back() == doctest::Approx(50.0 * deltas[i] - std::expm1(50.0)));
    }
    // No jump: the exponent stays at h * mass as q -> -inf.
    CHECK_FALSE(r.samples[3].down.decays_exact);
    CHECK(r.samples[3].down.exponent.back() == doctest::Approx(1.0 - std::exp(-50.0)));
  }
  SUBCASE("negative jumps without diffusion: the increment decides") {
    LevyTriplet tr{0.5, 0.0, {{-2.0, 1.0}, {-0.5, 0.4}}};
    const double h = 0.5;
    const auto r0 = levy_tails_check(tr, 0.0, h, 1.0, std::vector<double>{0.0}, qs);
    CHECK(r0.regime_up == "linear");
    CHECK(r0.effective_drift == doctest::Approx(0.5 + 0.2));
    CHECK(r0.bound_rate == doctest::Approx(0.5 + 2.0));
    const double exact = h * 0.7, bound = h * 2.5;
    const std::vector<double> deltas{-2.0, exact - 1.0, exact + 0.1, bound + 0.5};
    const auto r = levy_tails_check(tr, 0.0, h, 1.0, deltas, qs);
    CHECK(r.samples[0].up.decays_exact);
    CHECK(r.samples[0].up.decays_numeric);
    CHECK(r.samples[1].up.decays_exact);
    CHECK(r.samples[1].up.decays_numeric);
    CHECK_FALSE(r.samples[2].up.decays_exact);
    CHECK_FALSE(r.samples[2].up.decays_numeric);
    CHECK(r.samples[2].in_bound_set);
    CHECK_FALSE(r.samples[3].up.decays_exact);
    CHECK_FALSE(r.samples[3].in_bound_set);
    for (const auto& s : r.samples) CHECK(s.down.decays_exact);
  }
  SUBCASE("invalid input") {
    LevyTriplet det{1.0, 0.0, {}};
    CHECK_THROWS_AS(levy_tails_check(det, 0.0, 1.0, 1.0, std::vector<double>{0.0}, qs), InvalidParams);
    LevyTriplet bm{0.0, 1.0, {}};
    CHECK_THROWS_AS(levy_tails_check(bm, 0.0, 0.0, 1.0, std::vector<double>{0.0}, qs), InvalidParams);
    CHECK_THROWS_AS(levy_tails_check(bm, 0.5, 1.0, 1.0, std::vector<double>{0.0}, qs), InvalidParams);
  }
}

TEST_CASE("BNS Laplace transform") {
  const auto p = generic_bns();
  CHECK(bns_laplace(p, 0.0, 1.0, 0.0, 0.3, 0.04) == 0.0);
  SUBCASE("no subordinator jumps reduces to the Gaussian moment") {
    auto g = p;
    g.subordinator.jumps.clear();
    for (double q : {-3.0, -1.0, 0.5, 2.0, 5.0}) {
      const double x = 0.1, s2 = 0.09, t = 0.2, T = 1.5;
      const double iv = s2 * (1 - std::exp(-g.lambda * (T - t))) / g.lambda;
      const double expected = q * (x + g.m * (T - t)) + q * g.beta * iv + 0.5 * q * q * iv;
      CHECK(bns_laplace(g, t, T, q, x, s2) == doctest::Approx(expected).epsilon(1e-10));
    }
  }
  SUBCASE("single atom: closed-form time integral at q = 1") {
    // f(s) = rho + (1/2)(1 + 2 beta) eps(s) = rho for beta = -1/2, so the integral is lambda kappa(rho) (T - t).
    const double expected = 0.04 * 0.0 / 2 + 1.0 * std::expm1(-0.3 * 0.1);
    CHECK(bns_laplace(p, 0.0, 1.0, 1.0, 0.0, 0.04) == doctest::Approx(expected).epsilon(1e-10));
  }
  SUBCASE("matches Monte Carlo") {
    const std::vector<double> qs{-2.0, -1.0, 1.0, 2.0};
    const auto mc = testing_support::bns_moment_mc(p.m, p.beta, p.lambda, p.rho, p.sigma0_sq, {0.1}, {1.0}, 1.0, qs,
                                                   200000, 11);
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const double exact = std::exp(bns_laplace(p, 0.0, 1.0, qs[i], 0.0, p.sigma0_sq));
      CHECK(std::abs(exact - mc[i].mean) <= 4 * mc[i].std_error);
    }
  }
  SUBCASE("overflow reports q") {
    try {
      bns_laplace(p, 0.0, 1.0, 200.0, 0.0, 0.04);
      FAIL("expected overflow");
    } catch (const Overflow& e) {
      CHECK(e.argument() == 200.0);
    }
  }
  SUBCASE("validation") {
    auto bad = p;
    bad.rho = 0.1;
    CHECK_THROWS_AS(bns_laplace(bad, 0.0, 1.0, 1.0, 0.0, 0.04), InvalidParams);
    CHECK_THROWS_AS(bns_laplace(p, 1.0, 1.0, 1.0, 0.0, 0.04), InvalidParams);
  }
}

TEST_CASE("BNS increments simulation") {
  auto g = generic_bns();
  g.subordinator.jumps.clear();
  const auto s = bns_simulate_increments(g, 0.2, 0.3, 1.0, 5, 42);
  const double var_t = g.sigma0_sq * std::exp(-0.2), var_th = g.sigma0_sq * std::exp(-0.5);
  for (const auto& x : s)
    CHECK(x.deps_var == doctest::Approx(bns_epsilon(g, 0.5, 1.0) * var_th - bns_epsilon(g, 0.2, 1.0) * var_t));
  const auto p = generic_bns();
  const auto a = bns_simulate_increments(p, 0.0, 0.5, 1.0, 100, 7);
  const auto b = bns_simulate_increments(p, 0.0, 0.5, 1.0, 100, 7);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].dx == b[i].dx);
    CHECK(a[i].deps_var == b[i].deps_var);
  }
}

TEST_CASE("BNS tail bracket") {
  const auto p = generic_bns();
  const double t = 0.0, h = 0.5, T = 1.0;
  const auto samples = bns_simulate_increments(p, t, h, T, 50, 3);
  CHECK(bns_bracket(p, t, h, T, samples[0], 0.0) == 0.0);
  const auto r = bns_tails_check(p, t, h, T, samples, std::vector<double>{5.0, 20.0, 50.0});
  CHECK(r.all_diverge);
  for (const auto& s : r.samples) {
    CHECK(s.up.back() < -1e3);
    CHECK(s.down.back() < -1e3);
    CHECK(s.up.back() == doctest::Approx(bns_bracket(p, t, h, T, s.sample, 50.0)));
  }
  // Closed-form integral of eps(s, T)^3 over [t, t + h].
  auto antiderivative = [&](double s) {
    const double u = std::exp(-p.lambda * (T - s));
    const double l = p.lambda;
    return (s - 3 * u / l + 3 * u * u / (2 * l) - u * u * u / (3 * l)) / (l * l * l);
  };
  const double eps3 = antiderivative(t + h) - antiderivative(t);
  CHECK(r.q6_coefficient == doctest::Approx(p.lambda / 48.0 * eps3 * 1.0 * 0.001).epsilon(1e-9));
  CHECK(r.q6_coefficient > 0.0);
}
