#include "indiff/superrep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "indiff/binomial.hpp"
#include "indiff/errors.hpp"
#include "indiff/numeric.hpp"
#include "indiff/parallel.hpp"

namespace indiff {

std::string to_string(Attainment a) {
  switch (a) {
    case Attainment::Attained:
      return "attained";
    case Attainment::NotAttainedEvidence:
      return "not-attained-evidence";
    case Attainment::Unknown:
      return "unknown";
  }
  return "unknown";
}

namespace {

double cost_of(const ScenarioTree& tree, const SystemPath& path, std::span<const double> claim) {
  const auto pnl = investor_pnl(tree, path);
  double worst = -numeric::kInf;
  for (std::size_t k = 0; k < pnl.size(); ++k) worst = std::max(worst, pnl[k] + claim[k]);
  return std::isnan(worst) ? numeric::kInf : worst;
}

class CoordinateSearch {
 public:
  CoordinateSearch(const ScenarioTree& tree, const MarketMakerPanel& panel, std::span<const double> claim,
                   std::vector<double> u0, Strategy start)
      : tree_(tree), panel_(panel), claim_(claim), u0_(std::move(u0)), endowment_(panel.endowment(tree)),
        current_(std::move(start)) {
    path_ = evolve(tree_, panel_, u0_, current_);
    price_ = cost_of(tree_, path_, claim_);
    ++evaluations_;
  }

  double price() const { return price_; }
  const Strategy& strategy() const { return current_; }
  std::size_t evaluations() const { return evaluations_; }

  double trial(NodeIndex n, std::size_t j, double value) const {
    Strategy s = current_;
    s.at(n)[j] = value;
    SystemPath p = path_;
    try {
      evolve_subtree(tree_, panel_, p, s, n, endowment_);
    } catch (const NonConvergence&) {
      return numeric::kInf;
    }
    return cost_of(tree_, p, claim_);
  }

  // Grid plus golden-section refinement on one coordinate; returns true on improvement.
  bool optimize(NodeIndex n, std::size_t j, double box, int grid_points, int golden_iterations) {
    const auto grid = numeric::linspace(-box, box, static_cast<std::size_t>(grid_points));
    std::vector<double> values(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) { values[i] = trial(n, j, grid[i]); });
    evaluations_ += grid.size();
    const std::size_t i = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    double best_x = grid[i], best = values[i];
    const double a = grid[i == 0 ? 0 : i - 1], b = grid[std::min(i + 1, grid.size() - 1)];
    int calls = 0;
    auto f = [&](double x) {
      ++calls;
      return trial(n, j, x);
    };
    const auto refined = numeric::golden_section_min(f, a, b, 1e-13, golden_iterations);
    evaluations_ += static_cast<std::size_t>(calls);
    if (refined.value < best) {
      best = refined.value;
      best_x = refined.x;
    }
    if (!(best < price_)) return false;
    current_.at(n)[j] = best_x;
    evolve_subtree(tree_, panel_, path_, current_, n, endowment_);
    price_ = cost_of(tree_, path_, claim_);
    return true;
  }

 private:
  const ScenarioTree& tree_;
  const MarketMakerPanel& panel_;
  std::span<const double> claim_;
  std::vector<double> u0_;
  LeafValues endowment_;
  Strategy current_;
  SystemPath path_;
  double price_;
  std::size_t evaluations_ = 0;
};

std::optional<Strategy> replication_warm_start(const ScenarioTree& tree, const MarketMakerPanel& panel,
                                               std::span<const double> claim) {
  try {
    const BinomialModel model(tree, panel);
    if (!completeness_check(model).complete) return std::nullopt;
    auto r = replicate(model, claim);
    if (auto* rep = std::get_if<Replication>(&r)) return rep->positions;
  } catch (const NotBinomial&) {
  }
  return std::nullopt;
}

}  // namespace

double superreplication_cost(const ScenarioTree& tree, const MarketMakerPanel& panel, std::span<const double> u_start,
                             const Strategy& strategy, std::span<const double> claim) {
  return cost_of(tree, evolve(tree, panel, u_start, strategy), claim);
}

SuperrepResult superreplication_price(const ScenarioTree& tree, const MarketMakerPanel& panel,
                                      std::span<const double> claim, const SearchConfig& config) {
  if (claim.size() != tree.leaf_count()) throw InvalidParams("claim must be leaf-indexed");
  if (config.levels < 1 || config.grid_points < 3 || config.sweeps < 1 || !(config.initial_box > 0.0) ||
      !(config.box_growth >= 1.0))
    throw InvalidParams("invalid search configuration");
  std::vector<std::pair<NodeIndex, std::size_t>> coords;
  for (NodeIndex n = 0; n < tree.size(); ++n)
    if (!tree.node(n).is_leaf())
      for (int j = 0; j < tree.securities(); ++j) coords.push_back({n, static_cast<std::size_t>(j)});
  const double planned = static_cast<double>(coords.size()) * (config.grid_points + config.golden_iterations) *
                         config.sweeps * config.levels;
  if (planned > static_cast<double>(config.max_evaluations))
    throw BudgetExceeded("search plan needs up to " + std::to_string(static_cast<long long>(planned)) +
                         " evaluations, cap is " + std::to_string(config.max_evaluations));

  const auto u0 = config.initial_utilities ? *config.initial_utilities : initial_utilities(tree, panel);
  SuperrepResult result;
  Strategy start(tree);
  if (config.warm_start && !config.initial_utilities) {
    if (auto warm = replication_warm_start(tree, panel, claim)) {
      const double warm_cost = superreplication_cost(tree, panel, u0, *warm, claim);
      const double zero_cost = superreplication_cost(tree, panel, u0, start, claim);
      if (warm_cost <= zero_cost) {
        start = *warm;
        result.warm_started = true;
      }
    }
  }

  CoordinateSearch search(tree, panel, claim, u0, start);
  double box = config.initial_box;
  for (int level = 0; level < config.levels; ++level, box *= config.box_growth) {
    for (int sweep = 0; sweep < config.sweeps; ++sweep) {
      bool improved = false;
      for (auto [n, j] : coords) improved = search.optimize(n, j, box, config.grid_points, config.golden_iterations) || improved;
      if (!improved) break;
    }
    result.price_curve.push_back({level, box, search.evaluations(), search.price()});
  }

  result.best_strategy = search.strategy();
  result.evaluations = search.evaluations();
  const double verified = superreplication_cost(tree, panel, u0, result.best_strategy, claim);
  result.verification_gap = verified - search.price();
  result.price_upper = std::max(verified, search.price());

  // Attainment diagnostics from the shape of the price curve.
  const auto& curve = result.price_curve;
  const double final_box = curve.back().box;
  double max_q = 0.0;
  bool on_boundary = false;
  for (auto [n, j] : coords) {
    const double q = std::abs(result.best_strategy.at(n)[j]);
    max_q = std::max(max_q, q);
    on_boundary = on_boundary || q >= final_box * (1 - 1e-6);
  }
  auto noise = [&](double p) { return 1e-14 * std::max(1.0, std::abs(p)); };
  bool decreasing = static_cast<int>(curve.size()) > config.evidence_levels;
  for (std::size_t k = curve.size() - static_cast<std::size_t>(std::min<int>(config.evidence_levels, static_cast<int>(curve.size()) - 1));
       decreasing && k < curve.size(); ++k)
    decreasing = curve[k].price < curve[k - 1].price - noise(curve[k - 1].price);
  bool flat = curve.size() < 2 || curve[curve.size() - 2].price - curve.back().price <= 1e-12 * std::max(1.0, std::abs(curve.back().price));
  if (decreasing && on_boundary && max_q > config.divergence_threshold)
    result.attained = Attainment::NotAttainedEvidence;
  else if (!on_boundary && flat)
    result.attained = Attainment::Attained;
  else
    result.attained = Attainment::Unknown;
  return result;
}

FrictionReport efficient_friction_probe(const ScenarioTree& tree, const MarketMakerPanel& panel, int t,
                                        std::span<const double> u_levels, std::span<const double> scale_schedule,
                                        const std::map<NodeIndex, std::vector<double>>& direction, double slope_tol) {
  if (t < 1 || t > tree.horizon()) throw InvalidParams("friction probe time must lie in 1..T");
  if (u_levels.size() != panel.size()) throw InvalidParams("utility levels do not match the panel");
  for (double u : u_levels)
    if (!(u < 0.0) || !std::isfinite(u)) throw InvalidParams("utility levels must be finite and negative");
  const auto starts = tree.nodes_at(t - 1);
  FrictionReport rep;
  rep.t = t;
  for (double scale : scale_schedule) {
    FrictionScale fs{scale, std::vector<double>(tree.leaf_count(), numeric::kNaN), {}};
    Strategy s(tree);
    for (NodeIndex n : starts) {
      auto it = direction.find(n);
      for (int j = 0; j < tree.securities(); ++j)
        s.at(n)[j] = scale * (it == direction.end() ? 1.0 : it->second.at(static_cast<std::size_t>(j)));
    }
    try {
      for (NodeIndex n : starts) {
        const auto path = evolve(tree, panel, u_levels, s, n);
        const auto pnl = investor_pnl(tree, path);
        const auto& nd = tree.node(n);
        for (std::size_t k = nd.leaf_begin; k < nd.leaf_end; ++k) fs.losses[k] = pnl[k];
      }
    } catch (const NonConvergence& e) {
      fs.error = e.what();
    }
    rep.scales.push_back(std::move(fs));
  }
  // Slope between the last two scales that evaluated cleanly.
  std::vector<const FrictionScale*> ok;
  for (const auto& fs : rep.scales)
    if (fs.error.empty()) ok.push_back(&fs);
  rep.final_slope.assign(tree.leaf_count(), numeric::kNaN);
  if (ok.size() >= 2) {
    const auto& a = *ok[ok.size() - 2];
    const auto& b = *ok.back();
    for (std::size_t k = 0; k < tree.leaf_count(); ++k) {
      rep.final_slope[k] = (b.losses[k] - a.losses[k]) / (b.scale - a.scale);
      if (rep.final_slope[k] > slope_tol) rep.diverging_leaves.push_back(k);
    }
  }
  rep.diverges = !rep.diverging_leaves.empty();
  return rep;
}

std::vector<CashRatioNode> cash_ratio_asymptotics(const ScenarioTree& tree, const MarketMakerPanel& panel, int t,
                                                  int sign, std::span<const double> scale_schedule,
                                                  std::span<const double> u_levels) {
  if (tree.securities() != 1) throw MultiAssetUnsupported("cash ratio asymptotics need a single security");
  if (t < 1 || t > tree.horizon()) throw InvalidParams("time must lie in 1..T");
  if (sign == 0) throw InvalidParams("direction sign must be +1 or -1");
  std::vector<double> log_neg(panel.size(), 0.0);
  if (!u_levels.empty()) {
    if (u_levels.size() != panel.size()) throw InvalidParams("utility levels do not match the panel");
    for (std::size_t m = 0; m < panel.size(); ++m) log_neg[m] = std::log(-u_levels[m]);
  }
  const auto endowment = panel.endowment(tree);
  std::vector<CashRatioNode> out;
  for (NodeIndex n : tree.nodes_at(t - 1)) {
    const auto e = conditional_extrema(tree, n);
    CashRatioNode node{n, {}, sign > 0 ? -e.lower : -e.upper, 0.0};
    for (double s : scale_schedule) {
      const double q[] = {sign > 0 ? std::abs(s) : -std::abs(s)};
      const auto step = indifference_step_log(tree, panel, n, log_neg, q, endowment);
      node.ratios.push_back(step.cash / q[0]);
    }
    node.error = node.ratios.empty() ? numeric::kNaN : std::abs(node.ratios.back() - node.limit);
    out.push_back(std::move(node));
  }
  return out;
}

ScenarioTree counterexample_tree(double p1, double p2, double p3, double psi_u, double psi_d) {
  TreeBuilder b(1);
  const auto root = b.add_root("root");
  const auto up = b.add_child(root, p1, "u");
  const auto down = b.add_child(root, 1 - p1, "d");
  b.set_payoff(b.add_child(up, p2, "uu"), {psi_u});
  b.set_payoff(b.add_child(up, 1 - p2, "ud"), {psi_d});
  b.set_payoff(b.add_child(down, p3, "du"), {psi_u});
  b.set_payoff(b.add_child(down, 1 - p3, "dd"), {psi_d});
  return b.build();
}

CounterexampleReport counterexample_run(double p1, double p2, double p3, double alpha, double psi_u, double psi_d,
                                        std::span<const double> q_schedule, const SearchConfig& config) {
  auto in_unit = [](double p) { return p > 0.0 && p < 1.0; };
  if (!in_unit(p1) || !in_unit(p2) || !in_unit(p3)) throw InvalidParams("probabilities must lie in (0, 1)");
  if (p2 == p3) throw InvalidParams("p2 and p3 must differ");
  if (!(psi_u > psi_d)) throw InvalidParams("need psi_u > psi_d");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidParams("alpha must be positive");

  const auto tree = counterexample_tree(p1, p2, p3, psi_u, psi_d);
  MarketMakerPanel panel;
  panel.makers.push_back(UtilitySpec::exponential(alpha));
  panel.initial_allocation = {0.0};
  const double u0[] = {-1.0};

  CounterexampleReport rep;
  rep.B = p1 * p2 + (1 - p1) * p3;
  rep.q_schedule.assign(q_schedule.begin(), q_schedule.end());
  const NodeIndex ids[2] = {*tree.find("u"), *tree.find("d")};
  const double As[2] = {p2, p3};
  for (int i = 0; i < 2; ++i) {
    CounterexampleNode node;
    node.id = tree.node(ids[i]).id;
    node.A = As[i];
    node.utility_limit = -(1 - node.A) / (1 - rep.B);
    node.cash_limit = std::log((1 - rep.B) / (1 - node.A)) / alpha;
    node.derivative_sign = (node.A > rep.B) ? 1 : -1;
    rep.nodes.push_back(std::move(node));
  }

  auto run = [&](double q) {
    Strategy s(tree);
    s.at(tree.root())[0] = q;
    return evolve(tree, panel, u0, s);
  };
  for (double q : q_schedule) {
    const auto path = run(q);
    for (int i = 0; i < 2; ++i) {
      rep.nodes[static_cast<std::size_t>(i)].utility.push_back(path.utility(ids[i], 0));
      rep.nodes[static_cast<std::size_t>(i)].cash.push_back(path.cash[ids[i]]);
    }
  }
  // Finite-difference confirmation of the derivative sign on moderate positions.
  for (int i = 0; i < 2; ++i) {
    auto& node = rep.nodes[static_cast<std::size_t>(i)];
    node.derivative_checked = true;
    for (double q : numeric::linspace(-5.0, 5.0, 20)) {
      const double h = 1e-5;
      const double d = (run(q + h).utility(ids[i], 0) - run(q - h).utility(ids[i], 0)) / (2 * h);
      node.derivative_checked = node.derivative_checked && d * node.derivative_sign > 0;
    }
  }

  // Claim H = -X_2 in the limit: minus the limiting cash of the leaf's first-period node.
  std::vector<double> claim(tree.leaf_count());
  for (std::size_t k = 0; k < claim.size(); ++k) {
    const NodeIndex parent = *tree.node(tree.leaf_node(k)).parent;
    claim[k] = -rep.nodes[parent == ids[0] ? 0 : 1].cash_limit;
  }
  rep.superreplication = superreplication_price(tree, panel, claim, config);
  const BinomialModel model(tree, panel);
  rep.replicable = std::holds_alternative<Replication>(replicate(model, claim));

  char buf[256];
  const bool evidence = rep.superreplication.attained == Attainment::NotAttainedEvidence;
  std::snprintf(buf, sizeof buf,
                "superreplication price of H = -X_2 approaches 0 from above (best %.3e); %s; exact replication %s",
                rep.superreplication.price_upper,
                evidence ? "the optimizing positions diverge, so the infimum is not attained" : "no divergence evidence",
                rep.replicable ? "succeeds" : "is infeasible");
  rep.conclusion = buf;
  return rep;
}

}  // namespace indiff
