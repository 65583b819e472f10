#include "indiff/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "indiff/binomial.hpp"
#include "indiff/dynamics.hpp"
#include "indiff/errors.hpp"
#include "indiff/numeric.hpp"
#include "indiff/superrep.hpp"
#include "indiff/tails.hpp"

namespace indiff::cli {

namespace {

using io::Json;
using io::number;

class Context {
 public:
  explicit Context(const RunConfig& c) : cfg(c) {}

  const RunConfig& cfg;
  std::vector<std::string> artifacts;

  std::string require(const std::string& value, const std::string& flag) const {
    if (value.empty()) throw ConfigError("missing required option --" + flag);
    return value;
  }

  void csv(const std::string& name, const std::vector<std::string>& header, const std::vector<std::vector<Json>>& rows) {
    io::write_csv((std::filesystem::path(cfg.out) / name).string(), header, rows);
    artifacts.push_back(name);
  }

  std::vector<double> schedule(std::vector<double> fallback) const {
    return cfg.q_schedule.empty() ? fallback : cfg.q_schedule;
  }
};

Json positions_json(const ScenarioTree& tree, const Strategy& s) {
  Json out = Json::object();
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    if (tree.node(n).is_leaf()) continue;
    const auto q = s.at(n);
    out[tree.node(n).id] = std::vector<double>(q.begin(), q.end());
  }
  return out;
}

Json leaf_map(const ScenarioTree& tree, const std::vector<double>& v) {
  Json out = Json::object();
  for (std::size_t k = 0; k < v.size(); ++k) out[tree.node(tree.leaf_node(k)).id] = number(v[k]);
  return out;
}

Json numbers(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

Json superrep_json(const ScenarioTree& tree, const SuperrepResult& r) {
  Json curve = Json::array();
  for (const auto& p : r.price_curve)
    curve.push_back({{"level", p.level}, {"box", p.box}, {"evaluations", p.evaluations}, {"price", number(p.price)}});
  return {{"price_upper", number(r.price_upper)},
          {"price_curve", curve},
          {"attained", to_string(r.attained)},
          {"best_strategy", positions_json(tree, r.best_strategy)},
          {"verification_gap", number(r.verification_gap)},
          {"warm_started", r.warm_started},
          {"evaluations", r.evaluations}};
}

void curve_csv(Context& ctx, const std::string& name, const SuperrepResult& r) {
  std::vector<std::vector<Json>> rows;
  for (const auto& p : r.price_curve) rows.push_back({p.level, p.box, p.evaluations, p.price});
  ctx.csv(name, {"level", "box", "evaluations", "price"}, rows);
}

SearchConfig search_config(const RunConfig& cfg) {
  SearchConfig sc;
  sc.levels = cfg.levels;
  if (cfg.budget) sc.max_evaluations = *cfg.budget;
  return sc;
}

std::vector<double> u_levels(const RunConfig& cfg, std::size_t makers) {
  if (cfg.u_levels.empty()) return std::vector<double>(makers, -1.0);
  if (cfg.u_levels.size() != makers) throw ConfigError("--u-levels needs one value per maker");
  return cfg.u_levels;
}

int simulate(Context& ctx, Json& out) {
  const auto tree = io::load_tree(ctx.require(ctx.cfg.tree, "tree"));
  const auto panel = io::load_panel(ctx.require(ctx.cfg.panel, "panel"));
  const auto strategy = ctx.cfg.strategy.empty() ? Strategy(tree) : io::load_strategy(ctx.cfg.strategy, tree);
  const auto u0 = ctx.cfg.u_start.empty() ? initial_utilities(tree, panel) : ctx.cfg.u_start;
  StepOptions opt;
  if (ctx.cfg.tol) opt.residual_tol = *ctx.cfg.tol;
  const auto path = evolve(tree, panel, u0, strategy, tree.root(), opt);
  const auto inv = check_invariants(tree, panel, path);
  const std::size_t M = panel.size();
  const std::size_t J = static_cast<std::size_t>(tree.securities());

  Json nodes = Json::array();
  std::vector<std::vector<Json>> rows;
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    const auto& nd = tree.node(n);
    Json row{{"id", nd.id}, {"time", nd.time}, {"utilities", numbers(path.utilities(n))}};
    std::vector<Json> csv_row{nd.id, nd.time};
    if (!nd.is_leaf()) {
      row["cash"] = number(path.cash[n]);
      const auto q = path.position(n);
      row["position"] = numbers({q.begin(), q.end()});
      row["natural_weights"] = numbers(path.natural_weights(n));
      csv_row.push_back(path.cash[n]);
      for (double x : q) csv_row.push_back(x);
    } else {
      csv_row.push_back(numeric::kNaN);
      for (std::size_t j = 0; j < J; ++j) csv_row.push_back(numeric::kNaN);
    }
    for (double u : path.utilities(n)) csv_row.push_back(u);
    nodes.push_back(row);
    rows.push_back(csv_row);
  }
  std::vector<std::string> header{"id", "time", "cash"};
  for (std::size_t j = 0; j < J; ++j) header.push_back("q" + std::to_string(j + 1));
  for (std::size_t m = 0; m < M; ++m) header.push_back("U" + std::to_string(m + 1));
  ctx.csv("simulate_nodes.csv", header, rows);

  out["nodes"] = nodes;
  out["investor_pnl"] = leaf_map(tree, investor_pnl(tree, path));
  out["invariants"] = {{"martingale_residual", number(inv.martingale_residual)},
                       {"band_low", number(inv.band_low)},
                       {"band_high", number(inv.band_high)},
                       {"c", number(inv.c)},
                       {"band_ok", inv.band_ok()}};
  return 0;
}

int superreplicate(Context& ctx, Json& out) {
  const auto tree = io::load_tree(ctx.require(ctx.cfg.tree, "tree"));
  const auto panel = io::load_panel(ctx.require(ctx.cfg.panel, "panel"));
  const auto claim = io::load_claim(ctx.require(ctx.cfg.claim, "claim"), tree);
  const auto r = superreplication_price(tree, panel, claim, search_config(ctx.cfg));
  out["result"] = superrep_json(tree, r);
  curve_csv(ctx, "price_curve.csv", r);
  return 0;
}

int completeness(Context& ctx, Json& out) {
  auto m = io::load_model(ctx.require(ctx.cfg.model, "model"));
  const BinomialModel model(std::move(m.tree), std::move(m.panel));
  const auto rep = completeness_check(model);
  Json violations = Json::array();
  for (const auto& v : rep.violations)
    violations.push_back({{"node", model.tree().node(v.node).id},
                          {"child", model.tree().node(v.child).id},
                          {"reason", v.reason}});
  out["complete"] = rep.complete;
  out["weak_condition"] = rep.weak_condition;
  out["violations"] = violations;
  return 0;
}

int replicate_cmd(Context& ctx, Json& out) {
  auto m = io::load_model(ctx.require(ctx.cfg.model, "model"));
  const BinomialModel model(std::move(m.tree), std::move(m.panel));
  const auto claim = io::load_claim(ctx.require(ctx.cfg.claim, "claim"), model.tree());
  const auto r = replicate(model, claim);
  if (const auto* bad = std::get_if<Infeasible>(&r)) {
    out["infeasible"] = {{"node", model.tree().node(bad->node).id}, {"reason", bad->reason}};
    return 2;
  }
  const auto& rep = std::get<Replication>(r);
  const double residual = replication_verify(model, claim, rep.pi, rep.positions);
  out["pi"] = number(rep.pi);
  out["positions"] = positions_json(model.tree(), rep.positions);
  out["verification_residual"] = number(residual);
  out["verified"] = residual <= ctx.cfg.tol.value_or(1e-9);
  std::vector<std::vector<Json>> rows;
  for (NodeIndex n = 0; n < model.tree().size(); ++n)
    if (!model.tree().node(n).is_leaf()) rows.push_back({model.tree().node(n).id, rep.positions.at(n)[0]});
  ctx.csv("replication_positions.csv", {"node", "q"}, rows);
  return 0;
}

int counterexample(Context& ctx, Json& out) {
  const auto& c = ctx.cfg;
  const auto qs = ctx.schedule({1.0, 10.0, 100.0, 1000.0});
  const auto rep = counterexample_run(c.p1, c.p2, c.p3, c.alpha, c.psi_u, c.psi_d, qs, search_config(c));
  out["B"] = rep.B;
  out["q_schedule"] = rep.q_schedule;
  Json nodes = Json::object();
  for (const auto& n : rep.nodes)
    nodes[n.id] = {{"A", n.A},
                   {"utility_limit", n.utility_limit},
                   {"cash_limit", n.cash_limit},
                   {"utility", numbers(n.utility)},
                   {"cash", numbers(n.cash)},
                   {"derivative_sign", n.derivative_sign},
                   {"derivative_checked", n.derivative_checked}};
  out["nodes"] = nodes;
  out["X2_limits"] = {rep.nodes[0].cash_limit, rep.nodes[1].cash_limit};
  out["superreplication"] = superrep_json(counterexample_tree(c.p1, c.p2, c.p3, c.psi_u, c.psi_d), rep.superreplication);
  out["replicable"] = rep.replicable;
  out["conclusion"] = rep.conclusion;
  std::vector<std::vector<Json>> rows;
  for (std::size_t i = 0; i < qs.size(); ++i)
    rows.push_back({qs[i], rep.nodes[0].utility[i], rep.nodes[0].cash[i], rep.nodes[1].utility[i], rep.nodes[1].cash[i]});
  ctx.csv("counterexample_schedule.csv", {"q", "U_u", "X2_u", "U_d", "X2_d"}, rows);
  curve_csv(ctx, "counterexample_price_curve.csv", rep.superreplication);
  return 0;
}

int friction_probe(Context& ctx, Json& out) {
  const auto tree = io::load_tree(ctx.require(ctx.cfg.tree, "tree"));
  const auto panel = io::load_panel(ctx.require(ctx.cfg.panel, "panel"));
  const auto scales = ctx.schedule({0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0});
  const auto u = u_levels(ctx.cfg, panel.size());
  const auto rep = efficient_friction_probe(tree, panel, ctx.cfg.t, u, scales);
  Json rows_json = Json::array();
  std::vector<std::vector<Json>> rows;
  for (const auto& s : rep.scales) {
    rows_json.push_back({{"scale", s.scale}, {"losses", leaf_map(tree, s.losses)}, {"error", s.error}});
    std::vector<Json> row{s.scale};
    for (double l : s.losses) row.push_back(l);
    rows.push_back(row);
  }
  std::vector<std::string> header{"scale"};
  for (std::size_t k = 0; k < tree.leaf_count(); ++k) header.push_back(tree.node(tree.leaf_node(k)).id);
  ctx.csv("friction_losses.csv", header, rows);
  Json diverging = Json::array();
  for (auto k : rep.diverging_leaves) diverging.push_back(tree.node(tree.leaf_node(k)).id);
  out["t"] = rep.t;
  out["scales"] = rows_json;
  out["final_slope"] = leaf_map(tree, rep.final_slope);
  out["diverges"] = rep.diverges;
  out["diverging_leaves"] = diverging;
  return 0;
}

int tails_tree(Context& ctx, Json& out) {
  const auto tree = io::load_tree(ctx.require(ctx.cfg.tree, "tree"));
  const auto qs = ctx.schedule({10.0, 50.0, 100.0, 200.0});
  auto report_json = [&](const DecreasingTailsReport& r) {
    Json nodes = Json::array();
    for (const auto& n : r.nodes) {
      Json w = Json::array();
      for (auto c : n.witnesses) w.push_back(tree.node(c).id);
      nodes.push_back({{"node", tree.node(n.node).id}, {"probability", n.probability}, {"witness_nodes", w}});
    }
    return Json{{"probability", r.probability}, {"nodes", nodes}};
  };
  out["t"] = ctx.cfg.t;
  if (tree.securities() == 1) out["exact"] = report_json(decreasing_tails_check(tree, ctx.cfg.t));
  out["numeric"] = report_json(decreasing_tails_numeric(tree, ctx.cfg.t, qs));
  std::vector<std::vector<Json>> rows;
  for (NodeIndex n : tree.nodes_at(ctx.cfg.t - 1)) {
    const auto& nd = tree.node(n);
    if (nd.is_leaf()) continue;
    const auto parent = conditional_distribution(tree, n);
    for (NodeIndex c : nd.children) {
      const auto r = tail_dominance(conditional_distribution(tree, c), parent, qs);
      for (const auto& ray : r.rays)
        for (std::size_t i = 0; i < ray.q.size(); ++i)
          rows.push_back({nd.id, tree.node(c).id, ray.security + 1, ray.direction, ray.q[i], ray.log_ratio[i]});
    }
  }
  ctx.csv("tails_tree_ratios.csv", {"node", "child", "security", "direction", "q", "log_ratio"}, rows);
  return 0;
}

int tails_levy(Context& ctx, Json& out) {
  const auto triplet = io::load_levy(ctx.require(ctx.cfg.triplet, "triplet"));
  const auto samples = io::load_samples(ctx.require(ctx.cfg.samples, "samples"));
  const double t = ctx.cfg.t_start.value_or(0.0);
  const double T = ctx.cfg.horizon.value_or(t + ctx.cfg.h);
  const auto qs = ctx.schedule({10.0, 20.0, 50.0, 100.0});
  const auto rep = levy_tails_check(triplet, t, ctx.cfg.h, T, samples, qs);
  Json ss = Json::array();
  std::vector<std::vector<Json>> rows;
  for (const auto& s : rep.samples) {
    auto ray = [](const LevyRay& r) {
      return Json{{"decays_exact", r.decays_exact}, {"decays_numeric", r.decays_numeric}, {"exponent", numbers(r.exponent)}};
    };
    ss.push_back({{"delta", s.delta},
                  {"up", ray(s.up)},
                  {"down", ray(s.down)},
                  {"decays_both", s.decays_both},
                  {"in_bound_set", s.in_bound_set}});
    for (std::size_t i = 0; i < qs.size(); ++i) {
      rows.push_back({s.delta, 1, qs[i], s.up.exponent[i]});
      rows.push_back({s.delta, -1, qs[i], s.down.exponent[i]});
    }
  }
  ctx.csv("tails_levy_exponents.csv", {"delta", "direction", "q", "exponent"}, rows);
  out["t"] = t;
  out["h"] = ctx.cfg.h;
  out["T"] = T;
  out["q_schedule"] = qs;
  out["regime_up"] = rep.regime_up;
  out["regime_down"] = rep.regime_down;
  out["effective_drift"] = rep.effective_drift;
  out["bound_rate"] = rep.bound_rate;
  out["exact_threshold_up"] = rep.exact_threshold_up;
  out["exact_threshold_down"] = rep.exact_threshold_down;
  out["samples"] = ss;
  return 0;
}

int tails_bns(Context& ctx, Json& out) {
  const auto file = io::load_bns(ctx.require(ctx.cfg.params, "params"));
  const auto& p = file.params;
  const auto qs = ctx.schedule({5.0, 10.0, 20.0, 50.0});
  const auto samples = bns_simulate_increments(p, file.t, file.h, file.T, file.paths, ctx.cfg.seed);
  const auto rep = bns_tails_check(p, file.t, file.h, file.T, samples, qs);
  Json laplace = Json::object();
  for (double q : {-2.0, -1.0, 1.0, 2.0}) {
    char key[16];
    std::snprintf(key, sizeof key, "%g", q);
    laplace[key] = number(bns_laplace(p, 0.0, file.T, q, 0.0, p.sigma0_sq));
  }
  Json ss = Json::array();
  std::vector<std::vector<Json>> rows;
  for (std::size_t k = 0; k < rep.samples.size(); ++k) {
    const auto& s = rep.samples[k];
    ss.push_back({{"dx", s.sample.dx},
                  {"deps_var", s.sample.deps_var},
                  {"up", numbers(s.up)},
                  {"down", numbers(s.down)},
                  {"diverges", s.diverges}});
    for (std::size_t i = 0; i < qs.size(); ++i) {
      rows.push_back({k, 1, qs[i], s.up[i]});
      rows.push_back({k, -1, qs[i], s.down[i]});
    }
  }
  ctx.csv("tails_bns_brackets.csv", {"sample", "direction", "q", "bracket"}, rows);
  out["t"] = file.t;
  out["h"] = file.h;
  out["T"] = file.T;
  out["seed"] = ctx.cfg.seed;
  out["q_schedule"] = qs;
  out["q6_coefficient"] = number(rep.q6_coefficient);
  out["all_diverge"] = rep.all_diverge;
  out["log_laplace_at_start"] = laplace;
  out["samples"] = ss;
  return 0;
}

}  // namespace

RunResult run(const RunConfig& config) {
  RunResult result;
  Context ctx(config);
  Json out{{"subcommand", config.subcommand}};
  try {
    std::filesystem::create_directories(config.out);
    int code = 0;
    const auto& s = config.subcommand;
    if (s == "simulate") code = simulate(ctx, out);
    else if (s == "superreplicate") code = superreplicate(ctx, out);
    else if (s == "completeness") code = completeness(ctx, out);
    else if (s == "replicate") code = replicate_cmd(ctx, out);
    else if (s == "counterexample") code = counterexample(ctx, out);
    else if (s == "friction-probe") code = friction_probe(ctx, out);
    else if (s == "tails-tree") code = tails_tree(ctx, out);
    else if (s == "tails-levy") code = tails_levy(ctx, out);
    else if (s == "tails-bns") code = tails_bns(ctx, out);
    else throw ConfigError("unknown subcommand '" + s + "'");
    const std::string name = s + ".json";
    out["artifacts"] = ctx.artifacts;
    io::write_json((std::filesystem::path(config.out) / name).string(), out);
    ctx.artifacts.insert(ctx.artifacts.begin(), name);
    result.exit_code = code;
  } catch (const std::exception& e) {
    result.exit_code = 1;
    result.error = e.what();
    out["error"] = e.what();
  }
  result.summary = io::canonical(out);
  result.artifacts = ctx.artifacts;
  return result;
}

}  // namespace indiff::cli
