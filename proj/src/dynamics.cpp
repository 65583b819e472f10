#include "indiff/dynamics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "indiff/errors.hpp"
#include "indiff/numeric.hpp"

namespace indiff {

namespace {

std::vector<double> exp_all(std::span<const double> xs) {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = std::exp(xs[i]);
  return out;
}

// Leafwise Pareto allocations below a node for a trial (X, log v).
class StepSystem {
 public:
  StepSystem(const ScenarioTree& tree, const MarketMakerPanel& panel, NodeIndex node, std::span<const double> target,
             std::span<const double> q, std::span<const double> endowment)
      : tree_(tree), panel_(panel), node_(tree.node(node)), target_(target), M_(panel.size()) {
    const std::size_t n = node_.leaf_end - node_.leaf_begin;
    log_prob_.resize(n);
    base_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = node_.leaf_begin + i;
      log_prob_[i] = std::log(conditional_leaf_prob(tree, node, k));
      double s = endowment[k];
      auto psi = tree.payoff(k);
      for (std::size_t j = 0; j < psi.size(); ++j) s += q[j] * psi[j];
      base_[i] = s;
    }
  }

  std::size_t leaves() const { return base_.size(); }
  double base(std::size_t i) const { return base_[i]; }
  double log_prob(std::size_t i) const { return log_prob_[i]; }

  struct Eval {
    Eigen::VectorXd residual;
    Eigen::MatrixXd jacobian;           // column 0: X, column j >= 1: log v_{j}
    std::vector<double> log_neg;        // M x leaves, log(-u_m(share))
    double log_mean_multiplier = 0.0;   // log E[lambda]
  };

  Eval evaluate(double X, std::span<const double> log_v, bool with_jacobian) const {
    const std::size_t n = leaves();
    Eval ev;
    ev.residual.resize(static_cast<Eigen::Index>(M_));
    ev.log_neg.resize(M_ * n);
    std::vector<double> theta(M_ * n), a(M_ * n), rho(M_ * n);
    numeric::LogSumExp lambda_acc;
    for (std::size_t i = 0; i < n; ++i) {
      const auto alloc = representative_utility_log(log_v, base_[i] + X, panel_);
      lambda_acc.add(log_prob_[i] + alloc.log_multiplier);
      double tolerance = 0.0;
      for (std::size_t m = 0; m < M_; ++m) {
        const auto& u = panel_.makers[m];
        const double xm = alloc.shares[m];
        const double lnv = u.log_neg_value(xm);
        ev.log_neg[m * n + i] = lnv;
        a[m * n + i] = u.risk_aversion(xm);
        rho[m * n + i] = std::exp(u.log_marginal(xm) - lnv);
        tolerance += 1.0 / a[m * n + i];
      }
      for (std::size_t m = 0; m < M_; ++m) theta[m * n + i] = 1.0 / a[m * n + i] / tolerance;
    }
    ev.log_mean_multiplier = lambda_acc.value();
    std::vector<double> lse(M_);
    for (std::size_t m = 0; m < M_; ++m) {
      numeric::LogSumExp acc;
      for (std::size_t i = 0; i < n; ++i) acc.add(log_prob_[i] + ev.log_neg[m * n + i]);
      lse[m] = acc.value();
      ev.residual[static_cast<Eigen::Index>(m)] = lse[m] - target_[m];
    }
    if (!with_jacobian) return ev;
    ev.jacobian = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M_), static_cast<Eigen::Index>(M_));
    for (std::size_t m = 0; m < M_; ++m) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t mi = m * n + i;
        const double w = std::exp(log_prob_[i] + ev.log_neg[mi] - lse[m]) * rho[mi];
        ev.jacobian(static_cast<Eigen::Index>(m), 0) -= w * theta[mi];
        for (std::size_t j = 1; j < M_; ++j) {
          const double d = ((m == j ? 1.0 : 0.0) - theta[j * n + i]) / a[mi];
          ev.jacobian(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) -= w * d;
        }
      }
    }
    return ev;
  }

  // Cash making E[r(v, Sigma)] = sum_m v_m U_m for fixed weights; exact when M = 1.
  double representative_cash(std::span<const double> log_v, double x0) const {
    numeric::LogSumExp rhs;
    for (std::size_t m = 0; m < M_; ++m) rhs.add(log_v[m] + target_[m]);
    const double level = rhs.value();
    auto f = [&](double X) {
      numeric::LogSumExp value, lambda;
      for (std::size_t i = 0; i < leaves(); ++i) {
        const auto alloc = representative_utility_log(log_v, base_[i] + X, panel_);
        value.add(log_prob_[i] + alloc.log_neg_value);
        lambda.add(log_prob_[i] + alloc.log_multiplier);
      }
      const double lv = value.value();
      return std::pair{lv - level, -std::exp(lambda.value() - lv)};
    };
    return numeric::solve_monotone(f, x0, 1.0);
  }

 private:
  const ScenarioTree& tree_;
  const MarketMakerPanel& panel_;
  const Node& node_;
  std::span<const double> target_;
  std::size_t M_;
  std::vector<double> log_prob_;
  std::vector<double> base_;
};

double max_abs(const Eigen::VectorXd& r) { return r.size() == 0 ? 0.0 : r.cwiseAbs().maxCoeff(); }

struct Solution {
  double X;
  std::vector<double> log_v;
  int iterations;
};

std::optional<Solution> solve_newton(const StepSystem& sys, std::span<const double> target, double X0,
                                     std::vector<double> log_v, const StepOptions& opt) {
  const std::size_t M = log_v.size();
  double scale = 1.0;
  for (double t : target) scale = std::max(scale, std::abs(t));
  const double tol = opt.residual_tol * scale;
  double X = X0;
  auto ev = sys.evaluate(X, log_v, true);
  double norm = max_abs(ev.residual);
  for (int it = 0; it < opt.max_iter; ++it) {
    if (!std::isfinite(norm)) return std::nullopt;
    if (norm <= tol) return Solution{X, log_v, it};
    Eigen::VectorXd step = ev.jacobian.partialPivLu().solve(-ev.residual);
    if (!step.allFinite()) return std::nullopt;
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      const double Xn = X + t * step[0];
      std::vector<double> lvn = log_v;
      for (std::size_t j = 1; j < M; ++j) lvn[j] += t * step[static_cast<Eigen::Index>(j)];
      StepSystem::Eval trial;
      try {
        trial = sys.evaluate(Xn, lvn, true);
      } catch (const NonConvergence&) {
        continue;
      }
      const double tn = max_abs(trial.residual);
      if (std::isfinite(tn) && tn < norm) {
        X = Xn;
        log_v = std::move(lvn);
        ev = std::move(trial);
        norm = tn;
        improved = true;
        break;
      }
    }
    if (!improved) {
      // Stalled at rounding level: accept if close to the tolerance.
      if (norm <= 100 * tol) return Solution{X, log_v, it};
      return std::nullopt;
    }
  }
  if (norm <= 100 * tol) return Solution{X, log_v, opt.max_iter};
  return std::nullopt;
}

// Outer bisection on X; inner fixed point equalizing the residuals across makers.
Solution solve_nested(const StepSystem& sys, std::span<const double> target, double X0, std::vector<double> log_v,
                      const StepOptions& opt) {
  const std::size_t M = log_v.size();
  double scale = 1.0;
  for (double t : target) scale = std::max(scale, std::abs(t));
  const double tol = opt.residual_tol * scale;
  int evaluations = 0;
  auto common = [&](double X) {
    for (int it = 0; it < 2000; ++it) {
      const auto ev = sys.evaluate(X, log_v, false);
      ++evaluations;
      double spread = 0.0;
      for (std::size_t m = 1; m < M; ++m) {
        const double d = ev.residual[static_cast<Eigen::Index>(m)] - ev.residual[0];
        spread = std::max(spread, std::abs(d));
        log_v[m] += d;
      }
      if (spread <= tol) return ev.residual[0];
    }
    throw NonConvergence("indifference step: weight fixed point did not settle");
  };
  // common(X) decreases in X.
  double lo = X0, hi = X0, h = 1.0;
  const double glo = common(lo);
  if (std::abs(glo) <= tol) return {X0, log_v, evaluations};
  if (glo > 0) {
    for (int k = 0; k < 200; ++k, h *= 2) {
      hi = X0 + h;
      if (common(hi) < 0) break;
      lo = hi;
    }
  } else {
    for (int k = 0; k < 200; ++k, h *= 2) {
      lo = X0 - h;
      if (common(lo) > 0) break;
      hi = lo;
    }
  }
  // Signs at the ends are known; re-evaluating them could flip at rounding level.
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double g = common(mid);
    if (std::abs(g) <= tol) return {mid, log_v, evaluations};
    (g > 0 ? lo : hi) = mid;
  }
  const double X = 0.5 * (lo + hi);
  common(X);
  return {X, log_v, evaluations};
}

std::vector<double> log_initial_weights(const MarketMakerPanel& panel) {
  const auto v = initial_weights(panel);
  std::vector<double> out(v.size());
  for (std::size_t m = 0; m < v.size(); ++m) out[m] = std::log(v[m]);
  return out;
}

}  // namespace

std::vector<double> StepResult::normalized_weights() const { return exp_all(log_weights); }
std::vector<double> StepResult::natural_weights() const { return exp_all(log_natural); }
std::vector<std::vector<double>> StepResult::child_utilities() const {
  std::vector<std::vector<double>> out;
  for (const auto& c : log_neg_children) {
    auto u = exp_all(c);
    for (double& x : u) x = -x;
    out.push_back(std::move(u));
  }
  return out;
}

StepResult indifference_step_log(const ScenarioTree& tree, const MarketMakerPanel& panel, NodeIndex node,
                                 std::span<const double> log_neg_u_prev, std::span<const double> q,
                                 std::span<const double> endowment, std::optional<std::vector<double>> log_weight_guess,
                                 const StepOptions& opt) {
  const std::size_t M = panel.size();
  if (log_neg_u_prev.size() != M) throw InvalidParams("utility vector length does not match the panel");
  if (static_cast<int>(q.size()) != tree.securities()) throw InvalidParams("position dimension does not match the tree");
  if (tree.node(node).is_leaf()) throw InvalidParams("indifference step needs a non-leaf node");
  for (double l : log_neg_u_prev)
    if (!std::isfinite(l)) throw InvalidParams("utilities must be finite and negative");
  for (double x : q)
    if (!std::isfinite(x)) throw InvalidParams("positions must be finite");

  StepSystem sys(tree, panel, node, log_neg_u_prev, q, endowment);
  std::vector<double> log_v = log_weight_guess ? *log_weight_guess : log_initial_weights(panel);
  if (log_v.size() != M) throw InvalidParams("weight guess length does not match the panel");
  for (std::size_t m = 1; m < M; ++m) log_v[m] -= log_v[0];
  log_v[0] = 0.0;

  StepResult out;
  std::optional<Solution> sol;
  if (opt.method == StepOptions::Method::Automatic && M == 1 && panel.makers[0].is_exponential()) {
    const double alpha = std::get<Exponential>(panel.makers[0].kind()).alpha;
    numeric::LogSumExp acc;
    for (std::size_t i = 0; i < sys.leaves(); ++i) acc.add(sys.log_prob(i) - alpha * sys.base(i));
    sol = Solution{(acc.value() - log_neg_u_prev[0]) / alpha, log_v, 0};
  } else {
    double X0 = 0.0;
    try {
      X0 = sys.representative_cash(log_v, 0.0);
    } catch (const NonConvergence&) {
      X0 = 0.0;
    }
    if (opt.method != StepOptions::Method::Nested) sol = solve_newton(sys, log_neg_u_prev, X0, log_v, opt);
    if (!sol && opt.method != StepOptions::Method::Newton) {
      sol = solve_nested(sys, log_neg_u_prev, X0, log_v, opt);
      out.used_fallback = opt.method == StepOptions::Method::Automatic;
    }
    if (!sol) throw NonConvergence("indifference step did not converge");
  }
  if (!std::isfinite(sol->X)) throw NonConvergence("indifference cash is not finite");

  const auto ev = sys.evaluate(sol->X, sol->log_v, false);
  out.cash = sol->X;
  out.log_weights = sol->log_v;
  out.iterations = sol->iterations;
  out.log_natural.resize(M);
  for (std::size_t m = 0; m < M; ++m) out.log_natural[m] = sol->log_v[m] - ev.log_mean_multiplier;

  const auto& nd = tree.node(node);
  const std::size_t n = sys.leaves();
  for (NodeIndex c : nd.children) {
    const auto& child = tree.node(c);
    const double log_pc = std::log(child.prob);
    std::vector<double> u(M);
    for (std::size_t m = 0; m < M; ++m) {
      numeric::LogSumExp acc;
      for (std::size_t k = child.leaf_begin; k < child.leaf_end; ++k) {
        const std::size_t i = k - nd.leaf_begin;
        acc.add(sys.log_prob(i) - log_pc + ev.log_neg[m * n + i]);
      }
      u[m] = acc.value();
    }
    out.log_neg_children.push_back(std::move(u));
  }
  return out;
}

StepResult indifference_step(const ScenarioTree& tree, const MarketMakerPanel& panel, NodeIndex node,
                             std::span<const double> u_prev, std::span<const double> q, const StepOptions& opt) {
  std::vector<double> log_neg(u_prev.size());
  for (std::size_t m = 0; m < u_prev.size(); ++m) {
    if (!(u_prev[m] < 0.0)) throw InvalidParams("utilities must be negative");
    log_neg[m] = std::log(-u_prev[m]);
  }
  const auto endowment = panel.endowment(tree);
  return indifference_step_log(tree, panel, node, log_neg, q, endowment, std::nullopt, opt);
}

double closed_form_cash(const ScenarioTree& tree, double alpha, NodeIndex node, double u_prev,
                        std::span<const double> q, std::span<const double> endowment) {
  const auto& nd = tree.node(node);
  numeric::LogSumExp acc;
  for (std::size_t k = nd.leaf_begin; k < nd.leaf_end; ++k) {
    double s = endowment[k];
    auto psi = tree.payoff(k);
    for (std::size_t j = 0; j < psi.size(); ++j) s += q[j] * psi[j];
    acc.add(std::log(conditional_leaf_prob(tree, node, k)) - alpha * s);
  }
  return (acc.value() - std::log(-u_prev)) / alpha;
}

double SystemPath::utility(NodeIndex n, std::size_t m) const { return -std::exp(log_neg_utility[n * makers + m]); }

std::vector<double> SystemPath::utilities(NodeIndex n) const {
  std::vector<double> out(makers);
  for (std::size_t m = 0; m < makers; ++m) out[m] = utility(n, m);
  return out;
}

std::vector<double> SystemPath::natural_weights(NodeIndex n) const {
  return exp_all(std::span<const double>(log_natural.data() + n * makers, makers));
}

std::vector<double> SystemPath::normalized_weights(NodeIndex n) const {
  return exp_all(std::span<const double>(log_weights.data() + n * makers, makers));
}

void evolve_subtree(const ScenarioTree& tree, const MarketMakerPanel& panel, SystemPath& path, const Strategy& strategy,
                    NodeIndex node, std::span<const double> endowment, const StepOptions& opt) {
  const std::size_t M = path.makers, J = path.securities;
  std::vector<NodeIndex> stack{node};
  while (!stack.empty()) {
    const NodeIndex n = stack.back();
    stack.pop_back();
    path.evolved[n] = 1;
    const auto& nd = tree.node(n);
    if (nd.is_leaf()) continue;
    std::optional<std::vector<double>> guess;
    const double* prev = nd.parent ? path.log_weights.data() + *nd.parent * M : nullptr;
    if (prev && std::isfinite(prev[0])) guess = std::vector<double>(prev, prev + M);
    auto q = strategy.at(n);
    StepResult step;
    try {
      step = indifference_step_log(tree, panel, n, path.log_neg(n), q, endowment, guess, opt);
    } catch (const NonConvergence& e) {
      throw NonConvergence(std::string(e.what()) + " at node '" + nd.id + "'");
    }
    path.cash[n] = step.cash;
    std::copy(step.log_weights.begin(), step.log_weights.end(), path.log_weights.begin() + static_cast<std::ptrdiff_t>(n * M));
    std::copy(step.log_natural.begin(), step.log_natural.end(), path.log_natural.begin() + static_cast<std::ptrdiff_t>(n * M));
    std::copy(q.begin(), q.end(), path.positions.begin() + static_cast<std::ptrdiff_t>(n * J));
    for (std::size_t c = 0; c < nd.children.size(); ++c) {
      const NodeIndex child = nd.children[c];
      std::copy(step.log_neg_children[c].begin(), step.log_neg_children[c].end(),
                path.log_neg_utility.begin() + static_cast<std::ptrdiff_t>(child * M));
      stack.push_back(child);
    }
  }
}

SystemPath evolve(const ScenarioTree& tree, const MarketMakerPanel& panel, std::span<const double> u_start,
                  const Strategy& strategy, NodeIndex start, const StepOptions& opt) {
  const std::size_t M = panel.size(), J = static_cast<std::size_t>(tree.securities());
  if (u_start.size() != M) throw InvalidParams("starting utilities do not match the panel");
  if (strategy.securities() != J || strategy.size() != tree.size()) throw InvalidParams("strategy does not match the tree");
  SystemPath path;
  path.makers = M;
  path.securities = J;
  path.start = start;
  path.log_neg_utility.assign(tree.size() * M, numeric::kNaN);
  path.cash.assign(tree.size(), numeric::kNaN);
  path.log_weights.assign(tree.size() * M, numeric::kNaN);
  path.log_natural.assign(tree.size() * M, numeric::kNaN);
  path.positions.assign(tree.size() * J, numeric::kNaN);
  path.evolved.assign(tree.size(), 0);
  for (std::size_t m = 0; m < M; ++m) {
    if (!(u_start[m] < 0.0)) throw InvalidParams("starting utilities must be negative");
    path.log_neg_utility[start * M + m] = std::log(-u_start[m]);
  }
  if (tree.node(start).parent) {
    // Seed the weight guess for the first step from the panel.
    const auto v = initial_weights(panel);
    for (std::size_t m = 0; m < M; ++m) path.log_weights[*tree.node(start).parent * M + m] = std::log(v[m] / v[0]);
  }
  const auto endowment = panel.endowment(tree);
  evolve_subtree(tree, panel, path, strategy, start, endowment, opt);
  return path;
}

std::vector<double> initial_utilities(const ScenarioTree& tree, const MarketMakerPanel& panel) {
  const auto v = initial_weights(panel);
  std::vector<double> log_v(v.size());
  for (std::size_t m = 0; m < v.size(); ++m) log_v[m] = std::log(v[m]);
  const auto endowment = panel.endowment(tree);
  const std::size_t M = panel.size();
  std::vector<numeric::LogSumExp> acc(M);
  for (std::size_t k = 0; k < tree.leaf_count(); ++k) {
    const auto alloc = representative_utility_log(log_v, endowment[k], panel);
    for (std::size_t m = 0; m < M; ++m) acc[m].add(std::log(tree.leaf_prob(k)) + panel.makers[m].log_neg_value(alloc.shares[m]));
  }
  std::vector<double> out(M);
  for (std::size_t m = 0; m < M; ++m) out[m] = -std::exp(acc[m].value());
  return out;
}

LeafValues investor_pnl(const ScenarioTree& tree, const SystemPath& path) {
  LeafValues out(tree.leaf_count(), numeric::kNaN);
  for (std::size_t k = 0; k < tree.leaf_count(); ++k) {
    const auto& leaf = tree.node(tree.leaf_node(k));
    const NodeIndex p = *leaf.parent;
    if (!path.evolved[p]) continue;
    double value = path.cash[p];
    auto psi = tree.payoff(k);
    auto q = path.position(p);
    for (std::size_t j = 0; j < psi.size(); ++j) value += q[j] * psi[j];
    out[k] = value;
  }
  return out;
}

InvariantReport check_invariants(const ScenarioTree& tree, const MarketMakerPanel& panel, const SystemPath& path) {
  InvariantReport rep;
  rep.c = panel.risk_aversion_bound();
  rep.band_low = numeric::kInf;
  rep.band_high = 0.0;
  const std::size_t M = path.makers;
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    const auto& nd = tree.node(n);
    if (nd.is_leaf() || !path.evolved[n]) continue;
    double scale = 0.0, worst = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      const double u = path.utility(n, m);
      double expected = 0.0;
      for (NodeIndex c : nd.children) expected += tree.node(c).prob * path.utility(c, m);
      scale = std::max(scale, std::abs(u));
      worst = std::max(worst, std::abs(u - expected));
      const double band = std::exp(path.log_neg_utility[n * M + m] + path.log_natural[n * M + m]);
      rep.band_low = std::min(rep.band_low, band);
      rep.band_high = std::max(rep.band_high, band);
    }
    rep.martingale_residual = std::max(rep.martingale_residual, worst / scale);
  }
  return rep;
}

double conjugacy_check(const ScenarioTree& tree, const MarketMakerPanel& panel, NodeIndex node,
                       std::span<const ConjugacySample> samples) {
  const std::size_t M = panel.size();
  if (M > 2) throw InvalidParams("conjugacy check supports at most two market makers");
  const auto endowment = panel.endowment(tree);
  const auto& nd = tree.node(node);
  double worst = 0.0;
  for (const auto& s : samples) {
    if (s.v.size() != M) throw InvalidParams("sample weight vector does not match the panel");
    std::vector<double> log_v(M);
    for (std::size_t m = 0; m < M; ++m) log_v[m] = std::log(s.v[m]);

    // Primal side: F(v, x, q) = E[r(v, Sigma_0 + x + <q, psi>) | node], plus the makers' utilities there.
    numeric::LogSumExp f_acc;
    std::vector<numeric::LogSumExp> u_acc(M);
    for (std::size_t k = nd.leaf_begin; k < nd.leaf_end; ++k) {
      double sigma = endowment[k] + s.x;
      auto psi = tree.payoff(k);
      for (std::size_t j = 0; j < psi.size(); ++j) sigma += s.q[j] * psi[j];
      const double lp = std::log(conditional_leaf_prob(tree, node, k));
      const auto alloc = representative_utility_log(log_v, sigma, panel);
      f_acc.add(lp + alloc.log_neg_value);
      for (std::size_t m = 0; m < M; ++m) u_acc[m].add(lp + panel.makers[m].log_neg_value(alloc.shares[m]));
    }
    const double primal = -std::exp(f_acc.value());

    // Dual side: sup of <u, v> over utilities whose indifference cash G(u, 1, q) is at most x.
    auto cash = [&](std::span<const double> log_neg_u) {
      return indifference_step_log(tree, panel, node, log_neg_u, s.q, endowment, log_v);
    };
    double dual;
    if (M == 1) {
      // G is increasing in u: the constraint binds at the unique u with G(u) = x.
      auto g = [&](double l) {
        const auto st = cash(std::span<const double>(&l, 1));
        return std::pair{st.cash - s.x, std::exp(st.log_natural[0]) * -std::exp(l)};
      };
      const double l = numeric::solve_monotone(g, u_acc[0].value(), 1.0);
      dual = -s.v[0] * std::exp(l);
    } else {
      const double l1_star = u_acc[0].value(), l2_star = u_acc[1].value();
      auto objective = [&](double l2) {
        auto g = [&](double l1) {
          const double ls[2] = {l1, l2};
          const auto st = cash(ls);
          return std::pair{st.cash - s.x, std::exp(st.log_natural[0]) * -std::exp(l1)};
        };
        const double l1 = numeric::solve_monotone(g, l1_star, 0.5);
        return s.v[0] * std::exp(l1) + s.v[1] * std::exp(l2);
      };
      const auto best = numeric::golden_section_min(objective, l2_star - 3.0, l2_star + 3.0, 1e-10);
      dual = -best.value;
    }
    worst = std::max(worst, std::abs(primal - dual) / std::abs(primal));
  }
  return worst;
}

}  // namespace indiff
