#include "indiff/tails.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "indiff/errors.hpp"
#include "indiff/numeric.hpp"

namespace indiff {

namespace {

constexpr double kExpCap = 700.0;
const double kDecayLevel = std::log(1e-8);

double log_moment(const ConditionalDistribution& d, std::size_t j, double q) {
  numeric::LogSumExp acc;
  for (const auto& a : d.support) acc.add(std::log(a.prob) + q * a.value[j]);
  return acc.value();
}

bool still_falling(const std::vector<double>& v) {
  if (v.empty()) return false;
  const double last = v.back();
  if (!(last < kDecayLevel)) return false;
  return v.size() < 2 || last < v[v.size() - 2] || last == -numeric::kInf;
}

void check_schedule(std::span<const double> q) {
  for (double x : q)
    if (!(x > 0.0) || !std::isfinite(x)) throw InvalidParams("q schedule entries must be positive and finite");
}

}  // namespace

void LevyTriplet::validate() const {
  if (!std::isfinite(b)) throw InvalidParams("drift must be finite");
  if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidParams("diffusion coefficient must be >= 0");
  for (const auto& a : jumps)
    if (a.x == 0.0 || !std::isfinite(a.x) || !(a.mass > 0.0) || !std::isfinite(a.mass))
      throw InvalidParams("jump atoms need nonzero size and positive mass");
  if (c == 0.0 && jumps.empty()) throw InvalidParams("deterministic triplet (c = 0, no jumps)");
}

void BNSParams::validate() const {
  if (!std::isfinite(m) || !std::isfinite(beta)) throw InvalidParams("m and beta must be finite");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidParams("lambda must be positive");
  if (!(rho < 0.0)) throw InvalidParams("rho must be negative");
  if (!(sigma0_sq > 0.0) || !std::isfinite(sigma0_sq)) throw InvalidParams("sigma0_sq must be positive");
  for (const auto& a : subordinator.jumps)
    if (!(a.x > 0.0) || !std::isfinite(a.x) || !(a.mass > 0.0) || !std::isfinite(a.mass))
      throw InvalidParams("subordinator atoms must be positive with positive mass");
}

std::string to_string(TailVerdict v) {
  switch (v) {
    case TailVerdict::Dominated:
      return "dominated";
    case TailVerdict::NotDominated:
      return "not-dominated";
    case TailVerdict::Inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

DominanceReport tail_dominance(const ConditionalDistribution& mu, const ConditionalDistribution& nu,
                               std::span<const double> q_schedule, const TailThresholds& thresholds) {
  if (mu.support.empty() || nu.support.empty()) throw InvalidParams("distributions need a nonempty support");
  const std::size_t J = mu.support.front().value.size();
  if (nu.support.front().value.size() != J) throw InvalidParams("distributions live in different dimensions");
  check_schedule(q_schedule);

  DominanceReport rep;
  bool all_small = true, some_large = false;
  for (std::size_t j = 0; j < J; ++j) {
    for (int dir : {1, -1}) {
      RayTrace ray{j, dir, {q_schedule.begin(), q_schedule.end()}, {}};
      for (double q : q_schedule) ray.log_ratio.push_back(log_moment(mu, j, dir * q) - log_moment(nu, j, dir * q));
      const double last = ray.log_ratio.empty() ? 0.0 : ray.log_ratio.back();
      all_small = all_small && last < std::log(thresholds.dominated);
      some_large = some_large || last >= std::log(thresholds.not_dominated);
      rep.rays.push_back(std::move(ray));
    }
  }
  rep.verdict = all_small ? TailVerdict::Dominated : some_large ? TailVerdict::NotDominated : TailVerdict::Inconclusive;

  if (J == 1) {
    auto range = [](const ConditionalDistribution& d) {
      double lo = numeric::kInf, hi = -numeric::kInf;
      for (const auto& a : d.support) {
        lo = std::min(lo, a.value[0]);
        hi = std::max(hi, a.value[0]);
      }
      return std::pair{lo, hi};
    };
    const auto [mlo, mhi] = range(mu);
    const auto [nlo, nhi] = range(nu);
    rep.exact = (mhi < nhi && mlo > nlo) ? TailVerdict::Dominated : TailVerdict::NotDominated;
  }
  return rep;
}

DecreasingTailsReport decreasing_tails_check(const ScenarioTree& tree, int t) {
  if (tree.securities() != 1) throw MultiAssetUnsupported("exact decreasing-tails check needs J = 1");
  if (t < 1 || t > tree.horizon()) throw InvalidParams("t must lie in 1..T");
  DecreasingTailsReport rep{t, 1.0, {}};
  for (NodeIndex n : tree.nodes_at(t - 1)) {
    const auto& nd = tree.node(n);
    if (nd.is_leaf()) continue;
    const auto e = conditional_extrema(tree, n);
    DecreasingTailsNode out{n, 0.0, {}};
    for (NodeIndex c : nd.children) {
      const auto ec = conditional_extrema(tree, c);
      if (e.lower < ec.lower && e.upper > ec.upper) {
        out.probability += tree.node(c).prob;
        out.witnesses.push_back(c);
      }
    }
    rep.probability = std::min(rep.probability, out.probability);
    rep.nodes.push_back(std::move(out));
  }
  return rep;
}

DecreasingTailsReport decreasing_tails_numeric(const ScenarioTree& tree, int t, std::span<const double> q_schedule,
                                               const TailThresholds& thresholds) {
  if (t < 1 || t > tree.horizon()) throw InvalidParams("t must lie in 1..T");
  DecreasingTailsReport rep{t, 1.0, {}};
  for (NodeIndex n : tree.nodes_at(t - 1)) {
    const auto& nd = tree.node(n);
    if (nd.is_leaf()) continue;
    const auto parent = conditional_distribution(tree, n);
    DecreasingTailsNode out{n, 0.0, {}};
    for (NodeIndex c : nd.children) {
      const auto r = tail_dominance(conditional_distribution(tree, c), parent, q_schedule, thresholds);
      if (r.verdict == TailVerdict::Dominated) {
        out.probability += tree.node(c).prob;
        out.witnesses.push_back(c);
      }
    }
    rep.probability = std::min(rep.probability, out.probability);
    rep.nodes.push_back(std::move(out));
  }
  return rep;
}

double levy_exponent(const LevyTriplet& triplet, double q) {
  double f = triplet.b * q + 0.5 * triplet.c * q * q;
  for (const auto& a : triplet.jumps) {
    if (q * a.x > kExpCap) throw Overflow("levy exponent overflows at q = " + std::to_string(q), q);
    f += a.mass * (std::expm1(q * a.x) - (std::abs(a.x) < 1.0 ? q * a.x : 0.0));
  }
  return f;
}

double levy_effective_drift(const LevyTriplet& triplet) {
  double d = triplet.b;
  for (const auto& a : triplet.jumps)
    if (std::abs(a.x) < 1.0) d -= a.mass * a.x;
  return d;
}

LevyTailsReport levy_tails_check(const LevyTriplet& triplet, double t, double h, double T,
                                 std::span<const double> increment_samples, std::span<const double> q_schedule) {
  triplet.validate();
  if (!(h > 0.0) || !(t >= 0.0) || !(t + h <= T)) throw InvalidParams("need h > 0 and 0 <= t < t + h <= T");
  check_schedule(q_schedule);

  bool pos_jumps = false, neg_jumps = false;
  double r = 0.0;
  for (const auto& a : triplet.jumps) {
    (a.x > 0 ? pos_jumps : neg_jumps) = true;
    if (a.x <= -1.0) r += a.mass * std::abs(a.x);
  }
  auto regime = [&](bool jumps_that_way) {
    return jumps_that_way ? "exponential" : triplet.c > 0.0 ? "quadratic" : "linear";
  };

  LevyTailsReport rep;
  rep.t = t;
  rep.h = h;
  rep.T = T;
  rep.q.assign(q_schedule.begin(), q_schedule.end());
  rep.regime_up = regime(pos_jumps);
  rep.regime_down = regime(neg_jumps);
  rep.effective_drift = levy_effective_drift(triplet);
  rep.bound_rate = std::abs(triplet.b) + r;
  rep.exact_threshold_up = h * rep.effective_drift;
  rep.exact_threshold_down = h * rep.effective_drift;

  // f along both rays does not depend on the sample.
  std::vector<double> f_up, f_down;
  for (double q : q_schedule) {
    auto eval = [&](double s) {
      try {
        return levy_exponent(triplet, s);
      } catch (const Overflow&) {
        return numeric::kInf;
      }
    };
    f_up.push_back(eval(q));
    f_down.push_back(eval(-q));
  }
  for (double delta : increment_samples) {
    LevySample s{delta, {}, {}, false, delta < h * rep.bound_rate};
    for (std::size_t i = 0; i < q_schedule.size(); ++i) {
      const double q = q_schedule[i];
      s.up.exponent.push_back(std::isinf(f_up[i]) ? -numeric::kInf : q * delta - h * f_up[i]);
      s.down.exponent.push_back(std::isinf(f_down[i]) ? -numeric::kInf : -q * delta - h * f_down[i]);
    }
    s.up.decays_numeric = still_falling(s.up.exponent);
    s.down.decays_numeric = still_falling(s.down.exponent);
    s.up.decays_exact = rep.regime_up != "linear" || delta < rep.exact_threshold_up;
    s.down.decays_exact = rep.regime_down != "linear" || delta > rep.exact_threshold_down;
    s.decays_both = s.up.decays_exact && s.down.decays_exact;
    rep.samples.push_back(std::move(s));
  }
  return rep;
}

double bns_epsilon(const BNSParams& p, double s, double T) { return -std::expm1(-p.lambda * (T - s)) / p.lambda; }

double bns_kappa(const BNSParams& p, double theta) {
  double k = 0.0;
  for (const auto& a : p.subordinator.jumps) {
    if (theta * a.x > kExpCap) throw Overflow("subordinator cumulant overflows", theta);
    k += a.mass * std::expm1(theta * a.x);
  }
  return k;
}

namespace {

double jump_integral(const BNSParams& p, double a, double b, double T, double q) {
  if (p.subordinator.jumps.empty() || b <= a) return 0.0;
  try {
    return numeric::integrate(
        [&](double s) {
          const double f = p.rho * q + 0.5 * (q * q + 2 * p.beta * q) * bns_epsilon(p, s, T);
          return p.lambda * bns_kappa(p, f);
        },
        a, b);
  } catch (const Overflow&) {
    throw Overflow("BNS exponent overflows at q = " + std::to_string(q), q);
  }
}

}  // namespace

double bns_laplace(const BNSParams& p, double t, double T, double q, double x_t, double sigma_t_sq) {
  p.validate();
  if (!(t < T)) throw InvalidParams("bns_laplace needs t < T");
  return q * (x_t + p.m * (T - t)) + (q * q + 2 * p.beta * q) * bns_epsilon(p, t, T) / 2 * sigma_t_sq +
         jump_integral(p, t, T, T, q);
}

std::vector<BNSIncrement> bns_simulate_increments(const BNSParams& p, double t, double h, double T, std::size_t n,
                                                  std::uint64_t seed) {
  p.validate();
  if (!(h > 0.0) || !(t >= 0.0) || !(t + h <= T)) throw InvalidParams("need h > 0 and 0 <= t < t + h <= T");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double rate = 0.0;
  std::vector<double> weights;
  for (const auto& a : p.subordinator.jumps) {
    rate += p.lambda * a.mass;
    weights.push_back(a.mass);
  }
  std::exponential_distribution<double> wait(rate > 0.0 ? rate : 1.0);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());

  std::vector<BNSIncrement> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double now = 0.0, x = 0.0, var = p.sigma0_sq;
    double next_jump = rate > 0.0 ? wait(rng) : numeric::kInf;
    auto advance_to = [&](double target) {
      while (now < target) {
        const double stop = std::min(target, next_jump);
        const double dt = stop - now;
        const double iv = var * -std::expm1(-p.lambda * dt) / p.lambda;
        x += p.m * dt + p.beta * iv + std::sqrt(iv) * normal(rng);
        var *= std::exp(-p.lambda * dt);
        now = stop;
        if (now == next_jump) {
          const double y = p.subordinator.jumps[pick(rng)].x;
          x += p.rho * y;
          var += y;
          next_jump = now + wait(rng);
        }
      }
    };
    advance_to(t);
    const double x_t = x, e_t = bns_epsilon(p, t, T) * var;
    advance_to(t + h);
    out.push_back({x - x_t, bns_epsilon(p, t + h, T) * var - e_t});
  }
  return out;
}

double bns_bracket(const BNSParams& p, double t, double h, double T, const BNSIncrement& sample, double q) {
  return q * (sample.dx - p.m * h) + (q * q + 2 * p.beta * q) * sample.deps_var / 2 - jump_integral(p, t, t + h, T, q);
}

BNSTailsReport bns_tails_check(const BNSParams& p, double t, double h, double T,
                               std::span<const BNSIncrement> path_sample, std::span<const double> q_schedule) {
  p.validate();
  if (!(h > 0.0) || !(t >= 0.0) || !(t + h <= T)) throw InvalidParams("need h > 0 and 0 <= t < t + h <= T");
  check_schedule(q_schedule);
  BNSTailsReport rep;
  rep.t = t;
  rep.h = h;
  rep.T = T;
  rep.q.assign(q_schedule.begin(), q_schedule.end());
  double moment3 = 0.0;
  for (const auto& a : p.subordinator.jumps) moment3 += a.mass * a.x * a.x * a.x;
  const double eps3 = numeric::integrate([&](double s) { return std::pow(bns_epsilon(p, s, T), 3); }, t, t + h);
  rep.q6_coefficient = p.lambda / 48.0 * eps3 * moment3;

  // The jump integral depends on q only; share it across samples.
  std::vector<double> up_int, down_int;
  for (double q : q_schedule) {
    auto safe = [&](double s) {
      try {
        return jump_integral(p, t, t + h, T, s);
      } catch (const Overflow&) {
        return numeric::kInf;
      }
    };
    up_int.push_back(safe(q));
    down_int.push_back(safe(-q));
  }
  rep.all_diverge = true;
  for (const auto& s : path_sample) {
    BNSSampleTrace tr{s, {}, {}, false};
    for (std::size_t i = 0; i < q_schedule.size(); ++i) {
      for (int dir : {1, -1}) {
        const double q = dir * q_schedule[i];
        const double jumps = dir > 0 ? up_int[i] : down_int[i];
        const double v = q * (s.dx - p.m * h) + (q * q + 2 * p.beta * q) * s.deps_var / 2 - jumps;
        (dir > 0 ? tr.up : tr.down).push_back(std::isinf(jumps) ? -numeric::kInf : v);
      }
    }
    tr.diverges = still_falling(tr.up) && still_falling(tr.down);
    rep.all_diverge = rep.all_diverge && tr.diverges;
    rep.samples.push_back(std::move(tr));
  }
  return rep;
}

}  // namespace indiff
