#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "indiff/tree.hpp"

namespace indiff {

struct JumpAtom {
  double x;     // jump size, nonzero
  double mass;  // intensity, > 0
};

/// Levy triplet (b, c, mu) with a finite atomic jump measure.
struct LevyTriplet {
  double b = 0.0;
  double c = 0.0;
  std::vector<JumpAtom> jumps;
  /// Throws InvalidParams for c < 0, bad atoms or the deterministic case.
  void validate() const;
};

/// Stochastic-volatility model driven by a compound-Poisson subordinator.
struct BNSParams {
  double m = 0.0;
  double beta = 0.0;
  double lambda = 1.0;
  double rho = -0.5;
  double sigma0_sq = 0.04;
  LevyTriplet subordinator;  // positive atoms only; b and c are ignored
  void validate() const;
};

enum class TailVerdict { Dominated, NotDominated, Inconclusive };
std::string to_string(TailVerdict v);

struct TailThresholds {
  double dominated = 1e-8;
  double not_dominated = 1e-3;
};

struct RayTrace {
  std::size_t security;
  int direction;                  // +1 or -1
  std::vector<double> q;          // |q| schedule
  std::vector<double> log_ratio;  // log of the moment ratio along the schedule
};

struct DominanceReport {
  TailVerdict verdict = TailVerdict::Inconclusive;
  std::vector<RayTrace> rays;
  std::optional<TailVerdict> exact;  // extremal-atom criterion, J = 1 only
};

/// Ratio of exponential moments of mu and nu along the rays +-e_j.
DominanceReport tail_dominance(const ConditionalDistribution& mu, const ConditionalDistribution& nu,
                               std::span<const double> q_schedule, const TailThresholds& thresholds = {});

struct DecreasingTailsNode {
  NodeIndex node;
  double probability;               // P[child distribution dominated | node]
  std::vector<NodeIndex> witnesses;  // children where both bounds strictly improve
};

struct DecreasingTailsReport {
  int t;
  double probability;  // minimum over the time t-1 nodes
  std::vector<DecreasingTailsNode> nodes;
};

/// Exact criterion from the conditional extrema; J = 1 only.
DecreasingTailsReport decreasing_tails_check(const ScenarioTree& tree, int t);
/// Same quantity from numeric ray ratios at |q| up to max(q_schedule); any J.
DecreasingTailsReport decreasing_tails_numeric(const ScenarioTree& tree, int t, std::span<const double> q_schedule,
                                               const TailThresholds& thresholds = {});

/// Levy-Khintchine exponent f(q); throws Overflow if q x > 700 for an atom.
double levy_exponent(const LevyTriplet& triplet, double q);

/// Drift of the finite-variation part: b - sum over small jumps of mass * x.
double levy_effective_drift(const LevyTriplet& triplet);

struct LevyRay {
  std::vector<double> exponent;  // q Delta - h f(q) along the schedule; -inf after an overflow of f
  bool decays_numeric = false;   // below log(1e-8) and still falling at the end of the schedule
  bool decays_exact = false;     // limit from the asymptotics of f
};

struct LevySample {
  double delta;
  LevyRay up;    // q -> +inf
  LevyRay down;  // q -> -inf
  bool decays_both;
  bool in_bound_set;  // Delta < h (|b| + r), the set named in the c = 0 case analysis
};

struct LevyTailsReport {
  double t, h, T;
  std::vector<double> q;
  std::string regime_up, regime_down;  // exponential, quadratic or linear growth of f
  double effective_drift;
  double bound_rate;           // |b| + r with r the mass-weighted size of large negative jumps
  double exact_threshold_up;   // decay as q -> +inf iff Delta < this (linear regime)
  double exact_threshold_down; // decay as q -> -inf iff Delta > this (linear regime)
  std::vector<LevySample> samples;
};

LevyTailsReport levy_tails_check(const LevyTriplet& triplet, double t, double h, double T,
                                 std::span<const double> increment_samples, std::span<const double> q_schedule);

/// epsilon(s, T) = (1 - exp(-lambda (T - s))) / lambda.
double bns_epsilon(const BNSParams& p, double s, double T);
/// log E[e^{theta Z_1}] of the subordinator; throws Overflow if theta y > 700.
double bns_kappa(const BNSParams& p, double theta);
/// log E[exp(q X_T) | X_t, sigma_t^2].
double bns_laplace(const BNSParams& p, double t, double T, double q, double x_t, double sigma_t_sq);

struct BNSIncrement {
  double dx;       // X_{t+h} - X_t
  double deps_var; // eps(t+h,T) sigma^2_{t+h} - eps(t,T) sigma^2_t
};

/// Exact simulation of (X, sigma^2) from time 0 with X_0 = 0.
std::vector<BNSIncrement> bns_simulate_increments(const BNSParams& p, double t, double h, double T, std::size_t n,
                                                  std::uint64_t seed);

struct BNSSampleTrace {
  BNSIncrement sample;
  std::vector<double> up;    // bracket along +q
  std::vector<double> down;  // bracket along -q
  bool diverges;             // falls below log(1e-8) and keeps falling on both rays
};

struct BNSTailsReport {
  double t, h, T;
  std::vector<double> q;
  double q6_coefficient;  // lambda/48 * int eps^3 ds * sum mass y^3
  std::vector<BNSSampleTrace> samples;
  bool all_diverge;
};

/// Change in the log Laplace exponent between t and t+h for one sampled path.
double bns_bracket(const BNSParams& p, double t, double h, double T, const BNSIncrement& sample, double q);

BNSTailsReport bns_tails_check(const BNSParams& p, double t, double h, double T,
                               std::span<const BNSIncrement> path_sample, std::span<const double> q_schedule);

}  // namespace indiff
