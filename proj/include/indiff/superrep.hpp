#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "indiff/dynamics.hpp"
#include "indiff/tree.hpp"

namespace indiff {

/// Coordinate search over node positions inside a box that grows by
/// `box_growth` per level.
struct SearchConfig {
  int levels = 8;
  int grid_points = 21;
  double initial_box = 1.0;
  double box_growth = 1.5;
  int sweeps = 3;
  int golden_iterations = 60;
  std::size_t max_evaluations = 2'000'000;  // BudgetExceeded if the plan needs more
  int evidence_levels = 5;
  double divergence_threshold = 10.0;
  bool warm_start = true;
  std::optional<std::vector<double>> initial_utilities;  // default: initial_utilities(tree, panel)
};

enum class Attainment { Attained, NotAttainedEvidence, Unknown };
std::string to_string(Attainment a);

struct PricePoint {
  int level;
  double box;
  std::size_t evaluations;
  double price;
};

struct SuperrepResult {
  double price_upper = 0.0;
  std::vector<PricePoint> price_curve;
  Attainment attained = Attainment::Unknown;
  Strategy best_strategy;
  double verification_gap = 0.0;  // max_leaf (pnl + H) - price_upper on a fresh evolution
  bool warm_started = false;
  std::size_t evaluations = 0;
};

/// Smallest initial capital pi found such that X_T + <Q_T, psi> <= pi - H on every leaf.
SuperrepResult superreplication_price(const ScenarioTree& tree, const MarketMakerPanel& panel,
                                      std::span<const double> claim, const SearchConfig& config = {});

/// max_leaf (X_T + <Q_T, psi> + H) for a given strategy.
double superreplication_cost(const ScenarioTree& tree, const MarketMakerPanel& panel, std::span<const double> u_start,
                             const Strategy& strategy, std::span<const double> claim);

struct FrictionScale {
  double scale;
  std::vector<double> losses;  // leaf-indexed; NaN outside the probed subtrees
  std::string error;           // non-empty when the dynamics failed at this scale
};

struct FrictionReport {
  int t;
  std::vector<FrictionScale> scales;
  std::vector<double> final_slope;  // per leaf, loss growth per unit of scale at the last two scales
  bool diverges = false;            // some leaf's loss keeps growing linearly
  std::vector<std::size_t> diverging_leaves;
};

/// Trades scale * direction at the time t-1 nodes, liquidates afterwards and
/// tracks the per-leaf losses as the scale grows.
FrictionReport efficient_friction_probe(const ScenarioTree& tree, const MarketMakerPanel& panel, int t,
                                        std::span<const double> u_levels, std::span<const double> scale_schedule,
                                        const std::map<NodeIndex, std::vector<double>>& direction = {},
                                        double slope_tol = 1e-3);

struct CashRatioNode {
  NodeIndex node;
  std::vector<double> ratios;  // X(Q)/Q along the schedule
  double limit;                // -psi_lower for Q -> +inf, -psi_upper for Q -> -inf
  double error;                // |last ratio - limit|
};

/// X(Q)/Q at each time t-1 node against the conditional-extremum limit.
std::vector<CashRatioNode> cash_ratio_asymptotics(const ScenarioTree& tree, const MarketMakerPanel& panel, int t,
                                                  int sign, std::span<const double> scale_schedule,
                                                  std::span<const double> u_levels = {});

/// Two-period tree: Y1 = +-1 with P(+1) = p1; Y2 = +-1 with P(+1) = p2 after an
/// up move and p3 after a down move; psi = psi_u if Y2 = +1 else psi_d.
/// Node ids: root, u, d, uu, ud, du, dd.
ScenarioTree counterexample_tree(double p1, double p2, double p3, double psi_u, double psi_d);

struct CounterexampleNode {
  std::string id;
  double A;
  double utility_limit;          // -(1-A)/(1-B)
  double cash_limit;             // (1/alpha) log((1-B)/(1-A))
  std::vector<double> utility;   // U_1 along the q schedule
  std::vector<double> cash;      // X_2 along the q schedule
  int derivative_sign;           // sign of dU_1/dQ_1
  bool derivative_checked;       // finite differences agree with the sign
};

struct CounterexampleReport {
  double B;
  std::vector<double> q_schedule;
  std::vector<CounterexampleNode> nodes;  // up node first
  SuperrepResult superreplication;
  bool replicable;                        // exact replication of H = -X_2
  std::string conclusion;
};

CounterexampleReport counterexample_run(double p1, double p2, double p3, double alpha, double psi_u, double psi_d,
                                        std::span<const double> q_schedule, const SearchConfig& config = {});

}  // namespace indiff
