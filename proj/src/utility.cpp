#include "indiff/utility.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "indiff/errors.hpp"
#include "indiff/numeric.hpp"

namespace indiff {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Softmax-weighted mean of a_k^power under weights w_k a_k^shift e^{-a_k x}.
double mixture_moment(const ExponentialMixture& m, double x, int shift, int power) {
  double top = -numeric::kInf;
  for (const auto& at : m.atoms) top = std::max(top, std::log(at.weight) + shift * std::log(at.risk_aversion) - at.risk_aversion * x);
  double num = 0.0, den = 0.0;
  for (const auto& at : m.atoms) {
    const double w = std::exp(std::log(at.weight) + shift * std::log(at.risk_aversion) - at.risk_aversion * x - top);
    den += w;
    num += w * std::pow(at.risk_aversion, power);
  }
  return num / den;
}

}  // namespace

UtilitySpec UtilitySpec::exponential(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidUtility("exponential utility needs alpha > 0");
  return UtilitySpec(Exponential{alpha}, std::max(alpha, 1.0 / alpha), Stabilization{alpha, alpha});
}

UtilitySpec UtilitySpec::mixture(std::vector<ExponentialAtom> atoms) {
  if (atoms.empty()) throw InvalidUtility("exponential mixture needs at least one atom");
  double lo = numeric::kInf, hi = 0.0;
  for (const auto& at : atoms) {
    if (!(at.risk_aversion > 0.0) || !(at.weight > 0.0) || !std::isfinite(at.risk_aversion) || !std::isfinite(at.weight))
      throw InvalidUtility("mixture atoms need positive risk aversion and positive weight");
    lo = std::min(lo, at.risk_aversion);
    hi = std::max(hi, at.risk_aversion);
  }
  return UtilitySpec(ExponentialMixture{std::move(atoms)}, std::max(hi, 1.0 / lo), Stabilization{lo, hi});
}

UtilitySpec UtilitySpec::custom(CustomUtility fns, double bound_c, std::optional<Stabilization> stabilization) {
  if (!fns.u || !fns.du || !fns.d2u) throw InvalidUtility("custom utility needs u, u' and u''");
  if (!(bound_c > 0.0)) throw InvalidUtility("risk-aversion bound c must be positive");
  if (stabilization && !(stabilization->lower > 0.0 && stabilization->lower <= stabilization->upper))
    throw InvalidUtility("stabilization levels need 0 < lower <= upper");
  return UtilitySpec(std::move(fns), bound_c, stabilization);
}

UtilitySpec& UtilitySpec::with_bound(double c) {
  if (!(c > 0.0)) throw InvalidUtility("risk-aversion bound c must be positive");
  if (stabilization_ && !std::holds_alternative<CustomUtility>(kind_)) {
    // Exponential families: risk aversion ranges over [lower, upper].
    if (c < stabilization_->upper * (1 - 1e-12) || 1.0 / c > stabilization_->lower * (1 + 1e-12))
      throw InvalidUtility("risk-aversion bound c = " + std::to_string(c) + " does not cover the utility's risk aversion");
  }
  bound_c_ = c;
  return *this;
}

double UtilitySpec::value(double x) const {
  return std::visit(Overloaded{
                        [&](const Exponential& e) { return -std::exp(-e.alpha * x); },
                        [&](const ExponentialMixture&) { return -std::exp(log_neg_value(x)); },
                        [&](const CustomUtility& c) { return c.u(x); },
                    },
                    kind_);
}

double UtilitySpec::marginal(double x) const {
  return std::visit(Overloaded{
                        [&](const CustomUtility& c) { return c.du(x); },
                        [&](const auto&) { return std::exp(log_marginal(x)); },
                    },
                    kind_);
}

double UtilitySpec::second_derivative(double x) const {
  return std::visit(Overloaded{
                        [&](const CustomUtility& c) { return c.d2u(x); },
                        [&](const auto&) { return -risk_aversion(x) * marginal(x); },
                    },
                    kind_);
}

double UtilitySpec::risk_aversion(double x) const {
  return std::visit(Overloaded{
                        [&](const Exponential& e) { return e.alpha; },
                        [&](const ExponentialMixture& m) { return mixture_moment(m, x, 1, 1); },
                        [&](const CustomUtility& c) { return -c.d2u(x) / c.du(x); },
                    },
                    kind_);
}

double UtilitySpec::log_marginal(double x) const {
  return std::visit(Overloaded{
                        [&](const Exponential& e) { return std::log(e.alpha) - e.alpha * x; },
                        [&](const ExponentialMixture& m) {
                          numeric::LogSumExp acc;
                          for (const auto& at : m.atoms) acc.add(std::log(at.weight * at.risk_aversion) - at.risk_aversion * x);
                          return acc.value();
                        },
                        [&](const CustomUtility& c) { return std::log(c.du(x)); },
                    },
                    kind_);
}

double UtilitySpec::log_neg_value(double x) const {
  return std::visit(Overloaded{
                        [&](const Exponential& e) { return -e.alpha * x; },
                        [&](const ExponentialMixture& m) {
                          numeric::LogSumExp acc;
                          for (const auto& at : m.atoms) acc.add(std::log(at.weight) - at.risk_aversion * x);
                          return acc.value();
                        },
                        [&](const CustomUtility& c) { return std::log(-c.u(x)); },
                    },
                    kind_);
}

double UtilitySpec::inverse_log_marginal(double level) const {
  if (const auto* e = std::get_if<Exponential>(&kind_)) return (std::log(e->alpha) - level) / e->alpha;
  // log u' is strictly decreasing with slope -a(x); Newton on it is safeguarded by a bracket.
  auto g = [&](double x) { return std::pair{log_marginal(x) - level, -risk_aversion(x)}; };
  double x0 = 0.0;
  if (std::holds_alternative<CustomUtility>(kind_)) {
    const double clamp = 700.0 / bound_c_;
    const double lo = -clamp, hi = clamp;
    auto f = [&](double x) { return log_marginal(x) - level; };
    if (f(lo) < 0.0 || f(hi) > 0.0) throw NonConvergence("marginal utility level outside the custom utility's clamp");
    return numeric::bisect(f, lo, hi, 1e-14 * clamp);
  }
  return numeric::solve_monotone(g, x0, 1.0);
}

void UtilitySpec::validate(std::span<const double> grid) const {
  const double c = bound_c_;
  for (double x : grid) {
    const double du = marginal(x);
    const double a = risk_aversion(x);
    const double u = value(x);
    if (!(du > 0.0)) throw InvalidUtility("utility not strictly increasing at x = " + std::to_string(x));
    if (!(a > 0.0)) throw InvalidUtility("utility not strictly concave at x = " + std::to_string(x));
    if (!(u < 0.0) && std::isfinite(u)) throw InvalidUtility("utility must be negative (u -> 0 at +infinity)");
    const double slack = 1e-9;
    if (a > c * (1 + slack) || a < (1.0 / c) * (1 - slack))
      throw InvalidUtility("risk aversion " + std::to_string(a) + " at x = " + std::to_string(x) +
                           " outside [1/c, c] with c = " + std::to_string(c));
  }
}

void UtilitySpec::validate() const {
  const auto grid = numeric::linspace(-50.0, 50.0, 201);
  validate(grid);
}

}  // namespace indiff
