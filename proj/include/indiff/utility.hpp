#pragma once

#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace indiff {

/// u(x) = -exp(-alpha x).
struct Exponential {
  double alpha;
};

/// One term w * (-exp(-a x)) of an exponential mixture.
struct ExponentialAtom {
  double risk_aversion;
  double weight;
};

/// u(x) = -sum_k w_k exp(-a_k x).
struct ExponentialMixture {
  std::vector<ExponentialAtom> atoms;
};

/// User-supplied utility with its first two derivatives.
struct CustomUtility {
  std::function<double(double)> u;
  std::function<double(double)> du;
  std::function<double(double)> d2u;
};

/// Asymptotic risk-aversion levels: `lower` at +infinity, `upper` at -infinity.
struct Stabilization {
  double lower;
  double upper;
};

/// A market maker's utility: strictly concave, increasing, vanishing at
/// +infinity, with absolute risk aversion inside [1/c, c].
///
/// Every quantity that can overflow in linear scale has a log-scale
/// accessor (`log_marginal`, `log_neg_value`); the solvers only use those.
class UtilitySpec {
 public:
  using Kind = std::variant<Exponential, ExponentialMixture, CustomUtility>;

  static UtilitySpec exponential(double alpha);
  static UtilitySpec mixture(std::vector<ExponentialAtom> atoms);
  /// `bound_c` is the constant of the risk-aversion bound; the clamp used by
  /// the marginal inversion is [-700/c, 700/c].
  static UtilitySpec custom(CustomUtility fns, double bound_c, std::optional<Stabilization> stabilization = {});

  /// Tighten or loosen the risk-aversion constant c (must keep the bound valid).
  UtilitySpec& with_bound(double c);

  double value(double x) const;
  double marginal(double x) const;
  double second_derivative(double x) const;
  double risk_aversion(double x) const;

  double log_marginal(double x) const;
  /// log(-u(x)).
  double log_neg_value(double x) const;
  /// The x with log u'(x) = level.
  double inverse_log_marginal(double level) const;

  double risk_aversion_bound() const { return bound_c_; }
  const std::optional<Stabilization>& stabilization() const { return stabilization_; }
  const Kind& kind() const { return kind_; }
  bool is_exponential() const { return std::holds_alternative<Exponential>(kind_); }

  /// Check Assumption-1 style invariants on the sample grid; throws InvalidUtility.
  void validate(std::span<const double> grid) const;
  /// validate() on [-50, 50].
  void validate() const;

 private:
  UtilitySpec(Kind kind, double bound_c, std::optional<Stabilization> stabilization)
      : kind_(std::move(kind)), bound_c_(bound_c), stabilization_(stabilization) {}

  Kind kind_;
  double bound_c_;
  std::optional<Stabilization> stabilization_;
};

}  // namespace indiff
