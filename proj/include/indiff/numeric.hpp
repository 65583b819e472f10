#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "indiff/errors.hpp"

namespace indiff::numeric {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Streaming log-sum-exp. Adding -inf is a no-op.
class LogSumExp {
 public:
  void add(double x) {
    if (x == -kInf) return;
    if (x > max_) {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    } else {
      sum_ += std::exp(x - max_);
    }
  }
  double value() const { return max_ == -kInf ? -kInf : max_ + std::log(sum_); }

 private:
  double max_ = -kInf;
  double sum_ = 0.0;
};

double log_sum_exp(std::span<const double> xs);

/// Tolerances shared by the one-dimensional solvers.
struct RootOptions {
  double x_tol = 1e-14;  // relative to 1 + |x|
  int max_iter = 200;
};

/// Root of a monotone function given as (value, derivative).
///
/// Expands outward from `x0` until the sign changes, then runs a Newton
/// iteration safeguarded by bisection inside the bracket. Throws
/// NonConvergence when no bracket is found or the budget runs out.
template <class F>
double solve_monotone(F&& f, double x0, double step, const RootOptions& opt = {}) {
  auto [g0, d0] = f(x0);
  if (!std::isfinite(g0)) throw NonConvergence("solve_monotone: non-finite value at start");
  if (g0 == 0.0) return x0;
  const double direction = (std::isfinite(d0) && d0 != 0.0 && g0 * d0 > 0.0) ? -1.0 : 1.0;
  double h = std::abs(step) > 0 ? std::abs(step) : 1.0;
  double lo = x0, glo = g0, hi = x0;
  bool bracketed = false;
  for (int k = 0; k < opt.max_iter && !bracketed; ++k, h *= 2.0) {
    const double x = x0 + direction * h;
    const double g = f(x).first;
    if (!std::isfinite(g)) throw NonConvergence("solve_monotone: left the representable range");
    if (g == 0.0) return x;
    if ((g > 0) != (g0 > 0)) {
      bracketed = true;
      if (direction > 0) hi = x; else { lo = x; glo = g; }
    } else if (direction > 0) {
      lo = x; glo = g;
    } else {
      hi = x;
    }
  }
  if (!bracketed) throw NonConvergence("solve_monotone: failed to bracket a root");
  double x = 0.5 * (lo + hi);
  for (int k = 0; k < opt.max_iter; ++k) {
    auto [g, d] = f(x);
    if (g == 0.0) return x;
    if ((g > 0) == (glo > 0)) { lo = x; glo = g; } else { hi = x; }
    double next = (d != 0.0 && std::isfinite(d)) ? x - g / d : kNaN;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double tol = opt.x_tol * (1.0 + std::abs(next));
    if (std::abs(next - x) <= tol || (hi - lo) <= tol) return next;
    x = next;
  }
  throw NonConvergence("solve_monotone: iteration budget exhausted");
}

/// Plain bisection on [lo, hi] for a continuous f with a sign change.
template <class F>
double bisect(F&& f, double lo, double hi, double x_tol, int max_iter = 400) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) throw NonConvergence("bisect: endpoints do not bracket a root");
  for (int k = 0; k < max_iter; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= x_tol || mid == lo || mid == hi) return mid;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) { lo = mid; flo = fm; } else { hi = mid; }
  }
  return 0.5 * (lo + hi);
}

struct Minimum {
  double x;
  double value;
};

/// Golden-section search for the minimum of a unimodal f on [a, b].
template <class F>
Minimum golden_section_min(F&& f, double a, double b, double x_tol, int max_iter = 200) {
  constexpr double invphi = 0.6180339887498949;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int k = 0; k < max_iter && (b - a) > x_tol * (1.0 + std::abs(a) + std::abs(b)); ++k) {
    if (fc <= fd) {
      b = d; d = c; fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? Minimum{c, fc} : Minimum{d, fd};
}

/// Gauss-Legendre nodes and weights on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

const QuadratureRule& gauss_legendre(int points);

struct QuadratureOptions {
  int points = 64;
  double rel_tol = 1e-8;
  double abs_tol = 1e-300;
  int max_depth = 30;
};

/// Adaptive composite Gauss-Legendre: a panel is split in halves until the
/// two-half estimate agrees with the whole-panel estimate.
double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadratureOptions& opt = {});

std::vector<double> linspace(double lo, double hi, std::size_t n);

/// Round to `digits` significant decimal digits.
double round_significant(double x, int digits);

}  // namespace indiff::numeric
