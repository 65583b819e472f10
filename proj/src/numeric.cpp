#include "indiff/numeric.hpp"

#include <cstdio>
#include <cstdlib>
#include <map>
#include <mutex>
#include <numbers>

namespace indiff::numeric {

double log_sum_exp(std::span<const double> xs) {
  LogSumExp acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

namespace {

QuadratureRule make_gauss_legendre(int n) {
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

double panel(const std::function<double(double)>& f, double a, double b, const QuadratureRule& rule) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return half * sum;
}

double adapt(const std::function<double(double)>& f, double a, double b, double whole,
             const QuadratureRule& rule, const QuadratureOptions& opt, int depth) {
  const double mid = 0.5 * (a + b);
  const double left = panel(f, a, mid, rule);
  const double right = panel(f, mid, b, rule);
  const double refined = left + right;
  if (!std::isfinite(refined)) return refined;
  const double err = std::abs(refined - whole);
  if (depth >= opt.max_depth || err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(refined))) return refined;
  return adapt(f, a, mid, left, rule, opt, depth + 1) + adapt(f, mid, b, right, rule, opt, depth + 1);
}

}  // namespace

const QuadratureRule& gauss_legendre(int points) {
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(points);
  if (it == cache.end()) it = cache.emplace(points, make_gauss_legendre(points)).first;
  return it->second;
}

double integrate(const std::function<double(double)>& f, double a, double b, const QuadratureOptions& opt) {
  if (a == b) return 0.0;
  const auto& rule = gauss_legendre(opt.points);
  return adapt(f, a, b, panel(f, a, b, rule), rule, opt, 0);
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

double round_significant(double x, int digits) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*e", digits - 1, x);
  return std::strtod(buf, nullptr);
}

}  // namespace indiff::numeric
