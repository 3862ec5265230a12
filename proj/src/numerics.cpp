#include "ltcalc/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

namespace ltc {

void CompensatedSum::add(double v) noexcept {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) {
    comp_ += (sum_ - t) + v;
  } else {
    comp_ += (v - t) + sum_;
  }
  sum_ = t;
}

namespace {

GaussRule make_rule(std::size_t order) {
  GaussRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (std::size_t i = 0; i < order; ++i) {
    // Newton on P_n starting from the Chebyshev-like guess.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(order) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      const double pn = order == 1 ? x : p1;
      const double pn1 = order == 1 ? 1.0 : p0;
      dp = static_cast<double>(order) * (x * pn - pn1) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

}  // namespace

const GaussRule& gauss_legendre(std::size_t order) {
  static std::mutex mutex;
  static std::map<std::size_t, GaussRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, make_rule(order)).first;
  return it->second;
}

double integrate_gl(const std::function<double(double)>& fn, double a, double b,
                    std::size_t panels, std::size_t order) {
  const GaussRule& rule = gauss_legendre(order);
  const double h = (b - a) / static_cast<double>(panels);
  CompensatedSum acc;
  for (std::size_t p = 0; p < panels; ++p) {
    const double mid = a + (static_cast<double>(p) + 0.5) * h;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      acc += 0.5 * h * rule.weights[k] * fn(mid + 0.5 * h * rule.nodes[k]);
    }
  }
  return acc.value();
}

namespace {

double gl_panel(const std::function<double(double)>& fn, double a, double b, const GaussRule& rule) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) acc += rule.weights[k] * fn(mid + half * rule.nodes[k]);
  return half * acc;
}

double adaptive_step(const std::function<double(double)>& fn, double a, double b, double whole,
                     double tol, int depth, const GaussRule& rule) {
  const double m = 0.5 * (a + b);
  const double left = gl_panel(fn, a, m, rule);
  const double right = gl_panel(fn, m, b, rule);
  if (depth <= 0 || std::abs(left + right - whole) <= tol) return left + right;
  return adaptive_step(fn, a, m, left, 0.5 * tol, depth - 1, rule) +
         adaptive_step(fn, m, b, right, 0.5 * tol, depth - 1, rule);
}

}  // namespace

double integrate_adaptive(const std::function<double(double)>& fn, double a, double b, double tol,
                          int max_depth) {
  if (a == b) return 0.0;
  const GaussRule& rule = gauss_legendre(8);
  return adaptive_step(fn, a, b, gl_panel(fn, a, b, rule), tol, max_depth, rule);
}

LogGrid log_midpoint_grid(double delta, double upper, std::size_t cells) {
  LogGrid grid;
  grid.nodes.reserve(cells);
  grid.weights.reserve(cells);
  const double w0 = std::log(delta);
  const double h = (std::log(upper) - w0) / static_cast<double>(cells);
  for (std::size_t k = 0; k < cells; ++k) {
    const double lo = std::exp(w0 + static_cast<double>(k) * h);
    const double hi = std::exp(w0 + static_cast<double>(k + 1) * h);
    grid.nodes.push_back(std::exp(w0 + (static_cast<double>(k) + 0.5) * h));
    grid.weights.push_back(hi - lo);
  }
  return grid;
}

SingularIntegral power_tail(double s1, double v1, double s2, double v2, double delta) {
  SingularIntegral out;
  const double a1 = std::abs(v1);
  const double a2 = std::abs(v2);
  if (a1 == 0.0 || a2 == 0.0) return out;
  out.exponent = std::log(a1 / a2) / std::log(s1 / s2);
  // Exponents within rounding of -1 are treated as the harmonic case.
  if (out.exponent <= -1.0 + 1e-9) {
    out.finite = false;
    out.tail = std::numeric_limits<double>::infinity();
    return out;
  }
  const double c = v1 / std::pow(s1, out.exponent);
  out.tail = c * std::pow(delta, out.exponent + 1.0) / (out.exponent + 1.0);
  return out;
}

SingularIntegral integrate_near_zero(const std::function<double(double)>& fn, double delta,
                                     double upper, std::size_t cells) {
  const LogGrid grid = log_midpoint_grid(delta, upper, cells);
  std::vector<double> values(grid.nodes.size());
  CompensatedSum body;
  for (std::size_t k = 0; k < grid.nodes.size(); ++k) {
    values[k] = fn(grid.nodes[k]);
    body += values[k] * grid.weights[k];
  }
  SingularIntegral out = power_tail(grid.nodes[0], values[0], grid.nodes[1], values[1], delta);
  out.body = body.value();
  out.value = out.finite ? out.body + out.tail : std::numeric_limits<double>::infinity();
  if (!std::isfinite(out.body)) {
    out.finite = false;
    out.value = std::numeric_limits<double>::infinity();
  }
  return out;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  CompensatedSum acc;
  for (double v : values) acc += v;
  s.mean = acc.value() / static_cast<double>(values.size());
  if (values.size() > 1) {
    CompensatedSum sq;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(sq.value() / static_cast<double>(values.size() - 1));
    s.stderr_ = s.sd / std::sqrt(static_cast<double>(values.size()));
  }
  return s;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) return 1.0;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace ltc
