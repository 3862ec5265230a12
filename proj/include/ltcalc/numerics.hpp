#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ltc {

// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) noexcept;
  double value() const noexcept { return sum_ + comp_; }
  CompensatedSum& operator+=(double v) noexcept {
    add(v);
    return *this;
  }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Gauss-Legendre rule with `order` nodes on [-1, 1].
const GaussRule& gauss_legendre(std::size_t order);

// Composite Gauss-Legendre over [a, b].
double integrate_gl(const std::function<double(double)>& fn, double a, double b,
                    std::size_t panels = 64, std::size_t order = 8);

// Adaptive bisection with an 8-node Gauss-Legendre rule; suited to
// integrands with isolated kinks or jumps.
double integrate_adaptive(const std::function<double(double)>& fn, double a, double b,
                          double tol = 1e-13, int max_depth = 48);

// Result of integrating a function with a possible power-law singularity at 0.
struct SingularIntegral {
  double value = 0.0;      // total over (0, upper]; +inf when divergent
  double body = 0.0;       // quadrature part on [delta, upper]
  double tail = 0.0;       // extrapolated part on (0, delta)
  double exponent = 0.0;   // fitted alpha of fn(s) ~ c s^alpha near 0
  bool finite = true;
};

// Midpoint rule in log(s) on [delta, upper] plus a fitted power-law tail on
// (0, delta). Divergent iff the fitted exponent is <= -1.
SingularIntegral integrate_near_zero(const std::function<double(double)>& fn,
                                     double delta = 1e-4, double upper = 1.0,
                                     std::size_t cells = 200);

// Log-spaced cells on [delta, upper]: geometric-midpoint nodes, cell-length
// weights.
struct LogGrid {
  std::vector<double> nodes;
  std::vector<double> weights;
};
LogGrid log_midpoint_grid(double delta, double upper, std::size_t cells);

// Power-law tail from the two smallest nodes of a log grid.
SingularIntegral power_tail(double s1, double v1, double s2, double v2, double delta);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;       // sample standard deviation (n-1)
  double stderr_ = 0.0;  // sd / sqrt(n)
  std::size_t count = 0;
};

Summary summarize(std::span<const double> values);

// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

}  // namespace ltc
