#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ltc {

// Integrands are evaluated as f(x, s): space first, then time.
using SpaceTimeFn = std::function<double(double x, double s)>;

struct SupportBox {
  double x_min = -std::numeric_limits<double>::infinity();
  double x_max = std::numeric_limits<double>::infinity();
  double s_min = 0.0;
  double s_max = 1.0;

  bool contains(double x, double s) const noexcept {
    return x >= x_min && x <= x_max && s >= s_min && s <= s_max;
  }
  bool bounded_in_x() const noexcept;
};

// A time-space integrand with its declared support and, once computed, the
// membership diagnostics for the local-time integral.
struct TimeSpaceFunction {
  std::string name;
  SpaceTimeFn eval;             // already zero outside `support`
  SpaceTimeFn dx;               // optional a.e. derivative in x
  SupportBox support;
  bool time_dependent = true;
  std::optional<double> star_norm;
  std::optional<double> l2_norm;

  double operator()(double x, double s) const { return eval(x, s); }
};

// Wraps `fn` so that it vanishes outside `box`.
TimeSpaceFunction make_function(std::string name, SpaceTimeFn fn, SupportBox box = {},
                                bool time_dependent = true, SpaceTimeFn dx = nullptr);

TimeSpaceFunction constant_function(double c);
TimeSpaceFunction identity_function();  // f(x, s) = x
TimeSpaceFunction sign_function();      // sgn(x), sgn(0) = 0
TimeSpaceFunction sine_function();      // sin(x)
// f restricted to (s0, s1] in time.
TimeSpaceFunction time_window(const TimeSpaceFunction& f, double s0, double s1);
TimeSpaceFunction restrict_box(const TimeSpaceFunction& f, SupportBox box);
TimeSpaceFunction linear_combination(double a, const TimeSpaceFunction& f, double b,
                                     const TimeSpaceFunction& g);

// Step function on cells (x_i, x_{i+1}] x (s_j, s_{j+1}].
struct ElementaryFunction {
  std::vector<double> x;                  // increasing breakpoints
  std::vector<double> s;                  // subdivision of [0, 1]
  std::vector<std::vector<double>> coef;  // [x cell][s cell]

  // Throws ConfigurationError on inconsistent shapes or ordering.
  void validate() const;
  double operator()(double xv, double sv) const;
  TimeSpaceFunction as_function() const;
};

}  // namespace ltc
