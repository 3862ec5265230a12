#include "ltcalc/functions.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "ltcalc/errors.hpp"

namespace ltc {

bool SupportBox::bounded_in_x() const noexcept {
  return std::isfinite(x_min) && std::isfinite(x_max);
}

TimeSpaceFunction make_function(std::string name, SpaceTimeFn fn, SupportBox box,
                                bool time_dependent, SpaceTimeFn dx) {
  TimeSpaceFunction f;
  f.name = std::move(name);
  f.support = box;
  f.time_dependent = time_dependent;
  f.eval = [fn = std::move(fn), box](double x, double s) {
    return box.contains(x, s) ? fn(x, s) : 0.0;
  };
  if (dx) {
    f.dx = [dx = std::move(dx), box](double x, double s) {
      return box.contains(x, s) ? dx(x, s) : 0.0;
    };
  }
  return f;
}

TimeSpaceFunction constant_function(double c) {
  return make_function(
      "const", [c](double, double) { return c; }, {}, false,
      [](double, double) { return 0.0; });
}

TimeSpaceFunction identity_function() {
  return make_function(
      "x", [](double x, double) { return x; }, {}, false, [](double, double) { return 1.0; });
}

TimeSpaceFunction sign_function() {
  // The a.e. derivative is 0; the jump at 0 is what the local time sees.
  return make_function(
      "sgn", [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }, {}, false,
      [](double, double) { return 0.0; });
}

TimeSpaceFunction sine_function() {
  return make_function(
      "sin", [](double x, double) { return std::sin(x); }, {}, false,
      [](double x, double) { return std::cos(x); });
}

TimeSpaceFunction time_window(const TimeSpaceFunction& f, double s0, double s1) {
  TimeSpaceFunction out = f;
  out.name = f.name + "*1(" + std::to_string(s0) + "," + std::to_string(s1) + "]";
  out.time_dependent = true;
  out.support.s_min = std::max(f.support.s_min, s0);
  out.support.s_max = std::min(f.support.s_max, s1);
  out.eval = [g = f.eval, s0, s1](double x, double s) { return s > s0 && s <= s1 ? g(x, s) : 0.0; };
  if (f.dx) {
    out.dx = [g = f.dx, s0, s1](double x, double s) { return s > s0 && s <= s1 ? g(x, s) : 0.0; };
  }
  out.star_norm.reset();
  out.l2_norm.reset();
  return out;
}

TimeSpaceFunction restrict_box(const TimeSpaceFunction& f, SupportBox box) {
  SupportBox merged{std::max(f.support.x_min, box.x_min), std::min(f.support.x_max, box.x_max),
                    std::max(f.support.s_min, box.s_min), std::min(f.support.s_max, box.s_max)};
  return make_function(f.name, f.eval, merged, f.time_dependent, f.dx);
}

TimeSpaceFunction linear_combination(double a, const TimeSpaceFunction& f, double b,
                                     const TimeSpaceFunction& g) {
  SupportBox box{std::min(f.support.x_min, g.support.x_min),
                 std::max(f.support.x_max, g.support.x_max),
                 std::min(f.support.s_min, g.support.s_min),
                 std::max(f.support.s_max, g.support.s_max)};
  SpaceTimeFn dx;
  if (f.dx && g.dx) {
    dx = [a, b, fd = f.dx, gd = g.dx](double x, double s) { return a * fd(x, s) + b * gd(x, s); };
  }
  TimeSpaceFunction out;
  out.name = "lincomb";
  out.support = box;
  out.time_dependent = f.time_dependent || g.time_dependent;
  out.eval = [a, b, fe = f.eval, ge = g.eval](double x, double s) {
    return a * fe(x, s) + b * ge(x, s);
  };
  out.dx = std::move(dx);
  return out;
}

// ---------------------------------------------------------------------------

void ElementaryFunction::validate() const {
  if (x.size() < 2) throw ConfigurationError("elementary function needs >= 2 x breakpoints");
  if (s.size() < 2) throw ConfigurationError("elementary function needs >= 2 s breakpoints");
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) throw ConfigurationError("x breakpoints must be increasing");
  }
  for (std::size_t j = 1; j < s.size(); ++j) {
    if (!(s[j] > s[j - 1])) throw ConfigurationError("s breakpoints must be increasing");
  }
  if (s.front() < 0.0 || s.back() > 1.0) {
    throw ConfigurationError("s breakpoints must subdivide [0, 1]");
  }
  if (coef.size() != x.size() - 1) throw ConfigurationError("coef needs one row per x cell");
  for (const auto& row : coef) {
    if (row.size() != s.size() - 1) {
      throw ConfigurationError("coef rows need one entry per s cell");
    }
    for (double v : row) {
      if (!std::isfinite(v)) throw ConfigurationError("non-finite elementary coefficient");
    }
  }
}

namespace {

// Index i with axis[i] < v <= axis[i+1], or npos.
std::size_t half_open_cell(const std::vector<double>& axis, double v) {
  if (!(v > axis.front()) || v > axis.back()) return static_cast<std::size_t>(-1);
  const auto it = std::lower_bound(axis.begin(), axis.end(), v);
  return static_cast<std::size_t>(it - axis.begin()) - 1;
}

}  // namespace

double ElementaryFunction::operator()(double xv, double sv) const {
  const std::size_t i = half_open_cell(x, xv);
  const std::size_t j = half_open_cell(s, sv);
  if (i == static_cast<std::size_t>(-1) || j == static_cast<std::size_t>(-1)) return 0.0;
  return coef[i][j];
}

TimeSpaceFunction ElementaryFunction::as_function() const {
  validate();
  auto self = std::make_shared<const ElementaryFunction>(*this);
  SupportBox box{x.front(), x.back(), s.front(), s.back()};
  const bool time_dependent = s.size() > 2;
  return make_function(
      "elementary", [self](double xv, double sv) { return (*self)(xv, sv); }, box,
      time_dependent, [](double, double) { return 0.0; });
}

}  // namespace ltc
