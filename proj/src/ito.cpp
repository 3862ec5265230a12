#include "ltcalc/ito.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>

#include "ltcalc/errors.hpp"
#include "ltcalc/numerics.hpp"

namespace ltc {

namespace {

SpaceTimeFn zero_fn() {
  return [](double, double) { return 0.0; };
}

std::size_t cell_index(const std::vector<double>& grid, double v) {
  const auto it = std::upper_bound(grid.begin(), grid.end(), v);
  const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - grid.begin() - 1, 0));
  return std::min(idx, grid.size() - 2);
}

}  // namespace

TimeSpaceFunction TestFunction::derivative_x() const {
  SupportBox box;
  box.x_min = -half_width;
  box.x_max = half_width;
  return make_function(name + "_x", Fx, box, time_dependent);
}

TestFunction linear_test(double slope, double intercept) {
  TestFunction F;
  F.name = "linear";
  F.F = [slope, intercept](double x, double) { return slope * x + intercept; };
  F.Fx = [slope](double, double) { return slope; };
  F.Ft = zero_fn();
  F.Fxx = zero_fn();
  return F;
}

TestFunction quadratic_test() {
  TestFunction F;
  F.name = "quadratic";
  F.F = [](double x, double) { return 0.5 * x * x; };
  F.Fx = [](double x, double) { return x; };
  F.Ft = zero_fn();
  F.Fxx = [](double, double) { return 1.0; };
  return F;
}

TestFunction abs_test() {
  TestFunction F;
  F.name = "abs";
  F.F = [](double x, double) { return std::abs(x); };
  F.Fx = [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
  F.Ft = zero_fn();
  return F;
}

TestFunction call_test(double strike) {
  TestFunction F;
  F.name = "call(" + std::to_string(strike) + ")";
  F.F = [strike](double x, double) { return std::max(x - strike, 0.0); };
  F.Fx = [strike](double x, double) { return x > strike ? 1.0 : 0.0; };
  F.Ft = zero_fn();
  return F;
}

TestFunction sine_test() {
  TestFunction F;
  F.name = "sin";
  F.F = [](double x, double) { return std::sin(x); };
  F.Fx = [](double x, double) { return std::cos(x); };
  F.Ft = zero_fn();
  F.Fxx = [](double x, double) { return -std::sin(x); };
  return F;
}

TestFunction time_sine_test() {
  TestFunction F;
  F.name = "tsin";
  F.F = [](double x, double t) { return t * std::sin(x); };
  F.Fx = [](double x, double t) { return t * std::cos(x); };
  F.Ft = [](double x, double) { return std::sin(x); };
  F.Fxx = [](double x, double t) { return -t * std::sin(x); };
  F.time_dependent = true;
  return F;
}

TestFunction tabulated_test(std::vector<double> xs, std::vector<double> ts,
                            std::vector<std::vector<double>> values) {
  if (xs.size() < 2) throw ConfigurationError("tabulated F needs at least two x nodes");
  if (ts.empty()) throw ConfigurationError("tabulated F needs at least one t node");
  if (!std::is_sorted(xs.begin(), xs.end()) ||
      std::adjacent_find(xs.begin(), xs.end()) != xs.end()) {
    throw ConfigurationError("tabulated x nodes must be strictly increasing");
  }
  if (!std::is_sorted(ts.begin(), ts.end()) ||
      std::adjacent_find(ts.begin(), ts.end()) != ts.end()) {
    throw ConfigurationError("tabulated t nodes must be strictly increasing");
  }
  if (values.size() != xs.size()) throw ConfigurationError("tabulated F has the wrong row count");
  for (const auto& row : values) {
    if (row.size() != ts.size()) throw ConfigurationError("tabulated F has the wrong column count");
  }
  const bool time_dependent = ts.size() > 1;
  if (!time_dependent) {
    ts.push_back(ts.front() + 1.0);
    for (auto& row : values) row.push_back(row.front());
  }
  struct Table {
    std::vector<double> xs, ts;
    std::vector<std::vector<double>> v;
  };
  auto table = std::make_shared<const Table>(Table{std::move(xs), std::move(ts), std::move(values)});

  // Returns value, x-slope and t-slope of the bilinear interpolant, constant
  // beyond the table edges.
  auto eval = [table](double x, double t) {
    const auto& X = table->xs;
    const auto& T = table->ts;
    const bool x_in = x >= X.front() && x <= X.back();
    const bool t_in = t >= T.front() && t <= T.back();
    const double xc = std::clamp(x, X.front(), X.back());
    const double tc = std::clamp(t, T.front(), T.back());
    const std::size_t i = cell_index(X, xc);
    const std::size_t j = cell_index(T, tc);
    const double hx = X[i + 1] - X[i];
    const double ht = T[j + 1] - T[j];
    const double wx = (xc - X[i]) / hx;
    const double wt = (tc - T[j]) / ht;
    const auto& v = table->v;
    const double lo = (1 - wx) * v[i][j] + wx * v[i + 1][j];
    const double hi = (1 - wx) * v[i][j + 1] + wx * v[i + 1][j + 1];
    const double value = (1 - wt) * lo + wt * hi;
    const double dx = x_in ? ((1 - wt) * (v[i + 1][j] - v[i][j]) + wt * (v[i + 1][j + 1] - v[i][j + 1])) / hx
                           : 0.0;
    const double dt = t_in ? (hi - lo) / ht : 0.0;
    return std::array<double, 3>{value, dx, dt};
  };
  TestFunction F;
  F.name = "custom-tabulated";
  F.F = [eval](double x, double t) { return eval(x, t)[0]; };
  F.Fx = [eval](double x, double t) { return eval(x, t)[1]; };
  F.Ft = [eval, time_dependent](double x, double t) {
    return time_dependent ? eval(x, t)[2] : 0.0;
  };
  F.half_width = std::max(std::abs(table->xs.front()), std::abs(table->xs.back()));
  F.time_dependent = time_dependent;
  return F;
}

TestFunction shifted_test(const TestFunction& F, double constant) {
  TestFunction out = F;
  out.name = F.name + "+c";
  out.F = [f = F.F, constant](double x, double t) { return f(x, t) + constant; };
  return out;
}

TestFunction with_time_part(const TestFunction& F, std::function<double(double)> H,
                            std::function<double(double)> dH) {
  TestFunction out = F;
  out.name = F.name + "+H";
  out.F = [f = F.F, H](double x, double t) { return f(x, t) + H(t); };
  out.Ft = [ft = F.Ft, dH](double x, double t) { return ft(x, t) + dH(t); };
  out.time_dependent = true;
  return out;
}

double absolute_continuity_gap(const TestFunction& F, double x, double y, double t) {
  const double integral =
      integrate_adaptive([&](double u) { return F.Fx(u, t); }, std::min(x, y), std::max(x, y));
  const double signed_integral = x >= y ? integral : -integral;
  return std::abs(F.F(x, t) - F.F(y, t) - signed_integral);
}

// ---------------------------------------------------------------------------

Mollifier::Mollifier(int scale) : scale_(scale) {
  if (scale <= 0) throw DomainError("mollifier scale must be a positive integer");
}

namespace {

double raw_bump(double u) {
  const double w = 1.0 - u * u;
  return w > 0.0 ? std::exp(-1.0 / w) : 0.0;
}

}  // namespace

double Mollifier::normalization() {
  static const double mass = integrate_gl(raw_bump, -1.0, 1.0, 64, 16);
  return 1.0 / mass;
}

double Mollifier::bump(double u) { return normalization() * raw_bump(u); }

double Mollifier::bump_d1(double u) {
  const double w = 1.0 - u * u;
  if (!(w > 0.0)) return 0.0;
  return bump(u) * (-2.0 * u / (w * w));
}

double Mollifier::bump_d2(double u) {
  const double w = 1.0 - u * u;
  if (!(w > 0.0)) return 0.0;
  const double d1 = -2.0 * u / (w * w);
  const double d2 = -2.0 / (w * w) - 8.0 * u * u / (w * w * w);
  return bump(u) * (d1 * d1 + d2);
}

namespace {

struct KernelNodes {
  std::vector<double> u;
  std::vector<double> g, g1, g2;  // weight times kernel and its derivatives
};

KernelNodes kernel_nodes(const MollifyQuadrature& q) {
  const GaussRule& rule = gauss_legendre(q.order);
  KernelNodes k;
  const double h = 2.0 / static_cast<double>(q.panels);
  for (std::size_t p = 0; p < q.panels; ++p) {
    const double a = -1.0 + static_cast<double>(p) * h;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double u = a + 0.5 * h * (rule.nodes[i] + 1.0);
      const double w = 0.5 * h * rule.weights[i];
      k.u.push_back(u);
      k.g.push_back(w * Mollifier::bump(u));
      k.g1.push_back(w * Mollifier::bump_d1(u));
      k.g2.push_back(w * Mollifier::bump_d2(u));
    }
  }
  // Match the discrete moments to the continuous ones (mass 1, first moment
  // of g' equal to -1, second moment of g'' equal to 2) so that affine and
  // quadratic functions are reproduced to rounding.
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < k.u.size(); ++i) {
    m0 += k.g[i];
    m1 += k.g1[i] * k.u[i];
    m2 += k.g2[i] * k.u[i] * k.u[i];
  }
  for (std::size_t i = 0; i < k.u.size(); ++i) {
    k.g[i] /= m0;
    k.g1[i] /= -m1;
    k.g2[i] *= 2.0 / m2;
  }
  return k;
}

}  // namespace

TestFunction mollify(const TestFunction& F, const Mollifier& g, MollifyQuadrature q) {
  if (q.panels == 0 || q.order == 0) throw ConfigurationError("mollifier quadrature is empty");
  auto nodes = std::make_shared<const KernelNodes>(kernel_nodes(q));
  const double n = g.scale();
  const double A = F.half_width;
  const bool td = F.time_dependent;
  const SpaceTimeFn base = F.F;

  // Zero extension in x, clamped time.
  auto tilde = [base, A](double y, double s) {
    if (std::abs(y) > A) return 0.0;
    return base(y, std::clamp(s, 0.0, 1.0));
  };
  // Time-smoothed value at (y, t), using kernel weights `w` in time.
  auto in_time = [nodes, tilde, n, td](double y, double t, const std::vector<double>& w) {
    if (!td) {
      double mass = 0.0;
      for (double v : w) mass += v;
      return tilde(y, t) * mass;
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes->u.size(); ++k) acc += w[k] * tilde(y, t - nodes->u[k] / n);
    return acc;
  };
  // Space convolution against kernel weights `wx` after time smoothing with `wt`.
  // The centre value is subtracted for derivative kernels, which integrate to 0.
  auto convolve = [nodes, in_time, n](double x, double t, const std::vector<double>& wx,
                                      const std::vector<double>& wt, bool subtract_centre) {
    const double centre = subtract_centre ? in_time(x, t, wt) : 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes->u.size(); ++k) {
      acc += wx[k] * (in_time(x - nodes->u[k] / n, t, wt) - centre);
    }
    return acc;
  };

  TestFunction out;
  out.name = F.name + "_n" + std::to_string(g.scale());
  out.half_width = A + g.support();
  out.time_dependent = td;
  out.F = [nodes, convolve](double x, double t) { return convolve(x, t, nodes->g, nodes->g, false); };
  out.Fx = [nodes, convolve, n](double x, double t) {
    return n * convolve(x, t, nodes->g1, nodes->g, true);
  };
  out.Fxx = [nodes, convolve, n](double x, double t) {
    return n * n * convolve(x, t, nodes->g2, nodes->g, true);
  };
  if (td) {
    out.Ft = [nodes, convolve, n](double x, double t) {
      return n * convolve(x, t, nodes->g, nodes->g1, false);
    };
  } else {
    out.Ft = zero_fn();
  }
  return out;
}

// ---------------------------------------------------------------------------

RefinedIntegral refined_midpoint(const std::function<double(double)>& fn, double a, double b,
                                 std::size_t points) {
  if (points == 0 || !(b > a)) throw ConfigurationError("invalid midpoint quadrature");
  auto midpoint = [&](std::size_t m) {
    const double h = (b - a) / static_cast<double>(m);
    CompensatedSum acc;
    for (std::size_t i = 0; i < m; ++i) acc += fn(a + (static_cast<double>(i) + 0.5) * h);
    return acc.value() * h;
  };
  const double i1 = midpoint(points);
  const double i2 = midpoint(2 * points);
  const double i4 = midpoint(4 * points);
  RefinedIntegral out;
  out.value = i4;
  if (!std::isfinite(i1) || !std::isfinite(i2) || !std::isfinite(i4)) {
    out.finite = false;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  // A convergent rule shrinks its corrections under refinement; a
  // non-integrable singularity keeps them growing (ratio >= 1).
  const double d1 = i2 - i1;
  const double d2 = i4 - i2;
  const double noise = 1e-9 * (1.0 + std::abs(i4));
  if (d1 > noise && d2 > noise && d2 >= d1 * (1.0 - 1e-9)) {
    out.finite = false;
    out.value = std::numeric_limits<double>::infinity();
  }
  return out;
}

ItoDiagnostics ito_diagnostics(const TestFunction& F, const std::function<double(double)>& r,
                               const DiagnosticQuadrature& q) {
  ItoDiagnostics d;
  const double A = F.half_width;
  auto x_integral = [&](const SpaceTimeFn& fn, bool square, double s) {
    return refined_midpoint(
        [&](double x) {
          const double v = fn(x, s);
          return square ? v * v : std::abs(v);
        },
        -A, A, q.x_points);
  };
  auto double_integral = [&](const SpaceTimeFn& fn, bool square, bool& finite) {
    if (!fn) return 0.0;
    bool x_finite = true;
    std::function<double(double)> inner;
    if (F.time_dependent) {
      inner = [&](double s) {
        const RefinedIntegral I = x_integral(fn, square, s);
        if (!I.finite) x_finite = false;
        return I.finite ? I.value * r(s) : 0.0;
      };
    } else {
      const RefinedIntegral I = x_integral(fn, square, 0.5);
      if (!I.finite) {
        finite = false;
        return std::numeric_limits<double>::infinity();
      }
      inner = [&r, v = I.value](double s) { return v * r(s); };
    }
    const SingularIntegral S = integrate_near_zero(inner, q.delta, 1.0, q.s_points);
    finite = x_finite && S.finite;
    return finite ? S.value : std::numeric_limits<double>::infinity();
  };

  d.ft_integral = double_integral(F.Ft, false, d.ft_finite);
  d.fx2_integral = double_integral(F.Fx, true, d.fx2_finite);
  const double r1 = r(1.0);
  d.r1_nonzero = std::isfinite(r1) && r1 > 0.0;
  if (!d.ft_finite) {
    d.failed = "int int |dF/dt| dx r(s) ds";
  } else if (!d.fx2_finite) {
    d.failed = "int int (dF/dx)^2 dx r(s) ds";
  } else if (!d.r1_nonzero) {
    d.failed = "r(1) != 0";
  }
  d.pass = d.failed.empty();
  return d;
}

namespace {

std::function<double(double)> model_r(const DiffusionModel& model) {
  if (model.envelopes && model.envelopes->r) return model.envelopes->r;
  if (model.density) {
    return [density = *model.density](double s) { return grid_envelope_r(density, s, {}); };
  }
  throw HypothesisViolation("density envelope r is unavailable for model '" + model.name + "'");
}

}  // namespace

ItoVerifier::ItoVerifier(TestFunction F, const DiffusionModel& model, const DiagnosticQuadrature& q)
    : F_(std::move(F)) {
  if (!F_.F || !F_.Fx || !F_.Ft) throw ConfigurationError("test function needs F, Fx and Ft");
  diagnostics_ = ito_diagnostics(F_, model_r(model), q);
  if (!diagnostics_.pass) {
    throw HypothesisViolation("integrability condition failed for '" + F_.name +
                              "': " + diagnostics_.failed);
  }
  fx_ = F_.derivative_x();
}

ItoTerms ItoVerifier::residual(const SamplePath& path, const LocalTimeField& field,
                               double t) const {
  return residual(path, field, 0.0, t);
}

ItoTerms ItoVerifier::residual(const SamplePath& path, const LocalTimeField& field, double t0,
                               double t) const {
  if (!(t0 >= 0.0 && t <= 1.0 && t0 <= t)) throw DomainError("residual window must lie in [0, 1]");
  const double te = field.tgrid()[field.t_index_at_or_below(t)];
  const double t0e = field.tgrid()[field.t_index_at_or_below(t0)];
  const std::size_t k1 = path.partition.index_at_or_below(te);
  const std::size_t k0 = path.partition.index_at_or_below(t0e);

  ItoTerms terms;
  terms.endpoint = F_.F(path.values[k1], path.time(k1)) - F_.F(path.values[k0], path.time(k0));
  CompensatedSum dx, dt;
  for (std::size_t i = k0; i < k1; ++i) {
    const double x = path.values[i];
    const double s = path.time(i);
    dx += F_.Fx(x, s) * (path.values[i + 1] - x);
    if (F_.time_dependent) dt += F_.F(x, path.time(i + 1)) - F_.F(x, s);
  }
  terms.dx_integral = dx.value();
  terms.dt_integral = dt.value();
  terms.dl_integral = timespace_integral(fx_, field, t0e, te);
  terms.residual =
      terms.endpoint - terms.dx_integral - terms.dt_integral + 0.5 * terms.dl_integral;
  return terms;
}

double ito_residual(const TestFunction& F, const DiffusionModel& model, const SamplePath& path,
                    const LocalTimeField& field, double t) {
  return ItoVerifier(F, model).residual(path, field, t).residual;
}

SmoothConsistency smooth_consistency_check(const TestFunction& F, const DiffusionModel& model,
                                           const SamplePath& path, const LocalTimeField& field,
                                           double t) {
  if (!F.Fxx) throw ConfigurationError("'" + F.name + "' has no second x-derivative");
  const double te = field.tgrid()[field.t_index_at_or_below(t)];
  const std::size_t k1 = path.partition.index_at_or_below(te);
  CompensatedSum qv;
  const double dt = path.dt();
  for (std::size_t i = 0; i < k1; ++i) {
    const double x = path.values[i];
    const double s = path.time(i);
    const double sigma = model.dispersion(s, x);
    qv += F.Fxx(x, s) * sigma * sigma * dt;
  }
  SmoothConsistency out;
  out.dl_term = timespace_integral(F.derivative_x(), field, te);
  out.qv_term = -qv.value();
  out.gap = out.dl_term - out.qv_term;
  return out;
}

MollifiedConvergence mollified_convergence_study(const TestFunction& F,
                                                 const DiffusionModel& model,
                                                 std::span<const SamplePath> paths,
                                                 std::span<const int> scales, double epsilon,
                                                 double t, MollifyQuadrature q) {
  if (paths.empty()) throw ConfigurationError("convergence study needs at least one path");
  if (!(epsilon > 0.0 && epsilon < t && t <= 1.0)) {
    throw DomainError("convergence window needs 0 < eps < t <= 1");
  }
  if (!model.density) {
    throw ConfigurationError("convergence study needs the density of model '" + model.name + "'");
  }
  const DensityModel& density = *model.density;
  MollifiedConvergence report;
  for (int n : scales) {
    const TestFunction Fn = mollify(F, Mollifier(n), q);
    CompensatedSum drift, mart, corr;
    for (const SamplePath& path : paths) {
      const std::size_t k0 = path.partition.index_at_or_below(epsilon);
      const std::size_t k1 = path.partition.index_at_or_below(t);
      const double dt = path.dt();
      for (std::size_t i = std::max<std::size_t>(k0, 1); i < k1; ++i) {
        const double x = path.values[i];
        const double s = path.time(i);
        const double gap = Fn.Fx(x, s) - F.Fx(x, s);
        if (gap == 0.0) continue;
        const double sigma = model.dispersion(s, x);
        drift += std::abs(gap * model.drift(s, x)) * dt;
        mart += gap * gap * sigma * sigma * dt;
        if (density.score) {
          corr += std::abs(gap * density.score(s, x)) * dt;
        } else if (const double p = density.density(s, x); p > kDensityFloor) {
          corr += std::abs(gap * density.weighted_derivative(s, x) / p) * dt;
        }
      }
    }
    const double m = static_cast<double>(paths.size());
    MollifiedGap rung;
    rung.scale = n;
    rung.drift_l1 = drift.value() / m;
    rung.martingale_l2 = std::sqrt(mart.value() / m);
    rung.star = 2.0 * rung.drift_l1 + 2.0 * rung.martingale_l2 + corr.value() / m;
    report.rungs.push_back(rung);
  }
  auto decreasing = [&](auto member) {
    for (std::size_t k = 1; k < report.rungs.size(); ++k) {
      const double prev = report.rungs[k - 1].*member;
      const double cur = report.rungs[k].*member;
      if (cur > prev * (1.0 + 1e-9) + 1e-12) return false;
    }
    return true;
  };
  report.drift_decreasing = decreasing(&MollifiedGap::drift_l1);
  report.martingale_decreasing = decreasing(&MollifiedGap::martingale_l2);
  report.star_decreasing = decreasing(&MollifiedGap::star);
  return report;
}

}  // namespace ltc
