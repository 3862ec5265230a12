#include "ltcalc/localtime.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "ltcalc/errors.hpp"
#include "ltcalc/numerics.hpp"

namespace ltc {

namespace {

constexpr double kGridTolerance = 1e-9;

double pow2_floor(double v) {
  int exp = 0;
  std::frexp(v, &exp);  // v = m 2^exp, m in [0.5, 1)
  return std::ldexp(1.0, exp - 1);
}

std::vector<std::size_t> tgrid_indices(const Partition& partition, std::span<const double> tgrid) {
  if (tgrid.empty()) throw ConfigurationError("local-time tgrid is empty");
  std::vector<std::size_t> out;
  out.reserve(tgrid.size());
  for (std::size_t j = 0; j < tgrid.size(); ++j) {
    const double t = tgrid[j];
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("tgrid time outside [0, 1]");
    const double scaled = std::ldexp(t, partition.level());
    if (scaled != std::floor(scaled)) {
      throw GridMismatchError("tgrid time " + std::to_string(t) + " is not a partition time");
    }
    const auto k = static_cast<std::size_t>(scaled);
    if (!out.empty() && k <= out.back()) throw ConfigurationError("tgrid must be increasing");
    out.push_back(k);
  }
  return out;
}

// Builds a field from per-step contributions. `contribution(i)` returns the
// global index range [k_lo, k_hi] (inclusive) and the weight of step i.
struct StepContribution {
  long long k_lo;
  long long k_hi;
  double weight;
};

template <class Contribution>
LocalTimeField build_field(const SamplePath& path, const SpaceGrid& grid,
                           std::span<const double> tgrid, double dx, double reach,
                           double epsilon, LocalTimeEstimator estimator,
                           Contribution&& contribution) {
  if (!(grid.x_min < grid.x_max)) throw ConfigurationError("x_min must be below x_max");
  const std::vector<std::size_t> t_idx = tgrid_indices(path.partition, tgrid);

  const auto [min_it, max_it] = std::minmax_element(path.values.begin(), path.values.end());
  const double lo = *min_it - reach;
  const double hi = *max_it + reach;
  const long long g_lo = static_cast<long long>(std::ceil(grid.x_min / dx));
  const long long g_hi = static_cast<long long>(std::floor(grid.x_max / dx));
  const long long k0 = std::max(g_lo, static_cast<long long>(std::floor(lo / dx)) - 2);
  const long long k1 = std::min(g_hi, static_cast<long long>(std::ceil(hi / dx)) + 2);
  if (k1 < k0) throw ConfigurationError("space grid does not intersect the path range");
  const auto nx = static_cast<std::size_t>(k1 - k0 + 1);

  std::vector<double> xgrid(nx);
  for (std::size_t i = 0; i < nx; ++i) xgrid[i] = static_cast<double>(k0 + static_cast<long long>(i)) * dx;

  std::vector<double> values(nx * tgrid.size(), 0.0);
  std::vector<double> diff(nx + 1, 0.0);
  std::vector<double> current(nx, 0.0);
  double added = 0.0;
  std::size_t j = 0;
  // Increments since the previous snapshot are nonnegative; prefix-sum
  // residue below the rounding floor is dropped so that L stays monotone.
  auto snapshot = [&](std::size_t row) {
    const double floor = 1e-13 * added;
    double run = 0.0;
    double* out = values.data() + row * nx;
    for (std::size_t i = 0; i < nx; ++i) {
      run += diff[i];
      if (run > floor) current[i] += run;
      out[i] = current[i];
    }
    std::fill(diff.begin(), diff.end(), 0.0);
    added = 0.0;
  };
  while (j < t_idx.size() && t_idx[j] == 0) snapshot(j++);
  const std::size_t last_step = t_idx.back();
  for (std::size_t i = 0; i < last_step; ++i) {
    const StepContribution c = contribution(i);
    const long long a = std::max(c.k_lo, k0);
    const long long b = std::min(c.k_hi, k1);
    if (a <= b && c.weight != 0.0) {
      diff[static_cast<std::size_t>(a - k0)] += c.weight;
      diff[static_cast<std::size_t>(b - k0 + 1)] -= c.weight;
      added += std::abs(c.weight);
    }
    while (j < t_idx.size() && t_idx[j] == i + 1) snapshot(j++);
  }

  LocalTimeField field(std::move(xgrid), std::vector<double>(tgrid.begin(), tgrid.end()),
                       std::move(values), dx, epsilon, estimator);
  field.covers_path = lo >= grid.x_min && hi <= grid.x_max;
  return field;
}

}  // namespace

double field_spacing(double dx, int level) {
  if (!(dx > 0.0) || !std::isfinite(dx)) throw ConfigurationError("grid dx must be positive");
  const int refine = (level + 1) / 2 + 4;
  return std::min(pow2_floor(dx), std::ldexp(1.0, -refine));
}

std::vector<double> decimated_tgrid(const Partition& partition) {
  const std::size_t stride =
      partition.level() > 8 ? (std::size_t{1} << (partition.level() - 8)) : 1;
  std::vector<double> out;
  for (std::size_t i = 0; i < partition.size(); i += stride) out.push_back(partition.time(i));
  return out;
}

LocalTimeField::LocalTimeField(std::vector<double> xgrid, std::vector<double> tgrid,
                               std::vector<double> values, double dx, double epsilon,
                               LocalTimeEstimator estimator)
    : xgrid_(std::move(xgrid)),
      tgrid_(std::move(tgrid)),
      values_(std::move(values)),
      dx_(dx),
      epsilon_(epsilon),
      estimator_(estimator) {
  if (values_.size() != xgrid_.size() * tgrid_.size()) {
    throw ConfigurationError("local-time field shape mismatch");
  }
}

std::optional<std::size_t> LocalTimeField::t_index(double t) const {
  const auto it = std::lower_bound(tgrid_.begin(), tgrid_.end(), t - 1e-15);
  if (it != tgrid_.end() && std::abs(*it - t) <= 1e-15) {
    return static_cast<std::size_t>(it - tgrid_.begin());
  }
  return std::nullopt;
}

std::size_t LocalTimeField::t_index_at_or_below(double t) const {
  if (tgrid_.empty() || t < tgrid_.front()) throw DomainError("time before the field tgrid");
  const auto it = std::upper_bound(tgrid_.begin(), tgrid_.end(), t + 1e-15);
  return static_cast<std::size_t>(it - tgrid_.begin()) - 1;
}

double LocalTimeField::value(double x, double t, bool interpolate) const {
  if (xgrid_.empty()) return 0.0;
  std::size_t j0 = 0;
  std::size_t j1 = 0;
  double wt = 0.0;
  if (const auto j = t_index(t)) {
    j0 = j1 = *j;
  } else if (interpolate && t >= tgrid_.front() && t <= tgrid_.back()) {
    j0 = t_index_at_or_below(t);
    j1 = std::min(j0 + 1, nt() - 1);
    wt = j1 == j0 ? 0.0 : (t - tgrid_[j0]) / (tgrid_[j1] - tgrid_[j0]);
  } else {
    throw GridMismatchError("time " + std::to_string(t) + " is not on the field tgrid");
  }
  if (x < xgrid_.front() - kGridTolerance * dx_ || x > xgrid_.back() + kGridTolerance * dx_) {
    return 0.0;
  }
  const double r = (x - xgrid_.front()) / dx_;
  const double nearest = std::round(r);
  auto at_t = [&](std::size_t xi) { return (1.0 - wt) * at(j0, xi) + wt * at(j1, xi); };
  if (std::abs(r - nearest) <= kGridTolerance) {
    return at_t(static_cast<std::size_t>(nearest));
  }
  if (!interpolate) {
    throw GridMismatchError("abscissa " + std::to_string(x) + " is not on the field grid");
  }
  const auto i0 = static_cast<std::size_t>(std::floor(r));
  const std::size_t i1 = std::min(i0 + 1, nx() - 1);
  const double w = r - std::floor(r);
  return (1.0 - w) * at_t(i0) + w * at_t(i1);
}

LocalTimeField LocalTimeField::subsample_x(std::size_t stride) const {
  if (stride <= 1) return *this;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < nx(); ++i) {
    const auto k = static_cast<long long>(std::llround(xgrid_[i] / dx_));
    if (k % static_cast<long long>(stride) == 0) keep.push_back(i);
  }
  std::vector<double> xs;
  std::vector<double> vals;
  xs.reserve(keep.size());
  vals.reserve(keep.size() * nt());
  for (std::size_t i : keep) xs.push_back(xgrid_[i]);
  for (std::size_t j = 0; j < nt(); ++j) {
    for (std::size_t i : keep) vals.push_back(at(j, i));
  }
  LocalTimeField out(std::move(xs), tgrid_, std::move(vals), dx_ * static_cast<double>(stride),
                     epsilon_, estimator_);
  out.below_resolution = below_resolution;
  out.covers_path = covers_path;
  return out;
}

LocalTimeField estimate_local_time(const SamplePath& path, const DiffusionModel& model,
                                   const SpaceGrid& grid, std::span<const double> tgrid,
                                   double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("occupation bandwidth must be positive");
  const double dx = pow2_floor(grid.dx);
  const double dt = path.dt();
  const double scale = dt / (2.0 * epsilon);
  LocalTimeField field = build_field(
      path, grid, tgrid, dx, epsilon, epsilon, LocalTimeEstimator::Occupation,
      [&](std::size_t i) {
        const double x = path.values[i];
        const double sigma = model.dispersion(path.time(i), x);
        return StepContribution{static_cast<long long>(std::ceil((x - epsilon) / dx)),
                                static_cast<long long>(std::floor((x + epsilon) / dx)),
                                sigma * sigma * scale};
      });
  field.below_resolution = epsilon < kResolutionFactor * std::sqrt(dt);
  return field;
}

LocalTimeField crossing_local_time(const SamplePath& path, const SpaceGrid& grid,
                                   std::span<const double> tgrid) {
  const double dx = pow2_floor(grid.dx);
  return build_field(path, grid, tgrid, dx, 0.0, 0.0, LocalTimeEstimator::Crossing,
                     [&](std::size_t i) {
                       const double a = path.values[i];
                       const double b = path.values[i + 1];
                       const double lo = std::min(a, b);
                       const double hi = std::max(a, b);
                       // Grid points k dx with lo <= k dx < hi.
                       return StepContribution{static_cast<long long>(std::ceil(lo / dx)),
                                               static_cast<long long>(std::ceil(hi / dx)) - 1,
                                               hi - lo};
                     });
}

LocalTimeField local_time_field(const SamplePath& path, const DiffusionModel& model,
                                const LocalTimeSpec& spec) {
  SpaceGrid grid = spec.grid;
  grid.dx = field_spacing(spec.grid.dx, path.partition.level());
  const std::vector<double> tgrid = decimated_tgrid(path.partition);
  if (spec.estimator == LocalTimeEstimator::Occupation) {
    return estimate_local_time(path, model, grid, tgrid, spec.epsilon);
  }
  return crossing_local_time(path, grid, tgrid);
}

void write_field_csv(const LocalTimeField& field, std::ostream& out) {
  out << "t,x,L\n" << std::setprecision(17);
  for (std::size_t j = 0; j < field.nt(); ++j) {
    for (std::size_t i = 0; i < field.nx(); ++i) {
      out << field.tgrid()[j] << ',' << field.xgrid()[i] << ',' << field.at(j, i) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

double elementary_integral(const ElementaryFunction& f, const LocalTimeField& field,
                           bool interpolate) {
  f.validate();
  const std::size_t nxb = f.x.size();
  const std::size_t nsb = f.s.size();
  std::vector<double> L(nxb * nsb);
  for (std::size_t i = 0; i < nxb; ++i) {
    for (std::size_t j = 0; j < nsb; ++j) L[i * nsb + j] = field.value(f.x[i], f.s[j], interpolate);
  }
  CompensatedSum acc;
  for (std::size_t i = 0; i + 1 < nxb; ++i) {
    for (std::size_t j = 0; j + 1 < nsb; ++j) {
      const double inc = L[(i + 1) * nsb + j + 1] - L[(i + 1) * nsb + j] - L[i * nsb + j + 1] +
                         L[i * nsb + j];
      acc += f.coef[i][j] * inc;
    }
  }
  return acc.value();
}

namespace {

// Two-point Gauss nodes on a unit cell, offsets from the cell start.
constexpr double kGaussLo = 0.5 - 0.28867513459481288225;
constexpr double kGaussHi = 0.5 + 0.28867513459481288225;

}  // namespace

double timespace_integral(const TimeSpaceFunction& f, const LocalTimeField& field, double t0,
                          double t1) {
  if (f.star_norm && !std::isfinite(*f.star_norm)) {
    throw MembershipError("'" + f.name + "' has infinite norm and is outside the integrable space");
  }
  if (field.nx() < 2 || field.nt() < 2) return 0.0;
  if (t1 <= t0) return 0.0;
  const std::size_t j0 = field.t_index_at_or_below(t0);
  const std::size_t j1 = field.t_index_at_or_below(t1);
  if (j1 <= j0) return 0.0;

  const auto& xs = field.xgrid();
  const auto& ts = field.tgrid();
  const std::size_t nx = field.nx();
  std::vector<double> slab(nx);
  CompensatedSum acc;

  auto add_slab = [&](std::size_t ja, std::size_t jb, bool average_time) {
    for (std::size_t i = 0; i < nx; ++i) slab[i] = field.at(jb, i) - field.at(ja, i);
    const double sa = ts[ja];
    const double sb = ts[jb];
    for (std::size_t i = 0; i + 1 < nx; ++i) {
      const double inc = slab[i + 1] - slab[i];
      if (inc == 0.0) continue;
      const double h = xs[i + 1] - xs[i];
      const double xa = xs[i] + kGaussLo * h;
      const double xb = xs[i] + kGaussHi * h;
      double avg;
      if (average_time) {
        const double ua = sa + kGaussLo * (sb - sa);
        const double ub = sa + kGaussHi * (sb - sa);
        avg = 0.25 * (f(xa, ua) + f(xa, ub) + f(xb, ua) + f(xb, ub));
      } else {
        const double mid = 0.5 * (sa + sb);
        avg = 0.5 * (f(xa, mid) + f(xb, mid));
      }
      acc += avg * inc;
    }
  };

  if (f.time_dependent) {
    for (std::size_t j = j0; j < j1; ++j) add_slab(j, j + 1, true);
  } else {
    add_slab(j0, j1, false);
  }
  return acc.value();
}

double timespace_integral(const TimeSpaceFunction& f, const LocalTimeField& field, double t) {
  return timespace_integral(f, field, 0.0, t);
}

RefinementStudy timespace_refinement(const TimeSpaceFunction& f, const LocalTimeField& field,
                                     double t, std::size_t levels) {
  RefinementStudy study;
  for (std::size_t k = levels; k-- > 0;) {
    study.values.push_back(timespace_integral(f, field.subsample_x(std::size_t{1} << k), t));
  }
  for (std::size_t k = 1; k < study.values.size(); ++k) {
    study.gaps.push_back(std::abs(study.values[k] - study.values[k - 1]));
  }
  study.value = study.values.empty() ? 0.0 : study.values.back();
  return study;
}

double epsilon_truncated_integral(const TimeSpaceFunction& f, const LocalTimeField& field,
                                  double epsilon, double t) {
  if (epsilon < 0.0) throw DomainError("truncation epsilon must be non-negative");
  if (epsilon >= t) return 0.0;
  return timespace_integral(f, field, epsilon, t);
}

std::vector<double> epsilon_ladder(const TimeSpaceFunction& f, const LocalTimeField& field,
                                   double t, std::span<const double> epsilons) {
  std::vector<double> out;
  out.reserve(epsilons.size());
  for (double e : epsilons) out.push_back(epsilon_truncated_integral(f, field, e, t));
  return out;
}

// ---------------------------------------------------------------------------

SeminormResult seminorm_star(const TimeSpaceFunction& f, const DiffusionModel& model,
                             const NormQuadrature& q) {
  if (!model.density) {
    throw ConfigurationError("seminorm needs a density for model '" + model.name + "'");
  }
  const DensityModel& density = *model.density;
  const double s_lo = std::max(q.delta, f.support.s_min);
  const double s_hi = std::min(1.0, f.support.s_max);
  SeminormResult out;
  if (!(s_hi > s_lo)) return out;

  const LogGrid sgrid = log_midpoint_grid(s_lo, s_hi, q.s_points);
  std::vector<double> drift(sgrid.nodes.size());
  std::vector<double> mart(sgrid.nodes.size());
  std::vector<double> dens(sgrid.nodes.size());
  for (std::size_t k = 0; k < sgrid.nodes.size(); ++k) {
    const double s = sgrid.nodes[k];
    const auto [m, sd] = density.location_scale(s);
    const double a = std::max(f.support.x_min, m - q.window_sds * sd);
    const double b = std::min(f.support.x_max, m + q.window_sds * sd);
    if (!(b > a)) continue;
    const double h = (b - a) / static_cast<double>(q.x_points);
    CompensatedSum i1, i2, i3;
    for (std::size_t i = 0; i < q.x_points; ++i) {
      const double x = a + (static_cast<double>(i) + 0.5) * h;
      const double fv = f(x, s);
      if (fv == 0.0) continue;
      const double p = density.density(s, x);
      const double sigma = model.dispersion(s, x);
      i1 += std::abs(fv * model.drift(s, x)) * p * h;
      i2 += fv * fv * sigma * sigma * p * h;
      i3 += std::abs(fv * density.weighted_derivative(s, x)) * h;
    }
    drift[k] = i1.value();
    mart[k] = i2.value();
    dens[k] = i3.value();
  }

  auto integrate = [&](const std::vector<double>& inner) {
    CompensatedSum body;
    for (std::size_t k = 0; k < inner.size(); ++k) body += inner[k] * sgrid.weights[k];
    SingularIntegral r;
    if (s_lo <= q.delta && inner.size() >= 2) {
      r = power_tail(sgrid.nodes[0], inner[0], sgrid.nodes[1], inner[1], q.delta);
    }
    r.body = body.value();
    r.value = r.finite ? r.body + r.tail : std::numeric_limits<double>::infinity();
    return r;
  };
  const SingularIntegral d1 = integrate(drift);
  const SingularIntegral d2 = integrate(mart);
  const SingularIntegral d3 = integrate(dens);
  out.drift_term = 2.0 * d1.value;
  out.martingale_term = 2.0 * std::sqrt(d2.value);
  out.density_term = d3.value;
  out.value = out.drift_term + out.martingale_term + out.density_term;
  out.finite = std::isfinite(out.value);
  return out;
}

double l2_norm(const TimeSpaceFunction& f, const NormQuadrature& q) {
  const double s_lo = std::max(0.0, f.support.s_min);
  const double s_hi = std::min(1.0, f.support.s_max);
  if (!(s_hi > s_lo)) return 0.0;
  if (!f.support.bounded_in_x()) return std::numeric_limits<double>::infinity();
  const double a = f.support.x_min;
  const double b = f.support.x_max;
  if (!(b > a)) return 0.0;
  const double hx = (b - a) / static_cast<double>(q.x_points);
  const double hs = (s_hi - s_lo) / static_cast<double>(q.s_points);
  CompensatedSum acc;
  for (std::size_t k = 0; k < q.s_points; ++k) {
    const double s = s_lo + (static_cast<double>(k) + 0.5) * hs;
    for (std::size_t i = 0; i < q.x_points; ++i) {
      const double v = f(a + (static_cast<double>(i) + 0.5) * hx, s);
      acc += v * v * hx * hs;
    }
  }
  return std::sqrt(acc.value());
}

NormResult norm_H(const TimeSpaceFunction& f, const DiffusionModel& model,
                  const NormQuadrature& q) {
  const SeminormResult star = seminorm_star(f, model, q);
  NormResult out;
  out.star = star.value;
  out.l2 = l2_norm(f, q);
  out.value = out.star + out.l2;
  out.finite = std::isfinite(out.value);
  return out;
}

void attach_membership(TimeSpaceFunction& f, const DiffusionModel& model,
                       const NormQuadrature& q) {
  f.star_norm = seminorm_star(f, model, q).value;
  f.l2_norm = l2_norm(f, q);
}

}  // namespace ltc
