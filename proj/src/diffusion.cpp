#include "ltcalc/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "ltcalc/errors.hpp"
#include "ltcalc/numerics.hpp"

namespace ltc {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gaussian_pdf(double x, double mean, double var) {
  const double z = x - mean;
  return kInvSqrt2Pi / std::sqrt(var) * std::exp(-0.5 * z * z / var);
}

void require_positive_time(double t) {
  if (!(t > 0.0)) throw DomainError("density requested at t <= 0");
}

}  // namespace

double analytic_mean(const AnalyticSpec& spec, double t) {
  if (spec.kind == AnalyticSpec::Kind::Brownian) return spec.x0;
  return spec.x0 * std::exp(-spec.theta * t);
}

double analytic_variance(const AnalyticSpec& spec, double t) {
  require_positive_time(t);
  if (spec.kind == AnalyticSpec::Kind::Brownian) return t;
  // -expm1 keeps precision for small theta * t.
  return spec.sigma * spec.sigma * (-std::expm1(-2.0 * spec.theta * t)) / (2.0 * spec.theta);
}

double analytic_density(const AnalyticSpec& spec, double t, double x) {
  require_positive_time(t);
  return gaussian_pdf(x, analytic_mean(spec, t), analytic_variance(spec, t));
}

DiffusionModel from_analytic(const AnalyticSpec& spec) {
  if (spec.kind == AnalyticSpec::Kind::OrnsteinUhlenbeck && !(spec.theta > 0.0)) {
    throw ConfigurationError("ou requires theta > 0");
  }
  const double sigma = spec.kind == AnalyticSpec::Kind::Brownian ? 1.0 : spec.sigma;
  const double theta = spec.theta;

  DiffusionModel model;
  model.x0 = spec.x0;
  if (spec.kind == AnalyticSpec::Kind::Brownian) {
    model.name = "bm";
    model.coefficients.drift = [](double, double) { return 0.0; };
  } else {
    model.name = "ou";
    model.coefficients.drift = [theta](double, double x) { return -theta * x; };
  }
  model.coefficients.dispersion = [sigma](double, double) { return sigma; };

  DensityModel density;
  density.kind = DensityModel::Kind::AnalyticGaussian;
  density.density = [spec](double t, double x) { return analytic_density(spec, t, x); };
  const double sigma2 = sigma * sigma;
  density.weighted_derivative = [spec, sigma2](double t, double x) {
    const double m = analytic_mean(spec, t);
    const double v = analytic_variance(spec, t);
    return -sigma2 * (x - m) / v * gaussian_pdf(x, m, v);
  };
  density.score = [spec, sigma2](double t, double x) {
    return -sigma2 * (x - analytic_mean(spec, t)) / analytic_variance(spec, t);
  };
  density.location_scale = [spec](double t) {
    return std::pair{analytic_mean(spec, t), std::sqrt(analytic_variance(spec, t))};
  };
  model.density = std::move(density);

  // sup_x p_t = (2 pi v)^{-1/2}; the weighted derivative norm is sigma^2 / sqrt(v).
  EnvelopePair env;
  env.r = [spec](double t) { return kInvSqrt2Pi / std::sqrt(analytic_variance(spec, t)); };
  env.u = [spec, sigma2](double t) { return sigma2 / std::sqrt(analytic_variance(spec, t)); };
  model.envelopes = std::move(env);
  return model;
}

DiffusionModel brownian_motion(double x0) {
  AnalyticSpec spec;
  spec.kind = AnalyticSpec::Kind::Brownian;
  spec.x0 = x0;
  return from_analytic(spec);
}

DiffusionModel ornstein_uhlenbeck(double theta, double sigma, double x0) {
  AnalyticSpec spec;
  spec.kind = AnalyticSpec::Kind::OrnsteinUhlenbeck;
  spec.theta = theta;
  spec.sigma = sigma;
  spec.x0 = x0;
  return from_analytic(spec);
}

DiffusionModel custom_model(std::string name, CoefficientFn drift, CoefficientFn dispersion,
                            double x0) {
  DiffusionModel model;
  model.name = std::move(name);
  model.coefficients.drift = std::move(drift);
  model.coefficients.dispersion = std::move(dispersion);
  model.x0 = x0;
  return model;
}

namespace {

struct Bilinear {
  std::vector<double> t;
  std::vector<double> x;
  std::vector<std::vector<double>> values;

  static std::pair<std::size_t, double> locate(const std::vector<double>& axis, double v) {
    if (axis.size() == 1 || v <= axis.front()) return {0, 0.0};
    if (v >= axis.back()) return {axis.size() - 2, 1.0};
    const auto it = std::upper_bound(axis.begin(), axis.end(), v);
    const std::size_t i = static_cast<std::size_t>(it - axis.begin()) - 1;
    return {i, (v - axis[i]) / (axis[i + 1] - axis[i])};
  }

  double operator()(double tv, double xv) const {
    const auto [i, a] = locate(t, tv);
    const auto [j, c] = locate(x, xv);
    const std::size_t i1 = std::min(i + 1, t.size() - 1);
    const std::size_t j1 = std::min(j + 1, x.size() - 1);
    const double lo = (1 - c) * values[i][j] + c * values[i][j1];
    const double hi = (1 - c) * values[i1][j] + c * values[i1][j1];
    return (1 - a) * lo + a * hi;
  }
};

void validate_axis(const std::vector<double>& axis, const char* name) {
  if (axis.empty()) throw ConfigurationError(std::string("tabulated axis '") + name + "' is empty");
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (!std::isfinite(axis[i])) throw ConfigurationError("non-finite tabulated axis value");
    if (i > 0 && !(axis[i] > axis[i - 1])) {
      throw ConfigurationError(std::string("tabulated axis '") + name + "' must be increasing");
    }
  }
}

void validate_table(const std::vector<std::vector<double>>& table, std::size_t nt,
                    std::size_t nx, const char* name) {
  if (table.size() != nt) throw ConfigurationError(std::string(name) + ": wrong number of rows");
  for (const auto& row : table) {
    if (row.size() != nx) throw ConfigurationError(std::string(name) + ": wrong row length");
    for (double v : row) {
      if (!std::isfinite(v)) throw ConfigurationError(std::string(name) + ": non-finite entry");
    }
  }
}

}  // namespace

DiffusionModel tabulated_model(const TabulatedCoefficients& table, double x0) {
  validate_axis(table.t, "t");
  validate_axis(table.x, "x");
  validate_table(table.drift, table.t.size(), table.x.size(), "drift");
  validate_table(table.dispersion, table.t.size(), table.x.size(), "dispersion");
  auto drift = std::make_shared<Bilinear>(Bilinear{table.t, table.x, table.drift});
  auto disp = std::make_shared<Bilinear>(Bilinear{table.t, table.x, table.dispersion});
  return custom_model(
      "custom", [drift](double t, double x) { return (*drift)(t, x); },
      [disp](double t, double x) { return (*disp)(t, x); }, x0);
}

// ---------------------------------------------------------------------------

HypothesisReport check_hypotheses_H(const CoefficientPair& coeffs,
                                    std::span<const SampleTriple> grid, double ceiling) {
  if (grid.empty()) throw ConfigurationError("hypothesis grid is empty");
  HypothesisReport report;
  report.ceiling = ceiling;
  for (const SampleTriple& p : grid) {
    if (p.x == p.y) throw ConfigurationError("hypothesis triple with x == y");
    const double bx = coeffs.drift(p.t, p.x);
    const double by = coeffs.drift(p.t, p.y);
    const double sx = coeffs.dispersion(p.t, p.x);
    const double sy = coeffs.dispersion(p.t, p.y);
    const double lip = (std::abs(sx - sy) + std::abs(bx - by)) / std::abs(p.x - p.y);
    const double gx = (std::abs(sx) + std::abs(bx)) / (1.0 + std::abs(p.x));
    const double gy = (std::abs(sy) + std::abs(by)) / (1.0 + std::abs(p.y));
    report.lipschitz_ratio = std::max(report.lipschitz_ratio, lip);
    report.growth_ratio = std::max({report.growth_ratio, gx, gy});
    if (!std::isfinite(lip) || !std::isfinite(gx) || !std::isfinite(gy)) {
      report.lipschitz_ratio = std::numeric_limits<double>::infinity();
    }
  }
  report.pass = std::isfinite(report.lipschitz_ratio) && std::isfinite(report.growth_ratio) &&
                report.lipschitz_ratio <= ceiling && report.growth_ratio <= ceiling;
  return report;
}

std::vector<SampleTriple> pairwise_triples(std::span<const double> ts,
                                           std::span<const double> xs) {
  std::vector<SampleTriple> out;
  for (double t : ts) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (std::size_t j = i + 1; j < xs.size(); ++j) {
        if (xs[i] != xs[j]) out.push_back({t, xs[i], xs[j]});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

double grid_envelope_r(const DensityModel& density, double t, const EnvelopeGrid& grid) {
  double sup = 0.0;
  const double h = (grid.x_max - grid.x_min) / static_cast<double>(grid.points - 1);
  for (std::size_t i = 0; i < grid.points; ++i) {
    sup = std::max(sup, density.density(t, grid.x_min + static_cast<double>(i) * h));
  }
  return sup;
}

std::optional<double> grid_envelope_u(const DensityModel& density, double t,
                                      const EnvelopeGrid& grid) {
  const double h = (grid.x_max - grid.x_min) / static_cast<double>(grid.points - 1);
  CompensatedSum acc;
  for (std::size_t i = 0; i < grid.points; ++i) {
    const double x = grid.x_min + static_cast<double>(i) * h;
    const double p = density.density(t, x);
    if (p <= kDensityFloor) continue;
    const double d = density.weighted_derivative(t, x);
    const double w = (i == 0 || i + 1 == grid.points) ? 0.5 * h : h;
    acc += w * d * d / p;
  }
  const double value = std::sqrt(acc.value());
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<double> envelope_r(const DiffusionModel& model, double t, const EnvelopeGrid& grid) {
  if (!(t > 0.0)) throw DomainError("envelope requested at t <= 0");
  if (model.envelopes) return model.envelopes->r(t);
  if (!model.density) return std::nullopt;
  return grid_envelope_r(*model.density, t, grid);
}

std::optional<double> envelope_u(const DiffusionModel& model, double t, const EnvelopeGrid& grid) {
  if (!(t > 0.0)) throw DomainError("envelope requested at t <= 0");
  if (model.envelopes) return model.envelopes->u(t);
  if (!model.density) return std::nullopt;
  return grid_envelope_u(*model.density, t, grid);
}

IntegrabilityReport check_integrability(const EnvelopePair& envelopes, double delta) {
  const SingularIntegral integral = integrate_near_zero(
      [&](double t) { return std::sqrt(envelopes.r(t)) * envelopes.u(t); }, delta, 1.0, 400);
  IntegrabilityReport report;
  report.value = integral.value;
  report.exponent = integral.exponent;
  report.pass = integral.finite && std::isfinite(integral.value);
  return report;
}

bool check_H3(const DiffusionModel& model, std::span<const double> s_grid,
              std::span<const double> x_grid) {
  if (!model.density) return false;
  const std::size_t ns = s_grid.size();
  const std::size_t nx = x_grid.size();
  std::vector<char> zero(ns * nx, 0);
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nx; ++j) {
      const double s = s_grid[i];
      const double x = x_grid[j];
      if (!(model.density->density(s, x) > 0.0)) return false;
      zero[i * nx + j] = model.drift(s, x) == 0.0 && model.dispersion(s, x) == 0.0;
    }
  }
  // An interior sample whose four neighbours are also zeros marks a zero set
  // with positive Lebesgue measure.
  for (std::size_t i = 1; i + 1 < ns; ++i) {
    for (std::size_t j = 1; j + 1 < nx; ++j) {
      if (zero[i * nx + j] && zero[(i - 1) * nx + j] && zero[(i + 1) * nx + j] &&
          zero[i * nx + j - 1] && zero[i * nx + j + 1]) {
        return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

KernelDensity::KernelDensity(std::span<const double> samples, double bandwidth)
    : samples_(samples.begin(), samples.end()), bandwidth_(bandwidth) {
  if (samples_.size() < kMinSamples) {
    throw ConfigurationError("kernel density needs at least " + std::to_string(kMinSamples) +
                             " samples, got " + std::to_string(samples_.size()));
  }
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw DomainError("kernel bandwidth must be positive");
  }
  std::sort(samples_.begin(), samples_.end());
  const Summary s = summarize(samples_);
  mean_ = s.mean;
  sd_ = s.sd;
}

template <class Fn>
double KernelDensity::kernel_sum(double x, Fn&& fn) const {
  // Gaussian tails beyond 9 bandwidths are below double resolution.
  const double reach = 9.0 * bandwidth_;
  const auto lo = std::lower_bound(samples_.begin(), samples_.end(), x - reach);
  const auto hi = std::upper_bound(lo, samples_.end(), x + reach);
  CompensatedSum acc;
  for (auto it = lo; it != hi; ++it) {
    const double u = (x - *it) / bandwidth_;
    acc += fn(u) * std::exp(-0.5 * u * u);
  }
  return acc.value();
}

double KernelDensity::pdf(double x) const {
  const double n = static_cast<double>(samples_.size());
  return kInvSqrt2Pi / (n * bandwidth_) * kernel_sum(x, [](double) { return 1.0; });
}

double KernelDensity::derivative(double x) const {
  const double n = static_cast<double>(samples_.size());
  return -kInvSqrt2Pi / (n * bandwidth_ * bandwidth_) * kernel_sum(x, [](double u) { return u; });
}

namespace {

double weighted_kde_derivative(const KernelDensity& kde, const CoefficientFn& dispersion,
                               double t, double x) {
  if (!dispersion) return kde.derivative(x);
  const double sigma = dispersion(t, x);
  const double h = 1e-5 * std::max(1.0, std::abs(x));
  const double sp = dispersion(t, x + h);
  const double sm = dispersion(t, x - h);
  const double dsigma2 = (sp * sp - sm * sm) / (2.0 * h);
  return dsigma2 * kde.pdf(x) + sigma * sigma * kde.derivative(x);
}

}  // namespace

DensityModel kernel_density_estimate(std::span<const double> samples, double bandwidth,
                                     CoefficientFn dispersion) {
  auto kde = std::make_shared<const KernelDensity>(samples, bandwidth);
  DensityModel model;
  model.kind = DensityModel::Kind::KernelEstimated;
  model.density = [kde](double, double x) { return kde->pdf(x); };
  model.weighted_derivative = [kde, dispersion](double t, double x) {
    return weighted_kde_derivative(*kde, dispersion, t, x);
  };
  model.location_scale = [kde](double) {
    return std::pair{kde->sample_mean(),
                     std::sqrt(kde->sample_sd() * kde->sample_sd() +
                               kde->bandwidth() * kde->bandwidth())};
  };
  return model;
}

DensityModel kernel_density_field(std::vector<DensitySnapshot> snapshots, double bandwidth,
                                  CoefficientFn dispersion) {
  if (snapshots.empty()) throw ConfigurationError("kernel density field needs snapshots");
  std::sort(snapshots.begin(), snapshots.end(),
            [](const DensitySnapshot& a, const DensitySnapshot& b) { return a.t < b.t; });
  auto times = std::make_shared<std::vector<double>>();
  auto kdes = std::make_shared<std::vector<KernelDensity>>();
  for (const DensitySnapshot& s : snapshots) {
    times->push_back(s.t);
    kdes->emplace_back(s.samples, bandwidth);
  }
  auto pick = [times, kdes](double t) -> const KernelDensity& {
    const auto it = std::lower_bound(times->begin(), times->end(), t);
    std::size_t i = static_cast<std::size_t>(it - times->begin());
    if (i == times->size()) {
      i = times->size() - 1;
    } else if (i > 0 && (t - (*times)[i - 1]) <= ((*times)[i] - t)) {
      i -= 1;
    }
    return (*kdes)[i];
  };
  DensityModel model;
  model.kind = DensityModel::Kind::KernelEstimated;
  model.density = [pick](double t, double x) { return pick(t).pdf(x); };
  model.weighted_derivative = [pick, dispersion](double t, double x) {
    return weighted_kde_derivative(pick(t), dispersion, t, x);
  };
  model.location_scale = [pick](double t) {
    const KernelDensity& k = pick(t);
    return std::pair{k.sample_mean(), std::sqrt(k.sample_sd() * k.sample_sd() +
                                                k.bandwidth() * k.bandwidth())};
  };
  return model;
}

double silverman_bandwidth(std::span<const double> samples) {
  const Summary s = summarize(samples);
  const double h = 1.06 * s.sd * std::pow(static_cast<double>(samples.size()), -0.2);
  return h > 0.0 ? h : 1e-3;
}

}  // namespace ltc
