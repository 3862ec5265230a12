#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ltc {

// Coefficient fields are evaluated as g(t, x).
using CoefficientFn = std::function<double(double t, double x)>;

struct CoefficientPair {
  CoefficientFn drift;       // b(t, x)
  CoefficientFn dispersion;  // sigma(t, x)
};

// Marginal law of X_t for t in (0, 1]. `weighted_derivative` realizes the
// distributional derivative d/dx (sigma^2(t, x) p_t(x)) as an a.e. function.
struct DensityModel {
  enum class Kind { AnalyticGaussian, KernelEstimated };

  Kind kind = Kind::AnalyticGaussian;
  std::function<double(double t, double x)> density;
  std::function<double(double t, double x)> weighted_derivative;
  // (1/p) d/dx (sigma^2 p) in closed form when available; empty otherwise.
  std::function<double(double t, double x)> score;
  // Center and spread of p_t, used to place quadrature windows.
  std::function<std::pair<double, double>(double t)> location_scale;
};

// r(t) bounds sup_x p_t, u(t) bounds the weighted L2 norm of the derivative.
struct EnvelopePair {
  std::function<double(double t)> r;
  std::function<double(double t)> u;
};

struct DiffusionModel {
  std::string name;
  CoefficientPair coefficients;
  double x0 = 0.0;
  std::optional<DensityModel> density;
  std::optional<EnvelopePair> envelopes;

  double drift(double t, double x) const { return coefficients.drift(t, x); }
  double dispersion(double t, double x) const { return coefficients.dispersion(t, x); }
};

// Closed-form Gaussian marginals for the shipped models.
struct AnalyticSpec {
  enum class Kind { Brownian, OrnsteinUhlenbeck };
  Kind kind = Kind::Brownian;
  double theta = 1.0;
  double sigma = 1.0;
  double x0 = 0.0;
};

double analytic_mean(const AnalyticSpec& spec, double t);
double analytic_variance(const AnalyticSpec& spec, double t);
// Transition density of the model started at x0. Throws DomainError for t <= 0.
double analytic_density(const AnalyticSpec& spec, double t, double x);

DiffusionModel brownian_motion(double x0 = 0.0);
DiffusionModel ornstein_uhlenbeck(double theta, double sigma, double x0 = 0.0);
DiffusionModel from_analytic(const AnalyticSpec& spec);

// Coefficients tabulated on a rectangular (t, x) grid, bilinearly
// interpolated and held constant beyond the grid edges.
struct TabulatedCoefficients {
  std::vector<double> t;
  std::vector<double> x;
  std::vector<std::vector<double>> drift;       // [t index][x index]
  std::vector<std::vector<double>> dispersion;  // [t index][x index]

  bool operator==(const TabulatedCoefficients&) const = default;
};

DiffusionModel tabulated_model(const TabulatedCoefficients& table, double x0);
DiffusionModel custom_model(std::string name, CoefficientFn drift, CoefficientFn dispersion,
                            double x0);

// ---------------------------------------------------------------------------
// Hypothesis (H): Lipschitz and linear-growth ratios on sampled triples.

struct SampleTriple {
  double t;
  double x;
  double y;
};

struct HypothesisReport {
  double lipschitz_ratio = 0.0;  // max (|dsigma| + |db|) / |x - y|
  double growth_ratio = 0.0;     // max (|sigma| + |b|) / (1 + |x|)
  double ceiling = 0.0;
  bool pass = false;
};

HypothesisReport check_hypotheses_H(const CoefficientPair& coeffs,
                                    std::span<const SampleTriple> grid, double ceiling);

// All (t, x_i, x_j) with i < j over the given lists.
std::vector<SampleTriple> pairwise_triples(std::span<const double> ts,
                                           std::span<const double> xs);

// ---------------------------------------------------------------------------
// Envelopes.

struct EnvelopeGrid {
  double x_min = -10.0;
  double x_max = 10.0;
  std::size_t points = 4001;
};

// Density values below this are treated as zero under the 1/p = 0 convention.
inline constexpr double kDensityFloor = 1e-12;

// Exact envelope for analytic models, grid estimate otherwise. nullopt means
// the envelope is unavailable (no density or a divergent quadrature).
std::optional<double> envelope_r(const DiffusionModel& model, double t,
                                 const EnvelopeGrid& grid = {});
std::optional<double> envelope_u(const DiffusionModel& model, double t,
                                 const EnvelopeGrid& grid = {});

// Grid estimates regardless of model kind.
double grid_envelope_r(const DensityModel& density, double t, const EnvelopeGrid& grid);
std::optional<double> grid_envelope_u(const DensityModel& density, double t,
                                      const EnvelopeGrid& grid);

struct IntegrabilityReport {
  double value = 0.0;     // integral of r^{1/2} u over (0, 1]
  double exponent = 0.0;  // fitted small-t exponent of the integrand
  bool pass = false;
};

IntegrabilityReport check_integrability(const EnvelopePair& envelopes, double delta = 1e-4);

// (H3): density positive at every sampled point and the sampled zero set of
// (sigma, b) without interior.
bool check_H3(const DiffusionModel& model, std::span<const double> s_grid,
              std::span<const double> x_grid);

// ---------------------------------------------------------------------------
// Gaussian kernel density estimate of one marginal.

class KernelDensity {
 public:
  static constexpr std::size_t kMinSamples = 1000;

  KernelDensity(std::span<const double> samples, double bandwidth);

  double pdf(double x) const;
  double derivative(double x) const;
  double bandwidth() const noexcept { return bandwidth_; }
  double sample_mean() const noexcept { return mean_; }
  double sample_sd() const noexcept { return sd_; }
  std::size_t size() const noexcept { return samples_.size(); }

 private:
  template <class Fn>
  double kernel_sum(double x, Fn&& fn) const;

  std::vector<double> samples_;  // sorted
  double bandwidth_;
  double mean_ = 0.0;
  double sd_ = 0.0;
};

// DensityModel backed by a single KDE snapshot; `dispersion` enters the
// weighted derivative.
DensityModel kernel_density_estimate(std::span<const double> samples, double bandwidth,
                                     CoefficientFn dispersion = nullptr);

// Time-indexed KDE: each t is served by the snapshot with the nearest time.
struct DensitySnapshot {
  double t;
  std::vector<double> samples;
};

DensityModel kernel_density_field(std::vector<DensitySnapshot> snapshots, double bandwidth,
                                  CoefficientFn dispersion);

// Silverman's rule-of-thumb bandwidth.
double silverman_bandwidth(std::span<const double> samples);

}  // namespace ltc
