#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ltcalc/diffusion.hpp"
#include "ltcalc/functions.hpp"
#include "ltcalc/simulate.hpp"

namespace ltc {

// Occupation: L_t^x = (1/2eps) sum_{t_{i+1} <= t} 1{|X_{t_i} - x| <= eps} sigma^2(t_i, X_{t_i}) dt.
// Crossing: occupation density of the linearly interpolated path against
// its realized quadratic variation, L_t^x = sum_{t_{i+1} <= t} |dX_i| 1{x in [min, max) of step i}.
// The crossing field makes the discrete Riemann-sum identities hold path by
// path; the occupation field follows the model clock sigma^2 dt.
enum class LocalTimeEstimator { Occupation, Crossing };

// Spatial grid x_k = k * dx (anchored at zero) over [x_min, x_max].
struct SpaceGrid {
  double x_min = -6.0;
  double x_max = 6.0;
  double dx = 0.01;
};

// Occupation bandwidths below kResolutionFactor * sqrt(mesh) are flagged.
inline constexpr double kResolutionFactor = 4.0;

// Grid spacing used for a level-n field: the largest power of two not above
// dx, refined further to 2^{-ceil(n/2) - 4} so that projection error shrinks
// with the mesh.
double field_spacing(double dx, int level);

// Field times: every 2^{n-8}-th partition time when n > 8, else all of them.
std::vector<double> decimated_tgrid(const Partition& partition);

class LocalTimeField {
 public:
  LocalTimeField() = default;
  LocalTimeField(std::vector<double> xgrid, std::vector<double> tgrid, std::vector<double> values,
                 double dx, double epsilon, LocalTimeEstimator estimator);

  const std::vector<double>& xgrid() const noexcept { return xgrid_; }
  const std::vector<double>& tgrid() const noexcept { return tgrid_; }
  std::size_t nx() const noexcept { return xgrid_.size(); }
  std::size_t nt() const noexcept { return tgrid_.size(); }
  double dx() const noexcept { return dx_; }
  double epsilon() const noexcept { return epsilon_; }
  LocalTimeEstimator estimator() const noexcept { return estimator_; }

  // Occupation bandwidth under the resolution floor (warn-and-proceed).
  bool below_resolution = false;
  // False when the path left the configured x range and mass was lost.
  bool covers_path = true;

  double at(std::size_t tj, std::size_t xi) const noexcept { return values_[tj * nx() + xi]; }

  // L at a grid time and a grid abscissa. Abscissae outside the stored grid
  // return 0 (the field vanishes there); off-grid points inside it throw
  // GridMismatchError unless `interpolate` is set.
  double value(double x, double t, bool interpolate = false) const;

  std::optional<std::size_t> t_index(double t) const;
  // Largest tgrid index with tgrid <= t.
  std::size_t t_index_at_or_below(double t) const;

  // Keeps every `stride`-th abscissa (aligned to the global grid).
  LocalTimeField subsample_x(std::size_t stride) const;

 private:
  std::vector<double> xgrid_;
  std::vector<double> tgrid_;
  std::vector<double> values_;  // [t][x]
  double dx_ = 0.0;
  double epsilon_ = 0.0;
  LocalTimeEstimator estimator_ = LocalTimeEstimator::Crossing;
};

// Occupation-density estimate. Throws DomainError for eps <= 0.
LocalTimeField estimate_local_time(const SamplePath& path, const DiffusionModel& model,
                                   const SpaceGrid& grid, std::span<const double> tgrid,
                                   double epsilon);

// Crossing estimate (no bandwidth).
LocalTimeField crossing_local_time(const SamplePath& path, const SpaceGrid& grid,
                                   std::span<const double> tgrid);

struct LocalTimeSpec {
  LocalTimeEstimator estimator = LocalTimeEstimator::Crossing;
  SpaceGrid grid;
  double epsilon = 0.05;
};

// Field on the decimated tgrid with the level-adjusted spacing.
LocalTimeField local_time_field(const SamplePath& path, const DiffusionModel& model,
                                const LocalTimeSpec& spec);

void write_field_csv(const LocalTimeField& field, std::ostream& out);

// ---------------------------------------------------------------------------

// sum f_ij (L_{s_{j+1}}^{x_{i+1}} - L_{s_j}^{x_{i+1}} - L_{s_{j+1}}^{x_i} + L_{s_j}^{x_i}).
double elementary_integral(const ElementaryFunction& f, const LocalTimeField& field,
                           bool interpolate = false);

// int_{t0}^{t1} int f(x, s) dL_s^x: f is projected onto the field cells by
// cell averaging and the elementary integral is applied. Window ends snap
// down to the field tgrid.
double timespace_integral(const TimeSpaceFunction& f, const LocalTimeField& field, double t0,
                          double t1);
double timespace_integral(const TimeSpaceFunction& f, const LocalTimeField& field, double t);

// The projection on successively refined x grids (strides 2^{levels-1} .. 1).
struct RefinementStudy {
  std::vector<double> values;  // coarse to fine
  std::vector<double> gaps;    // |v_{k+1} - v_k|
  double value = 0.0;          // finest
};
RefinementStudy timespace_refinement(const TimeSpaceFunction& f, const LocalTimeField& field,
                                     double t, std::size_t levels = 3);

// int_0^1 int f(x, s) 1_{(eps, t)}(s) dL_s^x.
double epsilon_truncated_integral(const TimeSpaceFunction& f, const LocalTimeField& field,
                                  double epsilon, double t);
std::vector<double> epsilon_ladder(const TimeSpaceFunction& f, const LocalTimeField& field,
                                   double t, std::span<const double> epsilons);

// ---------------------------------------------------------------------------

struct NormQuadrature {
  std::size_t x_points = 400;
  std::size_t s_points = 200;
  double delta = 1e-4;
  double window_sds = 10.0;  // x window around the density when unbounded
};

struct SeminormResult {
  double value = 0.0;
  double drift_term = 0.0;       // 2 int int |f b| p
  double martingale_term = 0.0;  // 2 (int int f^2 sigma^2 p)^{1/2}
  double density_term = 0.0;     // int int |f d/dx(sigma^2 p)|
  bool finite = true;
};

SeminormResult seminorm_star(const TimeSpaceFunction& f, const DiffusionModel& model,
                             const NormQuadrature& q = {});

// L2(R x [0, 1]) norm; infinite when the support is unbounded in x and f
// does not vanish there.
double l2_norm(const TimeSpaceFunction& f, const NormQuadrature& q = {});

struct NormResult {
  double star = 0.0;
  double l2 = 0.0;
  double value = 0.0;  // star + l2
  bool finite = true;
};

NormResult norm_H(const TimeSpaceFunction& f, const DiffusionModel& model,
                  const NormQuadrature& q = {});

// Computes and caches the membership diagnostics on f.
void attach_membership(TimeSpaceFunction& f, const DiffusionModel& model,
                       const NormQuadrature& q = {});

}  // namespace ltc
