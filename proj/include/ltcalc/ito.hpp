#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ltcalc/diffusion.hpp"
#include "ltcalc/functions.hpp"
#include "ltcalc/localtime.hpp"
#include "ltcalc/simulate.hpp"

namespace ltc {

// F(x, t) with a.e. first derivatives, localized to [-A, A] x [0, 1].
struct TestFunction {
  std::string name;
  SpaceTimeFn F;
  SpaceTimeFn Fx;
  SpaceTimeFn Ft;
  SpaceTimeFn Fxx;  // may be empty
  double half_width = 8.0;
  bool time_dependent = false;

  // Fx as an integrand against the local time, supported on the box.
  TimeSpaceFunction derivative_x() const;
};

TestFunction linear_test(double slope = 1.0, double intercept = 0.0);
TestFunction quadratic_test();          // x^2 / 2
TestFunction abs_test();                // |x|
TestFunction call_test(double strike);  // (x - K)^+
TestFunction sine_test();               // sin(x)
TestFunction time_sine_test();          // t sin(x)

// Bilinear table F(x_i, t_j); Fx and Ft are the a.e. derivatives of the
// interpolant.
TestFunction tabulated_test(std::vector<double> xs, std::vector<double> ts,
                            std::vector<std::vector<double>> values);  // [x][t]

TestFunction shifted_test(const TestFunction& F, double constant);

// |F(x, t) - F(y, t) - int_y^x Fx(u, t) du| by Gauss-Legendre quadrature.
double absolute_continuity_gap(const TestFunction& F, double x, double y, double t);
// F(x, t) + H(t).
TestFunction with_time_part(const TestFunction& F, std::function<double(double)> H,
                            std::function<double(double)> dH);

// ---------------------------------------------------------------------------

// g(u) = c exp(-1 / (1 - u^2)) on (-1, 1), normalized to unit mass;
// g_n(s) = n g(n s).
class Mollifier {
 public:
  explicit Mollifier(int scale);

  int scale() const noexcept { return scale_; }
  double support() const noexcept { return 1.0 / scale_; }

  static double bump(double u);
  static double bump_d1(double u);
  static double bump_d2(double u);
  static double normalization();

  double operator()(double s) const { return scale_ * bump(scale_ * s); }

 private:
  int scale_;
};

struct MollifyQuadrature {
  std::size_t panels = 16;
  std::size_t order = 8;
};

// F_n(x, t) = int int F(y, clamp(s)) g_n(t - s) g_n(x - y) dy ds with F
// extended by zero outside |y| <= A. Derivatives convolve F with kernel
// derivatives.
TestFunction mollify(const TestFunction& F, const Mollifier& g, MollifyQuadrature q = {});

// ---------------------------------------------------------------------------

struct ItoDiagnostics {
  double ft_integral = 0.0;   // int int |Ft| dx r(s) ds over the box
  double fx2_integral = 0.0;  // int int Fx^2 dx r(s) ds over the box
  bool ft_finite = true;
  bool fx2_finite = true;
  bool r1_nonzero = true;
  bool pass = true;
  std::string failed;  // name of the failing condition, empty on pass
};

struct DiagnosticQuadrature {
  std::size_t x_points = 400;
  std::size_t s_points = 200;
  double delta = 1e-4;
};

ItoDiagnostics ito_diagnostics(const TestFunction& F, const std::function<double(double)>& r,
                               const DiagnosticQuadrature& q = {});

// Integral over [-A, A] by midpoints with a three-level refinement check;
// finite == false when the refinements grow without settling.
struct RefinedIntegral {
  double value = 0.0;
  bool finite = true;
};
RefinedIntegral refined_midpoint(const std::function<double(double)>& fn, double a, double b,
                                 std::size_t points);

struct ItoTerms {
  double endpoint = 0.0;     // F(X_t, t) - F(X_{t0}, t0)
  double dx_integral = 0.0;  // forward sum of Fx dX
  double dt_integral = 0.0;  // sum F(X_i, t_{i+1}) - F(X_i, t_i)
  double dl_integral = 0.0;  // int int Fx 1_(t0, t] dL
  double residual = 0.0;     // endpoint - dx - dt + dl / 2
};

// Checks the integrability conditions once and evaluates residuals of the
// extended Ito formula path by path.
class ItoVerifier {
 public:
  // Throws HypothesisViolation naming the failed integral.
  ItoVerifier(TestFunction F, const DiffusionModel& model, const DiagnosticQuadrature& q = {});

  const ItoDiagnostics& diagnostics() const noexcept { return diagnostics_; }
  const TestFunction& function() const noexcept { return F_; }

  // Residual on [0, t]; t snaps down to the field tgrid.
  ItoTerms residual(const SamplePath& path, const LocalTimeField& field, double t) const;
  // Residual on [t0, t] with the dL term restricted to (t0, t].
  ItoTerms residual(const SamplePath& path, const LocalTimeField& field, double t0,
                    double t) const;

 private:
  TestFunction F_;
  TimeSpaceFunction fx_;
  ItoDiagnostics diagnostics_;
};

double ito_residual(const TestFunction& F, const DiffusionModel& model, const SamplePath& path,
                    const LocalTimeField& field, double t);

struct SmoothConsistency {
  double dl_term = 0.0;  // int int Fx dL
  double qv_term = 0.0;  // -int Fxx(X_s, s) sigma^2(s, X_s) ds
  double gap = 0.0;      // dl_term - qv_term
};

SmoothConsistency smooth_consistency_check(const TestFunction& F, const DiffusionModel& model,
                                           const SamplePath& path, const LocalTimeField& field,
                                           double t);

struct MollifiedGap {
  int scale = 0;
  double drift_l1 = 0.0;    // E int_eps^t |Fx_n - Fx| |b| ds
  double martingale_l2 = 0.0;  // (E int_eps^t (Fx_n - Fx)^2 sigma^2 ds)^{1/2}
  double star = 0.0;        // ||(Fx_n - Fx) 1_(eps, t)||_* along the paths
};

struct MollifiedConvergence {
  std::vector<MollifiedGap> rungs;
  bool drift_decreasing = true;
  bool martingale_decreasing = true;
  bool star_decreasing = true;
};

// Expectations are ensemble averages over the supplied paths; the density
// term of the seminorm uses the model's (1/p) d/dx(sigma^2 p).
MollifiedConvergence mollified_convergence_study(const TestFunction& F,
                                                 const DiffusionModel& model,
                                                 std::span<const SamplePath> paths,
                                                 std::span<const int> scales, double epsilon,
                                                 double t, MollifyQuadrature q = {});

}  // namespace ltc
