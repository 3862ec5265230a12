#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ltcalc/diffusion.hpp"
#include "ltcalc/errors.hpp"
#include "ltcalc/ito.hpp"
#include "ltcalc/localtime.hpp"
#include "ltcalc/numerics.hpp"
#include "ltcalc/simulate.hpp"

namespace {

using namespace ltc;

LocalTimeField field_for(const SamplePath& path) {
  return local_time_field(path, brownian_motion(), LocalTimeSpec{});
}

TEST(Mollifier, BumpHasUnitMassAndCompactSupport) {
  EXPECT_EQ(Mollifier::bump(1.0), 0.0);
  EXPECT_EQ(Mollifier::bump(-1.5), 0.0);
  const double mass = integrate_gl([](double u) { return Mollifier::bump(u); }, -1.0, 1.0, 256);
  EXPECT_NEAR(mass, 1.0, 1e-10);
  const Mollifier g(10);
  EXPECT_EQ(g.support(), 0.1);
  EXPECT_NEAR(integrate_gl([&](double s) { return g(s); }, -0.1, 0.1, 256), 1.0, 1e-10);
  EXPECT_THROW(Mollifier(0), DomainError);
}

TEST(Mollifier, DerivativesMatchFiniteDifferences) {
  const double h = 1e-5;
  for (double u : {-0.7, -0.2, 0.0, 0.4, 0.8}) {
    EXPECT_NEAR(Mollifier::bump_d1(u), (Mollifier::bump(u + h) - Mollifier::bump(u - h)) / (2 * h), 1e-5);
    EXPECT_NEAR(Mollifier::bump_d2(u),
                (Mollifier::bump(u + h) - 2 * Mollifier::bump(u) + Mollifier::bump(u - h)) / (h * h), 1e-3);
  }
}

TEST(Mollify, AffineFunctionIsReproduced) {
  const TestFunction Fn = mollify(linear_test(2.0, -1.0), Mollifier(20));
  for (double x : {-3.0, 0.0, 0.37, 2.5}) {
    for (double t : {0.2, 0.5, 0.9}) {
      EXPECT_NEAR(Fn.F(x, t), 2.0 * x - 1.0, 1e-10);
      EXPECT_NEAR(Fn.Fx(x, t), 2.0, 1e-10);
      EXPECT_NEAR(Fn.Ft(x, t), 0.0, 1e-10);
    }
  }
}

TEST(Mollify, AbsoluteValueBecomesSmoothAndConvex) {
  const TestFunction Fn = mollify(abs_test(), Mollifier(100));
  EXPECT_GT(Fn.F(0.0, 0.5), 0.0);
  EXPECT_NEAR(Fn.Fx(0.0, 0.5), 0.0, 1e-12);
  for (double x = -0.02; x <= 0.02; x += 0.001) {
    const double h = 1e-4;
    EXPECT_GE(Fn.F(x + h, 0.5) - 2 * Fn.F(x, 0.5) + Fn.F(x - h, 0.5), -1e-14);
    EXPECT_GE(Fn.Fxx(x, 0.5), -1e-10);
  }
  EXPECT_NEAR(Fn.F(0.5, 0.5), 0.5, 1e-10);
}

TEST(Mollify, SupDistanceShrinksAlongTheLadder) {
  const TestFunction F = abs_test();
  double prev = 1e300;
  for (int n : {10, 50, 250}) {
    const TestFunction Fn = mollify(F, Mollifier(n));
    double sup = 0.0;
    for (double x = -1.0; x <= 1.0; x += 1.0 / 512) sup = std::max(sup, std::abs(Fn.F(x, 0.5) - F.F(x, 0.5)));
    EXPECT_LT(sup, prev);
    EXPECT_LE(sup, 1.0 / n);
    prev = sup;
  }
}

TEST(TestFunctions, AbsoluteContinuity) {
  for (const TestFunction& F : {quadratic_test(), abs_test(), call_test(0.5), sine_test(), time_sine_test()}) {
    EXPECT_LT(absolute_continuity_gap(F, 1.3, -0.9, 0.4), 1e-10) << F.name;
  }
  const TestFunction tab = tabulated_test({-1.0, 0.0, 1.0}, {0.0, 1.0}, {{1.0, 2.0}, {0.0, 0.5}, {1.0, 3.0}});
  EXPECT_NEAR(tab.F(0.5, 0.5), 0.5 * 0.25 + 0.5 * 2.0, 1e-14);
  EXPECT_LT(absolute_continuity_gap(tab, 0.9, -0.7, 0.3), 1e-10);
}

TEST(Residual, LinearFunctionIsExact) {
  const ItoVerifier v(linear_test(1.0, 0.0), brownian_motion());
  for (std::uint64_t p = 0; p < 5; ++p) {
    const SamplePath path = euler_maruyama(brownian_motion(), Partition(10), 1, p);
    EXPECT_NEAR(v.residual(path, field_for(path), 1.0).residual, 0.0, 1e-12);
  }
}

TEST(Residual, QuadraticIsSmallOnAverage) {
  const ItoVerifier v(quadratic_test(), brownian_motion());
  std::vector<double> r, f;
  for (std::uint64_t p = 0; p < 500; ++p) {
    const SamplePath path = euler_maruyama(brownian_motion(), Partition(12), 2, p);
    r.push_back(v.residual(path, field_for(path), 1.0).residual);
    f.push_back(0.5 * path.values.back() * path.values.back());
  }
  EXPECT_LT(std::abs(summarize(r).mean), 0.05 * summarize(f).sd);
}

TEST(Residual, AbsoluteValueIsSmallOnAverage) {
  const ItoVerifier v(abs_test(), brownian_motion());
  std::vector<double> r, f;
  for (std::uint64_t p = 0; p < 500; ++p) {
    const SamplePath path = euler_maruyama(brownian_motion(), Partition(12), 3, p);
    r.push_back(v.residual(path, field_for(path), 1.0).residual);
    f.push_back(std::abs(path.values.back()));
  }
  EXPECT_LT(std::abs(summarize(r).mean), 0.05 * summarize(f).sd);
}

TEST(Residual, ConstantShiftInvariance) {
  const ItoVerifier a(sine_test(), brownian_motion());
  const ItoVerifier b(shifted_test(sine_test(), 3.25), brownian_motion());
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(10), 4, 0);
  const LocalTimeField f = field_for(path);
  EXPECT_NEAR(a.residual(path, f, 1.0).residual, b.residual(path, f, 1.0).residual, 1e-12);
}

TEST(Residual, AddingTimeOnlyTermIsInvariant) {
  const TestFunction base = quadratic_test();
  const TestFunction plus = with_time_part(base, [](double t) { return std::sin(3 * t); },
                                           [](double t) { return 3 * std::cos(3 * t); });
  const ItoVerifier a(base, brownian_motion());
  const ItoVerifier b(plus, brownian_motion());
  for (std::uint64_t p = 0; p < 5; ++p) {
    const SamplePath path = euler_maruyama(brownian_motion(), Partition(10), 5, p);
    const LocalTimeField f = field_for(path);
    EXPECT_NEAR(a.residual(path, f, 1.0).residual, b.residual(path, f, 1.0).residual, 1e-12);
  }
}

TEST(Residual, WindowConsistency) {
  const DiffusionModel ou = ornstein_uhlenbeck(1.0, 1.0);
  const ItoVerifier v(time_sine_test(), ou);
  for (double eps : {0.2, 0.1, 0.05}) {
    std::vector<double> r;
    for (std::uint64_t p = 0; p < 300; ++p) {
      const SamplePath path = euler_maruyama(ou, Partition(12), 6, p);
      r.push_back(v.residual(path, field_for(path), eps, 1.0).residual);
    }
    const Summary s = summarize(r);
    EXPECT_LT(std::abs(s.mean), 2 * s.stderr_ + 1e-3) << "eps=" << eps;
  }
}

TEST(Residual, WindowTermsAddUp) {
  const ItoVerifier v(time_sine_test(), brownian_motion());
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(10), 7, 0);
  const LocalTimeField f = field_for(path);
  const ItoTerms whole = v.residual(path, f, 1.0);
  const ItoTerms a = v.residual(path, f, 0.0, 0.5);
  const ItoTerms b = v.residual(path, f, 0.5, 1.0);
  EXPECT_NEAR(whole.residual, a.residual + b.residual, 1e-12);
  EXPECT_NEAR(whole.dl_integral, a.dl_integral + b.dl_integral, 1e-12);
}

TEST(Residual, FreeFunctionMatchesVerifier) {
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(10), 8, 0);
  const LocalTimeField f = field_for(path);
  EXPECT_EQ(ito_residual(call_test(0.2), brownian_motion(), path, f, 1.0),
            ItoVerifier(call_test(0.2), brownian_motion()).residual(path, f, 1.0).residual);
}

TEST(SmoothConsistency, LocalTimeTermMatchesSecondDerivative) {
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(14), 9, 0);
  const LocalTimeField f = field_for(path);
  const SmoothConsistency c = smooth_consistency_check(sine_test(), brownian_motion(), path, f, 1.0);
  EXPECT_LT(std::abs(c.gap), 0.05 * (std::abs(c.qv_term) + 0.1));
  TestFunction no_second = abs_test();
  no_second.Fxx = nullptr;
  EXPECT_THROW(smooth_consistency_check(no_second, brownian_motion(), path, f, 1.0), ConfigurationError);
}

TEST(Diagnostics, AcceptsQuadratic) {
  const ItoDiagnostics d = ito_diagnostics(quadratic_test(), [](double s) { return 1.0 / std::sqrt(s); });
  EXPECT_TRUE(d.pass);
  EXPECT_TRUE(d.failed.empty());
  EXPECT_TRUE(std::isfinite(d.fx2_integral));
}

TEST(Diagnostics, RejectsNonSquareIntegrableDerivative) {
  TestFunction F;
  F.name = "singular";
  F.half_width = 1.0;
  F.F = [](double x, double) { return std::abs(x) < 1.0 ? std::pow(std::abs(x), 0.25) : 1.0; };
  F.Fx = [](double x, double) {
    if (x == 0.0 || std::abs(x) >= 1.0) return 0.0;
    return 0.25 * std::pow(std::abs(x), -0.75) * (x > 0 ? 1.0 : -1.0);
  };
  F.Ft = [](double, double) { return 0.0; };
  const ItoDiagnostics d = ito_diagnostics(F, [](double s) { return 1.0 / std::sqrt(s); });
  EXPECT_FALSE(d.pass);
  EXPECT_FALSE(d.fx2_finite);
  EXPECT_NE(d.failed.find("dF/dx"), std::string::npos);
}

TEST(Diagnostics, VanishingEnvelopeAtOneFails) {
  const ItoDiagnostics d = ito_diagnostics(quadratic_test(), [](double s) { return 1.0 - s; });
  EXPECT_FALSE(d.r1_nonzero);
  EXPECT_FALSE(d.pass);
}

TEST(Diagnostics, RefinedMidpointDetectsDivergence) {
  EXPECT_TRUE(refined_midpoint([](double x) { return x * x; }, -1.0, 1.0, 400).finite);
  EXPECT_FALSE(refined_midpoint([](double x) { return 1.0 / std::abs(x); }, -1.0, 1.0, 400).finite);
}

TEST(Verifier, ThrowsOnViolation) {
  TestFunction F = abs_test();
  F.Fx = [](double x, double) { return x == 0.0 ? 0.0 : std::pow(std::abs(x), -0.75); };
  EXPECT_THROW(ItoVerifier(F, brownian_motion()), HypothesisViolation);
}

TEST(Convergence, SmoothFunctionGapsShrink) {
  const DiffusionModel ou = ornstein_uhlenbeck(1.0, 1.0);
  const auto paths = simulate_ensemble(ou, 8, 50, 10);
  const std::vector<int> scales{10, 50, 250};
  const MollifiedConvergence c = mollified_convergence_study(sine_test(), ou, paths, scales, 0.1, 1.0);
  ASSERT_EQ(c.rungs.size(), 3u);
  EXPECT_TRUE(c.drift_decreasing);
  EXPECT_TRUE(c.martingale_decreasing);
  EXPECT_TRUE(c.star_decreasing);
}

TEST(Convergence, CallKinkGapsShrink) {
  const DiffusionModel ou = ornstein_uhlenbeck(1.0, 1.0);
  const auto paths = simulate_ensemble(ou, 8, 50, 11);
  const std::vector<int> scales{10, 50, 250};
  const MollifiedConvergence c = mollified_convergence_study(call_test(0.0), ou, paths, scales, 0.1, 1.0);
  EXPECT_TRUE(c.drift_decreasing);
  EXPECT_TRUE(c.martingale_decreasing);
  EXPECT_TRUE(c.star_decreasing);
  EXPECT_GT(c.rungs[0].martingale_l2, c.rungs[2].martingale_l2);
}

TEST(Convergence, DriftlessModelHasNoDriftTerm) {
  const auto paths = simulate_ensemble(brownian_motion(), 8, 20, 12);
  const std::vector<int> scales{10, 50};
  const MollifiedConvergence c =
      mollified_convergence_study(call_test(0.0), brownian_motion(), paths, scales, 0.1, 1.0);
  for (const auto& r : c.rungs) EXPECT_EQ(r.drift_l1, 0.0);
}

}  // namespace
