#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "ltcalc/diffusion.hpp"
#include "ltcalc/errors.hpp"
#include "ltcalc/functions.hpp"
#include "ltcalc/integrals.hpp"
#include "ltcalc/localtime.hpp"
#include "ltcalc/numerics.hpp"
#include "ltcalc/simulate.hpp"

namespace {

using namespace ltc;

LocalTimeField crossing_field(const SamplePath& path) {
  return local_time_field(path, brownian_motion(), LocalTimeSpec{});
}

double realized_qv(const SamplePath& path) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double d = path.values[i + 1] - path.values[i];
    acc += d * d;
  }
  return acc;
}

TEST(Spacing, PowerOfTwoAndTiedToMesh) {
  EXPECT_EQ(field_spacing(0.01, 4), 0.0078125);
  EXPECT_EQ(field_spacing(1.0, 12), std::ldexp(1.0, -10));
  EXPECT_EQ(field_spacing(1.0, 13), std::ldexp(1.0, -11));
  EXPECT_THROW(field_spacing(0.0, 4), ConfigurationError);
}

TEST(Spacing, DecimatedTgrid) {
  EXPECT_EQ(decimated_tgrid(Partition(3)).size(), 9u);
  const auto tg = decimated_tgrid(Partition(12));
  ASSERT_EQ(tg.size(), 257u);
  EXPECT_EQ(tg[1], 1.0 / 256);
  EXPECT_EQ(tg.back(), 1.0);
}

TEST(Field, StructuralInvariants) {
  for (std::uint64_t p = 0; p < 5; ++p) {
    const SamplePath path = euler_maruyama(brownian_motion(), Partition(10), 3, p);
    for (LocalTimeEstimator est : {LocalTimeEstimator::Crossing, LocalTimeEstimator::Occupation}) {
      LocalTimeSpec spec;
      spec.estimator = est;
      const LocalTimeField f = local_time_field(path, brownian_motion(), spec);
      EXPECT_EQ(f.tgrid().front(), 0.0);
      for (std::size_t i = 0; i < f.nx(); ++i) EXPECT_EQ(f.at(0, i), 0.0);
      for (std::size_t j = 1; j < f.nt(); ++j) {
        for (std::size_t i = 0; i < f.nx(); ++i) {
          EXPECT_GE(f.at(j, i), f.at(j - 1, i));
          EXPECT_GE(f.at(j, i), 0.0);
        }
      }
      const auto [lo, hi] = std::minmax_element(path.values.begin(), path.values.end());
      const double reach = est == LocalTimeEstimator::Occupation ? spec.epsilon : 0.0;
      for (std::size_t i = 0; i < f.nx(); ++i) {
        const double x = f.xgrid()[i];
        if (x < *lo - reach - f.dx() || x > *hi + reach + f.dx()) EXPECT_EQ(f.at(f.nt() - 1, i), 0.0);
      }
      EXPECT_TRUE(f.covers_path);
    }
  }
}

TEST(Field, CrossingIntegratesToRealizedVariation) {
  for (std::uint64_t p = 0; p < 5; ++p) {
    const SamplePath path = euler_maruyama(ornstein_uhlenbeck(1.0, 1.3), Partition(12), 4, p);
    const LocalTimeField f = crossing_field(path);
    double mass = 0.0;
    for (std::size_t i = 0; i < f.nx(); ++i) mass += f.at(f.nt() - 1, i) * f.dx();
    EXPECT_NEAR(mass, realized_qv(path), 0.02 * realized_qv(path));
  }
}

TEST(Field, OccupationIntegratesToModelClock) {
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(12), 4, 0);
  LocalTimeSpec spec;
  spec.estimator = LocalTimeEstimator::Occupation;
  spec.epsilon = 0.3;
  const LocalTimeField f = local_time_field(path, brownian_motion(), spec);
  double mass = 0.0;
  for (std::size_t i = 0; i < f.nx(); ++i) mass += f.at(f.nt() - 1, i) * f.dx();
  EXPECT_NEAR(mass, 1.0, 0.02);
  EXPECT_FALSE(f.below_resolution);
}

TEST(Field, OccupationRejectsNonPositiveBandwidth) {
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(6), 4, 0);
  const auto tg = decimated_tgrid(path.partition);
  EXPECT_THROW(estimate_local_time(path, brownian_motion(), SpaceGrid{}, tg, 0.0), DomainError);
}

TEST(Field, FlagsBandwidthBelowResolution) {
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(6), 4, 0);
  LocalTimeSpec spec;
  spec.estimator = LocalTimeEstimator::Occupation;
  spec.epsilon = 0.05;  // 4 sqrt(2^-6) = 0.5
  EXPECT_TRUE(local_time_field(path, brownian_motion(), spec).below_resolution);
}

TEST(Field, LookupRules) {
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(8), 5, 0);
  const LocalTimeField f = crossing_field(path);
  EXPECT_EQ(f.value(100.0, 1.0), 0.0);
  EXPECT_THROW(f.value(f.xgrid()[1] + 0.3 * f.dx(), 1.0), GridMismatchError);
  EXPECT_THROW(f.value(0.0, 0.5 + 1e-3), GridMismatchError);
  const double x = f.xgrid()[f.nx() / 2];
  const double mid = f.value(x + 0.5 * f.dx(), 1.0, true);
  EXPECT_NEAR(mid, 0.5 * (f.value(x, 1.0) + f.value(x + f.dx(), 1.0)), 1e-14);
}

TEST(Field, LostMassIsFlagged) {
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(8), 5, 0);
  LocalTimeSpec spec;
  spec.grid = SpaceGrid{-0.05, 0.05, 0.01};
  EXPECT_FALSE(local_time_field(path, brownian_motion(), spec).covers_path);
}

TEST(Field, CsvLayout) {
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(3), 5, 0);
  const LocalTimeField f = crossing_field(path);
  std::ostringstream out;
  write_field_csv(f, out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,x,L");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, f.nx() * f.nt());
}

TEST(Elementary, BoxesAndOutOfRange) {
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(10), 6, 0);
  const LocalTimeField f = crossing_field(path);
  // A box containing the whole path range: L vanishes at both x edges.
  ElementaryFunction box{{-8.0, 8.0}, {0.0, 1.0}, {{1.0}}};
  EXPECT_EQ(elementary_integral(box, f), 0.0);
  ElementaryFunction far{{7.0, 7.5}, {0.0, 0.5, 1.0}, {{2.0, -1.0}}};
  EXPECT_EQ(elementary_integral(far, f), 0.0);
  ElementaryFunction bad{{1.0, 0.0}, {0.0, 1.0}, {{1.0}}};
  EXPECT_THROW(elementary_integral(bad, f), ConfigurationError);
}

TEST(Elementary, SingleCellIsDoubleDifference) {
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(10), 6, 1);
  const LocalTimeField f = crossing_field(path);
  const double a = 0.0, b = 0.25, s0 = 0.25, s1 = 0.75;
  ElementaryFunction cell{{a, b}, {s0, s1}, {{1.5}}};
  const double expected = 1.5 * (f.value(b, s1) - f.value(b, s0) - f.value(a, s1) + f.value(a, s0));
  EXPECT_DOUBLE_EQ(elementary_integral(cell, f), expected);
}

TEST(Integral, ElementaryAgreesWithProjection) {
  const SamplePath path = euler_maruyama(ornstein_uhlenbeck(1.0, 1.0), Partition(10), 7, 0);
  const LocalTimeField f = crossing_field(path);
  ElementaryFunction e{{-1.0, -0.5, 0.0, 0.75, 1.5}, {0.0, 0.5, 1.0},
                       {{1.0, -2.0}, {0.5, 3.0}, {-1.0, 0.25}, {2.0, 1.0}}};
  EXPECT_NEAR(timespace_integral(e.as_function(), f, 1.0), elementary_integral(e, f), 1e-10);
}

TEST(Integral, IdentityGivesMinusQuadraticVariation) {
  std::vector<double> v;
  const TimeSpaceFunction x = identity_function();
  for (std::uint64_t p = 0; p < 1000; ++p) {
    const SamplePath path = euler_maruyama(brownian_motion(), Partition(10), 8, p);
    v.push_back(timespace_integral(x, crossing_field(path), 1.0));
  }
  EXPECT_NEAR(summarize(v).mean, -1.0, 0.05);
}

TEST(Integral, IdentityMatchesCovariationPathwise) {
  const TimeSpaceFunction x = identity_function();
  for (std::uint64_t p = 0; p < 10; ++p) {
    const SamplePath path = euler_maruyama(ornstein_uhlenbeck(2.0, 0.8), Partition(12), 9, p);
    const double qv = quadratic_covariation(x, path, 1.0).value;
    EXPECT_NEAR(timespace_integral(x, crossing_field(path), 1.0), -qv, 0.01 * qv);
  }
}

TEST(Integral, SignGivesMinusTwiceLocalTimeAtZero) {
  const TimeSpaceFunction sgn = sign_function();
  std::vector<double> v;
  for (std::uint64_t p = 0; p < 2000; ++p) {
    const SamplePath path = euler_maruyama(brownian_motion(), Partition(12), 10, p);
    const LocalTimeField f = crossing_field(path);
    const double i = timespace_integral(sgn, f, 1.0);
    if (p < 20) EXPECT_NEAR(i, -2.0 * f.value(0.0, 1.0), 1e-9);
    v.push_back(i);
  }
  const double target = -2.0 * std::sqrt(2.0 / std::numbers::pi);
  EXPECT_NEAR(summarize(v).mean, target, 0.05 * std::abs(target));
}

TEST(Integral, Linearity) {
  const SamplePath path = euler_maruyama(ornstein_uhlenbeck(1.0, 1.0), Partition(10), 11, 0);
  const LocalTimeField f = crossing_field(path);
  const TimeSpaceFunction g = sine_function();
  const TimeSpaceFunction h = make_function("h", [](double x, double s) { return x * s; });
  const double lhs = timespace_integral(linear_combination(2.0, g, -0.5, h), f, 1.0);
  const double rhs = 2.0 * timespace_integral(g, f, 1.0) - 0.5 * timespace_integral(h, f, 1.0);
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Integral, WindowsAreAdditive) {
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(10), 12, 0);
  const LocalTimeField f = crossing_field(path);
  const TimeSpaceFunction g = make_function("g", [](double x, double s) { return std::cos(x) + s; });
  const double whole = timespace_integral(g, f, 1.0);
  EXPECT_NEAR(whole, timespace_integral(g, f, 0.0, 0.5) + timespace_integral(g, f, 0.5, 1.0), 1e-12);
  EXPECT_NEAR(timespace_integral(time_window(g, 0.25, 0.75), f, 1.0),
              timespace_integral(g, f, 0.25, 0.75), 1e-12);
}

TEST(Integral, TimeIndependentIntegrandDependsOnlyOnTerminalField) {
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(10), 13, 0);
  const LocalTimeField f = crossing_field(path);
  const TimeSpaceFunction g = make_function("g", [](double x, double) { return std::tanh(x); }, {}, false);
  double direct = 0.0;
  for (std::size_t i = 0; i + 1 < f.nx(); ++i) {
    const double h = f.xgrid()[i + 1] - f.xgrid()[i];
    const double avg = 0.5 * (std::tanh(f.xgrid()[i] + (0.5 - 0.5 / std::sqrt(3.0)) * h) +
                              std::tanh(f.xgrid()[i] + (0.5 + 0.5 / std::sqrt(3.0)) * h));
    direct += avg * (f.at(f.nt() - 1, i + 1) - f.at(f.nt() - 1, i));
  }
  EXPECT_NEAR(timespace_integral(g, f, 1.0), direct, 1e-12);
}

TEST(Integral, InfiniteNormIsRejected) {
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(6), 13, 0);
  TimeSpaceFunction g = identity_function();
  g.star_norm = std::numeric_limits<double>::infinity();
  EXPECT_THROW(timespace_integral(g, crossing_field(path), 1.0), MembershipError);
}

TEST(Integral, RefinementStudyConverges) {
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(12), 14, 0);
  const RefinementStudy r = timespace_refinement(sine_function(), crossing_field(path), 1.0);
  ASSERT_EQ(r.values.size(), 3u);
  ASSERT_EQ(r.gaps.size(), 2u);
  EXPECT_LT(r.gaps[1], 0.01 * std::abs(r.value));
}

TEST(Truncation, LadderApproachesFullIntegral) {
  const SamplePath path = euler_maruyama(brownian_motion(), Partition(10), 15, 0);
  const LocalTimeField f = crossing_field(path);
  const TimeSpaceFunction g = identity_function();
  const std::vector<double> eps{0.5, 0.25, 0.125, 0.0};
  const auto ladder = epsilon_ladder(g, f, 1.0, eps);
  EXPECT_NEAR(ladder.back(), timespace_integral(g, f, 1.0), 1e-14);
  for (std::size_t k = 0; k < eps.size(); ++k) {
    EXPECT_NEAR(ladder[k], timespace_integral(g, f, eps[k], 1.0), 1e-14);
  }
  EXPECT_EQ(epsilon_truncated_integral(g, f, 1.0, 1.0), 0.0);
  EXPECT_THROW(epsilon_truncated_integral(g, f, -0.1, 1.0), DomainError);
}

TEST(Norms, SeminormOfOneOnBrownianMotion) {
  const SeminormResult r = seminorm_star(constant_function(1.0), brownian_motion());
  EXPECT_NEAR(r.drift_term, 0.0, 1e-12);
  EXPECT_NEAR(r.martingale_term, 2.0, 1e-3);
  EXPECT_NEAR(r.density_term, 2.0 * std::sqrt(2.0 / std::numbers::pi), 2e-3);
  EXPECT_NEAR(r.value, 2.0 + 2.0 * std::sqrt(2.0 / std::numbers::pi), 3e-3);
}

TEST(Norms, BoxL2) {
  const TimeSpaceFunction unit = restrict_box(constant_function(1.0), SupportBox{0.0, 1.0, 0.0, 1.0});
  EXPECT_NEAR(l2_norm(unit), 1.0, 1e-9);
  const TimeSpaceFunction wide = restrict_box(constant_function(1.0), SupportBox{-3.0, 3.0, 0.0, 1.0});
  EXPECT_NEAR(l2_norm(wide), std::sqrt(6.0), 1e-9);
  EXPECT_TRUE(std::isinf(l2_norm(constant_function(1.0))));
}

TEST(Norms, NormHSumsParts) {
  const TimeSpaceFunction box = restrict_box(constant_function(1.0), SupportBox{-1.0, 1.0, 0.0, 1.0});
  const NormResult n = norm_H(box, brownian_motion());
  EXPECT_TRUE(n.finite);
  EXPECT_NEAR(n.value, n.star + n.l2, 1e-14);
  EXPECT_NEAR(n.l2, std::sqrt(2.0), 1e-9);
}

TEST(Norms, SeminormNeedsDensity) {
  const DiffusionModel m = custom_model("m", [](double, double) { return 0.0; },
                                       [](double, double) { return 1.0; }, 0.0);
  EXPECT_THROW(seminorm_star(constant_function(1.0), m), ConfigurationError);
}

TEST(Norms, IntegralBoundedByNormOnAverage) {
  const TimeSpaceFunction sgn = sign_function();
  const double bound = seminorm_star(sgn, brownian_motion()).value;
  std::vector<double> v;
  for (std::uint64_t p = 0; p < 500; ++p) {
    const SamplePath path = euler_maruyama(brownian_motion(), Partition(10), 16, p);
    v.push_back(std::abs(timespace_integral(sgn, crossing_field(path), 1.0)));
  }
  const Summary s = summarize(v);
  EXPECT_LE(s.mean, bound + 3 * s.stderr_);
}

TEST(Norms, AttachMembershipCaches) {
  TimeSpaceFunction g = sine_function();
  attach_membership(g, brownian_motion());
  ASSERT_TRUE(g.star_norm.has_value());
  EXPECT_TRUE(std::isfinite(*g.star_norm));
  EXPECT_TRUE(std::isinf(*g.l2_norm));
}

}  // namespace
