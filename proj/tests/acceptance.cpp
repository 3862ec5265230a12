// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ltcalc/diffusion.hpp"
#include "ltcalc/experiment.hpp"
#include "ltcalc/functions.hpp"
#include "ltcalc/integrals.hpp"
#include "ltcalc/ito.hpp"
#include "ltcalc/localtime.hpp"
#include "ltcalc/numerics.hpp"
#include "ltcalc/reversal.hpp"
#include "ltcalc/simulate.hpp"

namespace {

using namespace ltc;

// Tolerances.
constexpr double kTelescopeTol = 1e-12;
constexpr double kCovariationRel = 0.03;
constexpr double kIdentityFraction = 0.05;
constexpr double kNormStderrs = 3.0;
constexpr double kTanakaFraction = 0.05;
constexpr double kSmoothFraction = 0.05;
constexpr double kEnvelopeTol = 1e-6;
constexpr double kEnvelopeIntegralTol = 0.01;
constexpr double kEnvelopeIntegralTarget = 2.5266;
constexpr double kKsThreshold = 0.05;
constexpr double kReversedDriftTol = 1e-10;
constexpr double kLocalTimeRel = 0.05;
constexpr double kOccupationMedianRel = 0.05;

constexpr std::uint64_t kSeed = 42;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

LocalTimeField field_of(const SamplePath& path, const DiffusionModel& model,
                        LocalTimeEstimator est = LocalTimeEstimator::Crossing) {
  LocalTimeSpec spec;
  spec.estimator = est;
  spec.epsilon = 0.05;
  return local_time_field(path, model, spec);
}

// Random step function with breakpoints on the field lattice.
ElementaryFunction random_elementary(std::mt19937_64& rng, std::size_t cells) {
  std::uniform_int_distribution<int> xi(-128, 128);  // multiples of 1/64 in [-2, 2]
  std::uniform_int_distribution<int> si(1, 255);     // multiples of 1/256 in (0, 1)
  std::uniform_real_distribution<double> c(-1.0, 1.0);
  auto distinct = [&](auto& dist, std::size_t k) {
    std::vector<int> v;
    while (v.size() < k) {
      const int d = dist(rng);
      if (std::find(v.begin(), v.end(), d) == v.end()) v.push_back(d);
    }
    std::sort(v.begin(), v.end());
    return v;
  };
  ElementaryFunction f;
  for (int k : distinct(xi, cells + 1)) f.x.push_back(k / 64.0);
  f.s.push_back(0.0);
  for (int k : distinct(si, cells - 1)) f.s.push_back(k / 256.0);
  f.s.push_back(1.0);
  f.coef.assign(cells, std::vector<double>(cells));
  for (auto& row : f.coef)
    for (double& v : row) v = c(rng);
  return f;
}

Outcome telescoping() {
  const DiffusionModel bm = brownian_motion();
  const TimeSpaceFunction one = constant_function(1.0);
  double worst = 0.0;
  for (std::uint64_t p = 0; p < 100; ++p) {
    const SamplePath path = euler_maruyama(bm, Partition(12), kSeed, p);
    for (double t : {0.5, 1.0}) {
      const double target = path.values[path.partition.index_at_or_below(t)] - path.values[0];
      worst = std::max(worst, std::abs(forward_riemann_sum(one, path, t).value - target));
      worst = std::max(worst, std::abs(backward_riemann_sum(one, path, t).value - target));
    }
  }
  return {worst <= kTelescopeTol, "max |sum - (X_t - X_0)| = " + fmt("%.3g", worst)};
}

Outcome covariation() {
  const DiffusionModel bm = brownian_motion();
  const TimeSpaceFunction x = identity_function();
  std::vector<double> qv;
  for (std::uint64_t p = 0; p < 2000; ++p) {
    qv.push_back(quadratic_covariation(x, euler_maruyama(bm, Partition(12), kSeed, p), 1.0).value);
  }
  const Summary s = summarize(qv);
  const double rel = std::abs(s.mean - 1.0);
  return {rel < kCovariationRel, "mean = " + fmt("%.5f", s.mean) + ", rel error " + fmt("%.4f", rel)};
}

Outcome identity() {
  const DiffusionModel bm = brownian_motion();
  std::mt19937_64 rng(kSeed);
  const ElementaryFunction e = random_elementary(rng, 5);
  const TimeSpaceFunction ef = e.as_function();
  const TimeSpaceFunction x = identity_function();
  const TimeSpaceFunction sgn = sign_function();
  std::vector<double> gap[3], diff[3];
  for (std::uint64_t p = 0; p < 2000; ++p) {
    const SamplePath path = euler_maruyama(bm, Partition(12), kSeed, p);
    const LocalTimeField field = field_of(path, bm);
    const double dl[3] = {elementary_integral(e, field), timespace_integral(x, field, 1.0),
                          timespace_integral(sgn, field, 1.0)};
    const TimeSpaceFunction* fs[3] = {&ef, &x, &sgn};
    for (int k = 0; k < 3; ++k) {
      const double d = forward_riemann_sum(*fs[k], path, 1.0).value - backward_riemann_sum(*fs[k], path, 1.0).value;
      diff[k].push_back(d);
      gap[k].push_back(std::abs(dl[k] - d));
    }
  }
  const char* names[3] = {"elementary", "x", "sgn"};
  Outcome o;
  for (int k = 0; k < 3; ++k) {
    const double ratio = summarize(gap[k]).mean / summarize(diff[k]).sd;
    o.pass = o.pass && ratio < kIdentityFraction;
    o.detail += std::string(k ? ", " : "") + names[k] + " " + fmt("%.4f", ratio);
  }
  o.detail = "mean|gap|/sd: " + o.detail;
  return o;
}

Outcome inequality() {
  const DiffusionModel bm = brownian_motion();
  std::mt19937_64 rng(kSeed + 1);
  std::vector<ElementaryFunction> fs;
  std::vector<double> norms;
  for (int k = 0; k < 50; ++k) {
    fs.push_back(random_elementary(rng, 5));
    norms.push_back(seminorm_star(fs.back().as_function(), bm).value);
  }
  const std::size_t n_paths = 1000;
  std::vector<std::vector<double>> mags(fs.size(), std::vector<double>(n_paths));
  for (std::uint64_t p = 0; p < n_paths; ++p) {
    const LocalTimeField field = field_of(euler_maruyama(bm, Partition(12), kSeed, p), bm);
    for (std::size_t k = 0; k < fs.size(); ++k) mags[k][p] = std::abs(elementary_integral(fs[k], field));
  }
  int ok = 0;
  double worst = 0.0;
  for (std::size_t k = 0; k < fs.size(); ++k) {
    const Summary s = summarize(mags[k]);
    if (s.mean <= norms[k] + kNormStderrs * s.stderr_) ++ok;
    worst = std::max(worst, s.mean / norms[k]);
  }
  return {ok == 50, std::to_string(ok) + "/50 within bound, max E|I|/norm = " + fmt("%.4f", worst)};
}

double residual_ratio(const TestFunction& F, const DiffusionModel& model, int level, std::size_t n_paths) {
  const ItoVerifier v(F, model);
  std::vector<double> r, terminal;
  for (std::uint64_t p = 0; p < n_paths; ++p) {
    const SamplePath path = euler_maruyama(model, Partition(level), kSeed, p);
    r.push_back(v.residual(path, field_of(path, model), 1.0).residual);
    terminal.push_back(F.F(path.values.back(), 1.0));
  }
  return std::abs(summarize(r).mean) / summarize(terminal).sd;
}

Outcome tanaka() {
  const DiffusionModel bm = brownian_motion();
  const double a = residual_ratio(abs_test(), bm, 12, 2000);
  const double c = residual_ratio(call_test(0.2), bm, 12, 2000);
  return {a < kTanakaFraction && c < kTanakaFraction,
          "|mean r|/sd: |x| " + fmt("%.4f", a) + ", (x-0.2)^+ " + fmt("%.4f", c)};
}

Outcome smooth() {
  const std::vector<int> levels{8, 10, 12};
  const std::size_t n_paths = 2000;
  struct Case {
    const char* name;
    DiffusionModel model;
    TestFunction F;
  };
  const std::vector<Case> cases{{"bm x^2/2", brownian_motion(), quadratic_test()},
                                {"bm t sin x", brownian_motion(), time_sine_test()},
                                {"ou x^2/2", ornstein_uhlenbeck(1.0, 1.0), quadratic_test()},
                                {"ou t sin x", ornstein_uhlenbeck(1.0, 1.0), time_sine_test()}};
  Outcome o;
  for (const Case& c : cases) {
    const ItoVerifier v(c.F, c.model);
    std::vector<double> abs_r(levels.size(), 0.0);
    std::vector<double> r12, terminal;
    for (std::uint64_t p = 0; p < n_paths; ++p) {
      // Coarser levels reuse the same Brownian path.
      std::vector<double> inc = brownian_increments(Partition(levels.back()), kSeed, p);
      for (std::size_t k = levels.size(); k-- > 0;) {
        const SamplePath path = euler_maruyama(c.model, Partition(levels[k]), inc, kSeed, p);
        const double r = v.residual(path, field_of(path, c.model), 1.0).residual;
        abs_r[k] += std::abs(r) / n_paths;
        if (k == levels.size() - 1) {
          r12.push_back(r);
          terminal.push_back(c.F.F(path.values.back(), 1.0));
        }
        if (k > 0) {
          inc = coarsen_increments(inc);
          inc = coarsen_increments(inc);
        }
      }
    }
    const double ratio = std::abs(summarize(r12).mean) / summarize(terminal).sd;
    const bool decreasing = abs_r[0] > abs_r[1] && abs_r[1] > abs_r[2];
    o.pass = o.pass && ratio < kSmoothFraction && decreasing;
    o.detail += std::string(o.detail.empty() ? "" : "; ") + c.name + ": ratio " + fmt("%.4f", ratio) +
                ", E|r| " + fmt("%.2e", abs_r[0]) + " > " + fmt("%.2e", abs_r[1]) + " > " + fmt("%.2e", abs_r[2]) +
                (decreasing ? "" : " (not decreasing)");
  }
  return o;
}

Outcome envelopes() {
  const DiffusionModel bm = brownian_motion();
  const DensityModel& density = *bm.density;
  double worst = 0.0;
  for (double t : {0.1, 0.5, 1.0}) {
    const double r = grid_envelope_r(density, t, {});
    const auto u = grid_envelope_u(density, t, {});
    worst = std::max(worst, std::abs(r - 1.0 / std::sqrt(2.0 * std::numbers::pi * t)));
    worst = std::max(worst, u ? std::abs(*u - 1.0 / std::sqrt(t)) : INFINITY);
  }
  EnvelopePair grid;
  grid.r = [&](double t) { return grid_envelope_r(density, t, {}); };
  grid.u = [&](double t) { return grid_envelope_u(density, t, {}).value_or(INFINITY); };
  const IntegrabilityReport rep = check_integrability(grid);
  const double closed = 4.0 * std::pow(2.0 * std::numbers::pi, -0.25);
  const bool ok = worst <= kEnvelopeTol && rep.pass && std::abs(rep.value - kEnvelopeIntegralTarget) <= kEnvelopeIntegralTol &&
                  std::abs(rep.value - closed) <= kEnvelopeIntegralTol;
  return {ok, "max envelope error " + fmt("%.2e", worst) + ", integral " + fmt("%.5f", rep.value) +
                  " (closed form " + fmt("%.5f", closed) + ")"};
}

Outcome reversal() {
  const std::vector<double> s{0.25, 0.5, 0.75};
  const auto m = reversal_marginal_check(ornstein_uhlenbeck(1.0, 1.0), 12, 10000, kSeed, s);
  double ks = 0.0;
  std::string d = "KS";
  for (const auto& r : m) {
    ks = std::max(ks, r.ks);
    d += " s=" + fmt("%.2f", r.s) + ":" + fmt("%.4f", r.ks);
  }
  const ReversedModel rb = reversed_coefficients(brownian_motion());
  double drift_err = 0.0;
  for (double t = 0.0; t < 1.0; t += 1.0 / 64) {
    for (double x = -4.0; x <= 4.0; x += 0.25) drift_err = std::max(drift_err, std::abs(rb.b_bar(t, x) + x / (1.0 - t)));
  }
  return {ks < kKsThreshold && drift_err <= kReversedDriftTol,
          d + "; bm reversed drift max error " + fmt("%.2e", drift_err)};
}

Outcome calibration() {
  const DiffusionModel bm = brownian_motion();
  const std::size_t n_paths = 10000;
  auto g = [](double x) { return std::exp(-0.5 * x * x); };
  std::vector<double> l0, l0_occ, err, err_occ;
  for (std::uint64_t p = 0; p < n_paths; ++p) {
    const SamplePath path = euler_maruyama(bm, Partition(12), kSeed, p);
    const double clock = pathwise_time_integral([&](double x, double s) {
      const double sig = bm.dispersion(s, x);
      return g(x) * sig * sig;
    }, path, 1.0);
    for (auto est : {LocalTimeEstimator::Crossing, LocalTimeEstimator::Occupation}) {
      const LocalTimeField f = field_of(path, bm, est);
      const std::size_t last = f.nt() - 1;
      double occ = 0.0;
      for (std::size_t i = 0; i + 1 < f.nx(); ++i) {
        occ += 0.5 * (g(f.xgrid()[i]) * f.at(last, i) + g(f.xgrid()[i + 1]) * f.at(last, i + 1)) *
               (f.xgrid()[i + 1] - f.xgrid()[i]);
      }
      const double rel = std::abs(occ - clock) / clock;
      if (est == LocalTimeEstimator::Crossing) {
        l0.push_back(f.value(0.0, 1.0));
        err.push_back(rel);
      } else {
        l0_occ.push_back(f.value(0.0, 1.0));
        err_occ.push_back(rel);
      }
    }
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  const double target = std::sqrt(2.0 / std::numbers::pi);
  const Summary s = summarize(l0);
  const double rel = std::abs(s.mean - target) / target;
  const double med = median(err);
  const double rel_occ = std::abs(summarize(l0_occ).mean - target) / target;
  return {rel < kLocalTimeRel && med < kOccupationMedianRel,
          "E L^0 = " + fmt("%.4f", s.mean) + " (rel " + fmt("%.4f", rel) + ", stderr " + fmt("%.4f", s.stderr_) +
              "), occupation-identity median rel " + fmt("%.4f", med) + "; occupation estimator eps=0.05: rel " +
              fmt("%.4f", rel_occ) + ", median " + fmt("%.4f", median(err_occ))};
}

std::vector<std::string> report_without_wall_time(const ExperimentConfig& c, unsigned threads) {
  RunOptions o;
  o.threads = threads;
  std::ostringstream out;
  write_report(run(c, o), out);
  std::vector<std::string> lines;
  std::istringstream in(out.str());
  for (std::string line; std::getline(in, line);) lines.push_back(line.substr(0, line.rfind(',')));
  return lines;
}

Outcome determinism() {
  Outcome o;
  for (const char* name : {"covariation.json", "sweep_n.json", "theorem32.json"}) {
    const ExperimentConfig c = load_config(std::string(LTCALC_CONFIG_DIR) + "/" + name);
    const bool same = report_without_wall_time(c, 1) == report_without_wall_time(c, 1) &&
                      report_without_wall_time(c, 1) == report_without_wall_time(c, 2);
    o.pass = o.pass && same;
    o.detail += std::string(o.detail.empty() ? "" : ", ") + name + (same ? " identical" : " DIFFERS");
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"1 telescoping exactness", telescoping},
      {"2 quadratic covariation", covariation},
      {"3 local-time integral identity", identity},
      {"4 seminorm inequality", inequality},
      {"5 non-smooth Ito residual", tanaka},
      {"6 smooth Ito residual", smooth},
      {"7 envelopes", envelopes},
      {"8 time reversal", reversal},
      {"9 local-time calibration", calibration},
      {"10 determinism", determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
