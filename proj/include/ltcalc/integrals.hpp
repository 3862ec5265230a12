#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "ltcalc/diffusion.hpp"
#include "ltcalc/functions.hpp"
#include "ltcalc/simulate.hpp"

namespace ltc {

// Value of a partition sum over grid steps [k0, k1), where the requested
// times were snapped down to the grid.
struct PartitionSumResult {
  double value = 0.0;
  int level = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t first_step = 0;
  std::vector<double> terms;  // per-step summands when requested
};

// Sum_{t_i <= t} f(X_{t_i}, t_i) (X_{t_{i+1}} - X_{t_i}).
PartitionSumResult forward_riemann_sum(const TimeSpaceFunction& f, const SamplePath& path,
                                       double t, bool keep_terms = false);
PartitionSumResult forward_riemann_sum(const TimeSpaceFunction& f, const SamplePath& path,
                                       double t0, double t1, bool keep_terms = false);

// Sum_{t_i <= t} f(X_{t_{i+1}}, t_{i+1}) (X_{t_{i+1}} - X_{t_i}).
PartitionSumResult backward_riemann_sum(const TimeSpaceFunction& f, const SamplePath& path,
                                        double t, bool keep_terms = false);
PartitionSumResult backward_riemann_sum(const TimeSpaceFunction& f, const SamplePath& path,
                                        double t0, double t1, bool keep_terms = false);

// [f(X, .), X]_t as backward minus forward sum on the same partition.
PartitionSumResult quadratic_covariation(const TimeSpaceFunction& f, const SamplePath& path,
                                         double t, bool keep_terms = false);
PartitionSumResult quadratic_covariation(const TimeSpaceFunction& f, const SamplePath& path,
                                         double t0, double t1, bool keep_terms = false);

// Sum_{t_i <= t} (F(X_{t_i}, t_{i+1}) - F(X_{t_i}, t_i)): time moves, space
// stays at the left endpoint.
PartitionSumResult time_increment_term(const TimeSpaceFunction& F, const SamplePath& path,
                                       double t, bool keep_terms = false);
PartitionSumResult time_increment_term(const TimeSpaceFunction& F, const SamplePath& path,
                                       double t0, double t1, bool keep_terms = false);

// Pathwise trapezoidal integral of g(X_s, s) ds over [0, t].
double pathwise_time_integral(const SpaceTimeFn& g, const SamplePath& path, double t);

// Oracle for the covariation of a C^1 integrand:
// int_0^t df/dx(X_s, s) sigma^2(s, X_s) ds, trapezoidal along the path.
double covariation_oracle(const TimeSpaceFunction& f, const DiffusionModel& model,
                          const SamplePath& path, double t);

// Per-term diagnostics, columns i,t_i,x_i,term.
void write_terms_csv(const PartitionSumResult& result, const SamplePath& path, std::ostream& out);

}  // namespace ltc
