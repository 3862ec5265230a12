#include "ltcalc/integrals.hpp"

#include <iomanip>
#include <ostream>

#include "ltcalc/errors.hpp"
#include "ltcalc/numerics.hpp"

namespace ltc {

namespace {

struct Window {
  std::size_t k0;
  std::size_t k1;
};

Window snap_window(const SamplePath& path, double t0, double t1) {
  if (!(t0 >= 0.0 && t0 <= 1.0) || !(t1 >= 0.0 && t1 <= 1.0)) {
    throw DomainError("partition sum requested outside [0, 1]");
  }
  if (t1 < t0) throw DomainError("partition sum window is reversed");
  return {path.partition.index_at_or_below(t0), path.partition.index_at_or_below(t1)};
}

template <class Term>
PartitionSumResult accumulate(const SamplePath& path, double t0, double t1, bool keep_terms,
                              Term&& term) {
  const Window w = snap_window(path, t0, t1);
  PartitionSumResult out;
  out.level = path.partition.level();
  out.t_start = path.time(w.k0);
  out.t_end = path.time(w.k1);
  out.first_step = w.k0;
  if (keep_terms) out.terms.reserve(w.k1 - w.k0);
  CompensatedSum acc;
  for (std::size_t i = w.k0; i < w.k1; ++i) {
    const double v = term(i);
    acc += v;
    if (keep_terms) out.terms.push_back(v);
  }
  out.value = acc.value();
  return out;
}

}  // namespace

PartitionSumResult forward_riemann_sum(const TimeSpaceFunction& f, const SamplePath& path,
                                       double t0, double t1, bool keep_terms) {
  const auto& x = path.values;
  return accumulate(path, t0, t1, keep_terms, [&](std::size_t i) {
    return f(x[i], path.time(i)) * (x[i + 1] - x[i]);
  });
}

PartitionSumResult forward_riemann_sum(const TimeSpaceFunction& f, const SamplePath& path,
                                       double t, bool keep_terms) {
  return forward_riemann_sum(f, path, 0.0, t, keep_terms);
}

PartitionSumResult backward_riemann_sum(const TimeSpaceFunction& f, const SamplePath& path,
                                        double t0, double t1, bool keep_terms) {
  const auto& x = path.values;
  return accumulate(path, t0, t1, keep_terms, [&](std::size_t i) {
    return f(x[i + 1], path.time(i + 1)) * (x[i + 1] - x[i]);
  });
}

PartitionSumResult backward_riemann_sum(const TimeSpaceFunction& f, const SamplePath& path,
                                        double t, bool keep_terms) {
  return backward_riemann_sum(f, path, 0.0, t, keep_terms);
}

PartitionSumResult quadratic_covariation(const TimeSpaceFunction& f, const SamplePath& path,
                                         double t0, double t1, bool keep_terms) {
  PartitionSumResult backward = backward_riemann_sum(f, path, t0, t1, keep_terms);
  const PartitionSumResult forward = forward_riemann_sum(f, path, t0, t1, keep_terms);
  backward.value -= forward.value;
  for (std::size_t i = 0; i < backward.terms.size(); ++i) backward.terms[i] -= forward.terms[i];
  return backward;
}

PartitionSumResult quadratic_covariation(const TimeSpaceFunction& f, const SamplePath& path,
                                         double t, bool keep_terms) {
  return quadratic_covariation(f, path, 0.0, t, keep_terms);
}

PartitionSumResult time_increment_term(const TimeSpaceFunction& F, const SamplePath& path,
                                       double t0, double t1, bool keep_terms) {
  const auto& x = path.values;
  return accumulate(path, t0, t1, keep_terms, [&](std::size_t i) {
    return F(x[i], path.time(i + 1)) - F(x[i], path.time(i));
  });
}

PartitionSumResult time_increment_term(const TimeSpaceFunction& F, const SamplePath& path,
                                       double t, bool keep_terms) {
  return time_increment_term(F, path, 0.0, t, keep_terms);
}

double pathwise_time_integral(const SpaceTimeFn& g, const SamplePath& path, double t) {
  const std::size_t k = path.partition.index_at_or_below(t);
  const double dt = path.dt();
  CompensatedSum acc;
  for (std::size_t i = 0; i < k; ++i) {
    acc += 0.5 * dt * (g(path.values[i], path.time(i)) + g(path.values[i + 1], path.time(i + 1)));
  }
  return acc.value();
}

double covariation_oracle(const TimeSpaceFunction& f, const DiffusionModel& model,
                          const SamplePath& path, double t) {
  if (!f.dx) throw ConfigurationError("covariation oracle needs df/dx for '" + f.name + "'");
  return pathwise_time_integral(
      [&](double x, double s) {
        const double sigma = model.dispersion(s, x);
        return f.dx(x, s) * sigma * sigma;
      },
      path, t);
}

void write_terms_csv(const PartitionSumResult& result, const SamplePath& path, std::ostream& out) {
  out << "i,t_i,x_i,term\n" << std::setprecision(17);
  for (std::size_t k = 0; k < result.terms.size(); ++k) {
    const std::size_t i = result.first_step + k;
    out << i << ',' << path.time(i) << ',' << path.values[i] << ',' << result.terms[k] << '\n';
  }
}

}  // namespace ltc
