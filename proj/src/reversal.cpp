#include "ltcalc/reversal.hpp"

#include <algorithm>
#include <cmath>

#include "ltcalc/errors.hpp"
#include "ltcalc/numerics.hpp"
#include "ltcalc/parallel.hpp"
#include "ltcalc/rng.hpp"

namespace ltc {

ReversedModel reversed_coefficients(const DiffusionModel& model) {
  if (!model.density) {
    throw ConfigurationError("time reversal needs the marginal density of model '" + model.name +
                             "'");
  }
  const DensityModel density = *model.density;
  const CoefficientPair coeffs = model.coefficients;
  ReversedModel out;
  out.terminal_state = model.x0;
  out.sigma_bar = [coeffs](double s, double x) { return coeffs.dispersion(1.0 - s, x); };
  out.reflected_drift = [coeffs](double s, double x) { return -coeffs.drift(1.0 - s, x); };
  out.correction = [density](double s, double x) {
    if (!(s < 1.0)) throw DomainError("reversed drift is undefined at s = 1");
    const double t = 1.0 - s;
    if (density.score) return density.score(t, x);
    const double p = density.density(t, x);
    if (!(p > kDensityFloor)) return 0.0;
    return density.weighted_derivative(t, x) / p;
  };
  out.b_bar = [drift = out.reflected_drift, corr = out.correction](double s, double x) {
    if (!(s < 1.0)) throw DomainError("reversed drift is undefined at s = 1");
    return drift(s, x) + corr(s, x);
  };
  return out;
}

std::vector<double> reverse_path(std::span<const double> values) {
  return {values.rbegin(), values.rend()};
}

std::string to_string(ReversalMode mode) {
  return mode == ReversalMode::Resimulate ? "resimulate" : "residual";
}

ReversalMode reversal_mode_from_string(const std::string& name) {
  if (name == "resimulate") return ReversalMode::Resimulate;
  if (name == "residual") return ReversalMode::Residual;
  throw ConfigurationError("unknown reversal_mode '" + name + "'");
}

ReversedPath residual_reversed_path(const SamplePath& path, const ReversedModel& reversed) {
  ReversedPath out;
  out.partition = path.partition;
  out.mode = ReversalMode::Residual;
  out.values = reverse_path(path.values);
  const double ds = path.dt();
  out.driver_increments.resize(path.partition.intervals());
  for (std::size_t k = 0; k < out.driver_increments.size(); ++k) {
    const double s = path.partition.time(k);
    const double x = out.values[k];
    const double sigma = reversed.sigma_bar(s, x);
    const double residual = out.values[k + 1] - x - reversed.b_bar(s, x) * ds;
    out.driver_increments[k] = sigma != 0.0 ? residual / sigma : 0.0;
  }
  return out;
}

ReversedPath simulate_reversed_path(const ReversedModel& reversed, const Partition& partition,
                                    double start, std::uint64_t seed, std::uint64_t path_index) {
  ReversedPath out;
  out.partition = partition;
  out.mode = ReversalMode::Resimulate;
  out.driver_increments = brownian_increments(partition, seed, path_index);
  const std::size_t n = partition.intervals();
  const double ds = partition.mesh();
  out.values.resize(partition.size());
  out.values[0] = start;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double s = partition.time(k);
    const double x = out.values[k];
    const double next =
        x + reversed.b_bar(s, x) * ds + reversed.sigma_bar(s, x) * out.driver_increments[k];
    if (!std::isfinite(next) || std::abs(next) > kBlowupThreshold) {
      throw SimulationBlowupError("reversed simulation blow-up at step " + std::to_string(k), k);
    }
    out.values[k + 1] = next;
  }
  // Pin the endpoint and record the driver that the pinned step implies.
  const double s_last = partition.time(n - 1);
  const double x_last = out.values[n - 1];
  out.values[n] = reversed.terminal_state;
  const double sigma = reversed.sigma_bar(s_last, x_last);
  const double residual = out.values[n] - x_last - reversed.b_bar(s_last, x_last) * ds;
  out.driver_increments[n - 1] = sigma != 0.0 ? residual / sigma : 0.0;
  return out;
}

BackwardDecomposition backward_integral_decomposed(const TimeSpaceFunction& f,
                                                   const ReversedPath& rp,
                                                   const ReversedModel& reversed, double t) {
  const std::size_t n = rp.partition.intervals();
  const std::size_t k_forward = rp.partition.index_at_or_below(t);
  const std::size_t k_start = n - k_forward;
  const double ds = rp.partition.mesh();
  CompensatedSum drift, corr, mart;
  for (std::size_t k = k_start; k < n; ++k) {
    const double s = rp.partition.time(k);
    if (!(s < 1.0)) throw GridMismatchError("reversed grid requests b_bar at s = 1");
    const double x = rp.values[k];
    const double fv = f(x, rp.partition.time(n - k));
    drift += fv * reversed.reflected_drift(s, x) * ds;
    corr += fv * reversed.correction(s, x) * ds;
    mart += fv * reversed.sigma_bar(s, x) * rp.driver_increments[k];
  }
  BackwardDecomposition out;
  out.drift_term = drift.value();
  out.correction_term = corr.value();
  out.martingale_term = mart.value();
  out.value = -(out.drift_term + out.correction_term + out.martingale_term);
  return out;
}

std::vector<MarginalMatch> reversal_marginal_check(const DiffusionModel& model, int level,
                                                   std::size_t n_paths, std::uint64_t seed,
                                                   std::span<const double> s_values,
                                                   unsigned threads) {
  const Partition partition(level);
  check_step_cap(level, 3 * n_paths, default_step_cap());
  const ReversedModel reversed = reversed_coefficients(model);
  std::vector<std::size_t> idx;
  for (double s : s_values) idx.push_back(partition.index_at_or_below(s));

  const std::uint64_t start_seed = CounterNormal::mix(seed ^ 0x5245564552534531ULL);
  const std::uint64_t bar_seed = CounterNormal::mix(seed ^ 0x5245564552534532ULL);
  const std::size_t n = partition.intervals();
  std::vector<std::vector<double>> forward(s_values.size(), std::vector<double>(n_paths));
  std::vector<std::vector<double>> backward(s_values.size(), std::vector<double>(n_paths));
  parallel_for(n_paths, threads, [&](std::size_t p) {
    const SamplePath fwd = euler_maruyama(model, partition, seed, p);
    const SamplePath starter = euler_maruyama(model, partition, start_seed, p);
    const ReversedPath bar =
        simulate_reversed_path(reversed, partition, starter.values.back(), bar_seed, p);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      forward[j][p] = fwd.values[n - idx[j]];
      backward[j][p] = bar.values[idx[j]];
    }
  });
  std::vector<MarginalMatch> out;
  for (std::size_t j = 0; j < s_values.size(); ++j) {
    out.push_back({partition.time(idx[j]), ks_statistic(forward[j], backward[j])});
  }
  return out;
}

}  // namespace ltc
