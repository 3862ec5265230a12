#include "ltcalc/simulate.hpp"

#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "ltcalc/errors.hpp"
#include "ltcalc/parallel.hpp"
#include "ltcalc/rng.hpp"

namespace ltc {

Partition::Partition(int level) : level_(level) {
  if (level < 0 || level > kMaxLevel) {
    throw ConfigurationError("partition level " + std::to_string(level) + " outside [0, " +
                             std::to_string(kMaxLevel) + "]");
  }
}

double Partition::mesh() const noexcept { return std::ldexp(1.0, -level_); }

double Partition::time(std::size_t i) const noexcept {
  return std::ldexp(static_cast<double>(i), -level_);
}

std::vector<double> Partition::times() const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = time(i);
  return out;
}

std::size_t Partition::index_at_or_below(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("time outside [0, 1]");
  // Scaling by a power of two is exact, so grid times map to their index.
  return static_cast<std::size_t>(std::floor(std::ldexp(t, level_)));
}

Partition make_partition(int level) { return Partition(level); }

std::vector<double> brownian_increments(const Partition& partition, std::uint64_t seed,
                                        std::uint64_t path_index) {
  const CounterNormal normal(seed, path_index);
  const double scale = std::sqrt(partition.mesh());
  std::vector<double> dw(partition.intervals());
  for (std::size_t i = 0; i < dw.size(); ++i) dw[i] = scale * normal(i);
  return dw;
}

std::vector<double> coarsen_increments(std::span<const double> fine) {
  if (fine.size() % 2 != 0) throw ConfigurationError("cannot coarsen an odd number of increments");
  std::vector<double> out(fine.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fine[2 * i] + fine[2 * i + 1];
  return out;
}

SamplePath euler_maruyama(const DiffusionModel& model, const Partition& partition,
                          std::vector<double> increments, std::uint64_t seed,
                          std::uint64_t path_index) {
  if (increments.size() != partition.intervals()) {
    throw ConfigurationError("increment count does not match the partition");
  }
  SamplePath path;
  path.partition = partition;
  path.seed = seed;
  path.path_index = path_index;
  path.values.resize(partition.size());
  path.values[0] = model.x0;
  const double dt = partition.mesh();
  for (std::size_t i = 0; i < increments.size(); ++i) {
    const double t = partition.time(i);
    const double x = path.values[i];
    const double next = x + model.drift(t, x) * dt + model.dispersion(t, x) * increments[i];
    if (!std::isfinite(next) || std::abs(next) > kBlowupThreshold) {
      throw SimulationBlowupError("simulation blow-up at step " + std::to_string(i) +
                                      " (t = " + std::to_string(t) + ")",
                                  i);
    }
    path.values[i + 1] = next;
  }
  path.increments = std::move(increments);
  return path;
}

SamplePath euler_maruyama(const DiffusionModel& model, const Partition& partition,
                          std::uint64_t seed, std::uint64_t path_index) {
  return euler_maruyama(model, partition, brownian_increments(partition, seed, path_index), seed,
                        path_index);
}

double default_step_cap() {
  if (const char* env = std::getenv("LOCALTIME_CALC_CAP")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end != env && std::isfinite(v) && v > 0.0) return v;
    throw ConfigurationError(std::string("invalid LOCALTIME_CALC_CAP: ") + env);
  }
  return 2.5e8;
}

void check_step_cap(int level, std::size_t n_paths, double cap) {
  const double steps = static_cast<double>(n_paths) * std::ldexp(1.0, level);
  if (steps > cap) {
    std::ostringstream msg;
    msg << "requested " << steps << " Euler steps exceeds the cap of " << cap
        << " (set LOCALTIME_CALC_CAP to override)";
    throw ResourceCapError(msg.str(), steps);
  }
}

std::vector<SamplePath> simulate_ensemble(const DiffusionModel& model, int level,
                                          std::size_t n_paths, std::uint64_t seed,
                                          unsigned threads, double cap) {
  if (n_paths < 1) throw ConfigurationError("n_paths must be at least 1");
  const Partition partition(level);
  check_step_cap(level, n_paths, cap);
  std::vector<SamplePath> paths(n_paths);
  parallel_for(n_paths, threads,
               [&](std::size_t i) { paths[i] = euler_maruyama(model, partition, seed, i); });
  return paths;
}

void write_path_csv(const SamplePath& path, std::ostream& out) {
  out << "t,x,dw\n" << std::setprecision(17);
  for (std::size_t i = 0; i < path.size(); ++i) {
    out << path.time(i) << ',' << path.values[i] << ',';
    if (i < path.increments.size()) out << path.increments[i];
    out << '\n';
  }
}

}  // namespace ltc
