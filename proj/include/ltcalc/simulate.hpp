#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ltcalc/diffusion.hpp"

namespace ltc {

// Uniform dyadic partition t_i = i 2^-n of [0, 1].
class Partition {
 public:
  static constexpr int kMaxLevel = 24;

  explicit Partition(int level);

  int level() const noexcept { return level_; }
  std::size_t intervals() const noexcept { return std::size_t{1} << level_; }
  std::size_t size() const noexcept { return intervals() + 1; }
  double mesh() const noexcept;
  double time(std::size_t i) const noexcept;
  std::vector<double> times() const;

  // Largest index k with t_k <= t. Throws DomainError outside [0, 1].
  std::size_t index_at_or_below(double t) const;

  bool operator==(const Partition&) const = default;

 private:
  int level_;
};

Partition make_partition(int level);

struct SamplePath {
  Partition partition{0};
  std::vector<double> values;      // X at every grid time
  std::vector<double> increments;  // dW per interval
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;

  std::size_t size() const noexcept { return values.size(); }
  double time(std::size_t i) const noexcept { return partition.time(i); }
  double dt() const noexcept { return partition.mesh(); }
};

// |X| beyond this is reported as a blow-up.
inline constexpr double kBlowupThreshold = 1e8;

// Gaussian increments N(0, mesh) keyed by (seed, path_index, step).
std::vector<double> brownian_increments(const Partition& partition, std::uint64_t seed,
                                        std::uint64_t path_index);

// Sums adjacent pairs: increments of level n+1 become increments of level n.
std::vector<double> coarsen_increments(std::span<const double> fine);

SamplePath euler_maruyama(const DiffusionModel& model, const Partition& partition,
                          std::uint64_t seed, std::uint64_t path_index);

// Euler scheme driven by the supplied increments.
SamplePath euler_maruyama(const DiffusionModel& model, const Partition& partition,
                          std::vector<double> increments, std::uint64_t seed = 0,
                          std::uint64_t path_index = 0);

// Step-count ceiling n_paths * 2^n; LOCALTIME_CALC_CAP overrides the default.
double default_step_cap();
void check_step_cap(int level, std::size_t n_paths, double cap);

std::vector<SamplePath> simulate_ensemble(const DiffusionModel& model, int level,
                                          std::size_t n_paths, std::uint64_t seed,
                                          unsigned threads = 1, double cap = default_step_cap());

// CSV with header t,x,dw; the final row has an empty dw.
void write_path_csv(const SamplePath& path, std::ostream& out);

}  // namespace ltc
