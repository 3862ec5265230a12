#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ltcalc/diffusion.hpp"
#include "ltcalc/functions.hpp"
#include "ltcalc/simulate.hpp"

namespace ltc {

// Coefficients of the time-reversed diffusion Xbar_s = X_{1-s}:
//   sigma_bar(s, x) = sigma(1-s, x)
//   b_bar(s, x)     = -b(1-s, x) + (1/p_{1-s}(x)) d/dx(sigma^2 p_{1-s})(x)
// The ratio uses the closed form for Gaussian marginals; for estimated
// densities 1/p is taken as 0 where p_{1-s}(x) <= kDensityFloor. b_bar is undefined
// at s = 1 and throws DomainError there.
struct ReversedModel {
  CoefficientFn sigma_bar;
  CoefficientFn b_bar;
  CoefficientFn reflected_drift;  // -b(1-s, x)
  CoefficientFn correction;       // (1/p) d/dx(sigma^2 p) at time 1-s
  double terminal_state = 0.0;    // Xbar_1 = X_0
};

ReversedModel reversed_coefficients(const DiffusionModel& model);

// Xbar on the same grid: values in reverse order.
std::vector<double> reverse_path(std::span<const double> values);

enum class ReversalMode { Resimulate, Residual };

std::string to_string(ReversalMode mode);
ReversalMode reversal_mode_from_string(const std::string& name);

struct ReversedPath {
  Partition partition{0};
  std::vector<double> values;           // Xbar at s_k = k 2^-n
  std::vector<double> driver_increments;  // dWbar per interval
  ReversalMode mode = ReversalMode::Residual;
};

// Reverses an existing path and infers dWbar as the residual
// (dXbar - b_bar ds) / sigma_bar (0 where sigma_bar = 0).
ReversedPath residual_reversed_path(const SamplePath& path, const ReversedModel& reversed);

// Simulates Xbar as its own SDE from `start` with fresh increments. The
// Euler scheme stops at s = 1 - 2^-n and the last step pins Xbar_1 to the
// forward initial state.
ReversedPath simulate_reversed_path(const ReversedModel& reversed, const Partition& partition,
                                    double start, std::uint64_t seed, std::uint64_t path_index);

struct BackwardDecomposition {
  double drift_term = 0.0;       // sum f(Xbar, 1-s) (-b(1-s, Xbar)) ds
  double correction_term = 0.0;  // sum f (1/p) d/dx(sigma^2 p) ds
  double martingale_term = 0.0;  // sum f sigma_bar dWbar
  double value = 0.0;            // -(drift + correction + martingale)
};

// int_0^t f(X_s, s) d*X_s = -int_{1-t}^1 f(Xbar_s, 1-s) dXbar_s via the
// semimartingale decomposition of Xbar.
BackwardDecomposition backward_integral_decomposed(const TimeSpaceFunction& f,
                                                   const ReversedPath& reversed_path,
                                                   const ReversedModel& reversed, double t);

struct MarginalMatch {
  double s = 0.0;
  double ks = 0.0;
};

// Two-sample KS between fresh reversed simulations at s and forward X_{1-s}.
// Reversed starts are drawn from the terminal values of an independent
// forward ensemble.
std::vector<MarginalMatch> reversal_marginal_check(const DiffusionModel& model, int level,
                                                   std::size_t n_paths, std::uint64_t seed,
                                                   std::span<const double> s_values,
                                                   unsigned threads = 1);

}  // namespace ltc
