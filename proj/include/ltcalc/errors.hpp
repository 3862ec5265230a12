#pragma once

#include <stdexcept>
#include <string>

namespace ltc {

// Base of every error raised by the library. The CLI maps the two families
// (configuration vs runtime) onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class SimulationBlowupError : public Error {
 public:
  SimulationBlowupError(const std::string& what, std::size_t step)
      : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class ResourceCapError : public Error {
 public:
  ResourceCapError(const std::string& what, double requested_steps)
      : Error(what), requested_steps_(requested_steps) {}
  double requested_steps() const noexcept { return requested_steps_; }

 private:
  double requested_steps_;
};

class GridMismatchError : public Error {
 public:
  using Error::Error;
};

class MembershipError : public Error {
 public:
  using Error::Error;
};

class HypothesisViolation : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ltc
