#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lecam {

/// A model ingredient is missing or mis-declared (e.g. no sigma' where one is needed).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The state of a simulated path stopped being finite.
class SimulationBlowUp : public std::runtime_error {
 public:
  SimulationBlowUp(std::size_t step, const std::string& process)
      : std::runtime_error("simulation blow-up in " + process + " at step " +
                           std::to_string(step)),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// A clock level or stopping time lies beyond the simulated span of a path.
class ClockOverrun : public std::runtime_error {
 public:
  ClockOverrun(double requested, double available)
      : std::runtime_error("clock overrun: requested " + std::to_string(requested) +
                           ", path supports " + std::to_string(available)),
        requested_(requested),
        available_(available) {}

  double requested() const noexcept { return requested_; }
  double available() const noexcept { return available_; }

 private:
  double requested_;
  double available_;
};

/// A drift functional tried to read the path after its own time argument.
class AdaptednessError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A rate point had a non-positive mean, so no log-log slope exists.
class DegenerateRatePoint : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace lecam
