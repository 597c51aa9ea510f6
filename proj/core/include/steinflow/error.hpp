#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace steinflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter is outside its admissible range (non-positive variance, odd
/// monomial exponent, non-SPD matrix, ...).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Inputs are inconsistent with each other (dimension mismatch, asymmetric
/// matrix, grid mismatch, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class NotFactorizable : public Error {
 public:
  using Error::Error;
};

/// The truncated domain is too small for the density it is asked to carry.
class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, double boundary_value)
      : Error(what), boundary_value_(boundary_value) {}
  double boundary_value() const noexcept { return boundary_value_; }

 private:
  double boundary_value_;
};

/// A particle left the admissible region or became non-finite.
class NumericalBlowup : public Error {
 public:
  NumericalBlowup(const std::string& what, std::size_t particle, double time)
      : Error(what), particle_(particle), time_(time) {}
  std::size_t particle() const noexcept { return particle_; }
  double time() const noexcept { return time_; }

 private:
  std::size_t particle_;
  double time_;
};

/// A finite-volume step violated its CFL bound. `suggested_dt` is the largest
/// step that would have been accepted.
class StepRejected : public Error {
 public:
  StepRejected(const std::string& what, double suggested_dt)
      : Error(what), suggested_dt_(suggested_dt) {}
  double suggested_dt() const noexcept { return suggested_dt_; }

 private:
  double suggested_dt_;
};

/// Picard iterates stopped contracting; the horizon is too long.
class NonContraction : public Error {
 public:
  NonContraction(const std::string& what, double suggested_horizon)
      : Error(what), suggested_horizon_(suggested_horizon) {}
  double suggested_horizon() const noexcept { return suggested_horizon_; }

 private:
  double suggested_horizon_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace steinflow
