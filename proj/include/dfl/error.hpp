#pragma once

#include <stdexcept>
#include <string>

namespace dfl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Raised when an iterative method does not reach its tolerance. Carries the
/// best estimate seen so far so callers can decide whether it is usable.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double best_estimate)
      : Error(what), best_estimate_(best_estimate) {}
  double best_estimate() const noexcept { return best_estimate_; }

 private:
  double best_estimate_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int round, int client)
      : Error(what), round_(round), client_(client) {}
  int round() const noexcept { return round_; }
  int client() const noexcept { return client_; }

 private:
  int round_;
  int client_;
};

class VerificationError : public Error {
 public:
  using Error::Error;
};

}  // namespace dfl
