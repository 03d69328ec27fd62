#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kmfg {

// Bad arguments or configuration. Maps to CLI exit code 2.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedDimension : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// Maps to CLI exit code 3.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CflViolation : public NumericalFailure {
 public:
  CflViolation(const std::string& what, double suggested_dt)
      : NumericalFailure(what), suggested_dt_(suggested_dt) {}
  double suggested_dt() const { return suggested_dt_; }

 private:
  double suggested_dt_;
};

class PicardFailure : public NumericalFailure {
 public:
  PicardFailure(const std::string& what, std::vector<double> history)
      : NumericalFailure(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

// Q dynamics evaluated too close to a face of the simplex.
class BoundaryGuard : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

}  // namespace kmfg
