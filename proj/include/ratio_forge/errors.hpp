#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ratio_forge {

// Base of every error the library throws on bad input or numeric trouble.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Structural or validation problem with caller-supplied data.
class InputError : public Error {
 public:
  using Error::Error;
};

// Invalid filter / clip / training parameters.
class ParameterError : public InputError {
 public:
  using InputError::InputError;
};

// Malformed text at a known line of an input file.
class ParseError : public InputError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A record violates a schema invariant; names the offending field.
class ValidationError : public InputError {
 public:
  ValidationError(const std::string& source, std::size_t line, const std::string& field,
                  const std::string& what);
  const std::string& field() const { return field_; }
  const std::string& detail() const { return detail_; }
  std::size_t line() const { return line_; }

 private:
  std::string field_;
  std::string detail_;
  std::size_t line_;
};

class VersionError : public InputError {
 public:
  using InputError::InputError;
};

// Filesystem failure, message carries the path.
class IoError : public InputError {
 public:
  using InputError::InputError;
};

// Saturation, divergence or other numeric breakdown.
class NumericError : public Error {
 public:
  using Error::Error;
};

class SaturationError : public NumericError {
 public:
  SaturationError(std::size_t position, double value, double bound);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class DivergenceError : public NumericError {
 public:
  DivergenceError(std::size_t step, double magnitude);
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

// Caller broke an API contract (e.g. gradient requested on stale log-probs).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A token sits on a clip boundary so the loss is not differentiable there.
// Finite-difference callers treat this as a request to resample.
class BoundaryTokenError : public Error {
 public:
  using Error::Error;
};

}  // namespace ratio_forge
