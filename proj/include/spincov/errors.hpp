#pragma once

#include <stdexcept>
#include <string>

namespace spincov {

enum class ErrorCode {
  invalid_argument,
  parse,
  unphysical,
  step_too_large,
  diverged,
  io,
  internal,
};

/// Base class for every error the engine raises. Carries a stable code so the
/// C boundary can map exceptions onto status values without string matching.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

class InvalidArgumentError : public Error {
public:
  explicit InvalidArgumentError(const std::string& what) : Error(ErrorCode::invalid_argument, what) {}
};

class ParseError : public Error {
public:
  explicit ParseError(const std::string& what) : Error(ErrorCode::parse, what) {}
};

/// A state, input vector, or covariance failed a physicality gate
/// (negative density-matrix eigenvalue, non-PSD covariance, ...).
class UnphysicalError : public Error {
public:
  explicit UnphysicalError(const std::string& what) : Error(ErrorCode::unphysical, what) {}
};

class StepTooLargeError : public Error {
public:
  explicit StepTooLargeError(const std::string& what) : Error(ErrorCode::step_too_large, what) {}
};

class DivergedError : public Error {
public:
  explicit DivergedError(const std::string& what) : Error(ErrorCode::diverged, what) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error(ErrorCode::io, what) {}
};

}  // namespace spincov
