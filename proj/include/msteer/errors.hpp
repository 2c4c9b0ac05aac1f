#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace msteer {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data or configuration (CLI exit code 2).
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& reason)
      : Error(field + ": " + reason), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ZeroMass : public Error {
 public:
  ZeroMass() : Error("measure has zero mass") {}
};

class EmptyMeasure : public Error {
 public:
  EmptyMeasure() : Error("no atom survives the threshold") {}
};

class TooLarge : public Error {
 public:
  TooLarge(std::size_t atoms, std::size_t limit)
      : Error("measure has " + std::to_string(atoms) + " atoms, exact W1 oracle is limited to " +
              std::to_string(limit)) {}
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t actual)
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(actual)) {}
};

class NonFinite : public Error {
 public:
  explicit NonFinite(const std::string& where) : Error("non-finite value in " + where) {}
};

class CflViolation : public Error {
 public:
  CflViolation(double actual, double limit)
      : Error("CFL number " + std::to_string(actual) + " exceeds " + std::to_string(limit)),
        actual_(actual),
        limit_(limit) {}
  double actual() const { return actual_; }
  double limit() const { return limit_; }

 private:
  double actual_;
  double limit_;
};

class GridTooSmall : public Error {
 public:
  GridTooSmall() : Error("grid needs at least 3 cells per axis") {}
};

class IncompatibleGrids : public Error {
 public:
  IncompatibleGrids() : Error("fields live on different grids") {}
};

class AlphaOutOfRange : public Error {
 public:
  explicit AlphaOutOfRange(double alpha)
      : Error("localization weight " + std::to_string(alpha) + " outside (0, 1]") {}
};

/// Expression DSL syntax error at a byte offset.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, std::string expected)
      : Error("syntax error at offset " + std::to_string(offset) + ": expected " + expected),
        offset_(offset),
        expected_(std::move(expected)) {}
  std::size_t offset() const { return offset_; }
  const std::string& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::string expected_;
};

class UnknownIdentifier : public Error {
 public:
  UnknownIdentifier(std::size_t offset, const std::string& name)
      : Error("unknown identifier '" + name + "' at offset " + std::to_string(offset)),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Raised when DSL evaluation hits a near-zero denominator.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Scenario file syntax problem.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace msteer
