#pragma once

#include <set>
#include <stdexcept>
#include <string>

namespace bmech {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failures map to CLI exit status 2; everything else is a usage or
// input problem (exit status 1).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Parsing.

class ParseError : public Error {
 public:
  ParseError(int line, int col, const std::string& what);
  int line() const { return line_; }
  int col() const { return col_; }
  // Message without the "line:col: " prefix.
  const std::string& detail() const { return detail_; }
  // Name of the spec field holding the expression, empty for bare expressions.
  const std::string& field() const { return field_; }
  void set_field(std::string field) { field_ = std::move(field); }

 private:
  int line_;
  int col_;
  std::string detail_;
  std::string field_;
};

class SyntaxError : public ParseError {
 public:
  SyntaxError(int line, int col, std::set<std::string> expected, std::string found);
  const std::set<std::string>& expected() const { return expected_; }
  const std::string& found() const { return found_; }

 private:
  std::set<std::string> expected_;
  std::string found_;
};

class UnknownIdentifier : public ParseError {
 public:
  UnknownIdentifier(int line, int col, const std::string& name);
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class DimensionMismatch : public ParseError {
 public:
  DimensionMismatch(int line, int col, const std::string& what);
};

// Invalid system description (bad JSON, inconsistent fields).
class SpecError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Evaluation and numerics.

class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularMetric : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class Degenerate : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
 public:
  NoConvergence(int iterations, double residual);
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

// Dirichlet problem degenerate: the boundary times are (numerically) at a
// conjugate point of the classical history.
class SingularHessian : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class OffShell : public NumericalError {
 public:
  OffShell(double violation, double tolerance);
  double violation() const { return violation_; }

 private:
  double violation_;
};

class WeightMismatch : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class NonNaturalLagrangian : public Error {
 public:
  using Error::Error;
};

class Instability : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace bmech
