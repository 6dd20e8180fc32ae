#include "bmech/errors.hpp"

#include <sstream>

namespace bmech {

namespace {

std::string located(int line, int col, const std::string& what) {
  std::ostringstream os;
  os << line << ':' << col << ": " << what;
  return os.str();
}

std::string syntax_message(const std::set<std::string>& expected, const std::string& found) {
  std::ostringstream os;
  os << "expected ";
  if (expected.size() == 1) {
    os << *expected.begin();
  } else {
    os << "one of ";
    bool first = true;
    for (const auto& e : expected) {
      if (!first) os << ", ";
      os << e;
      first = false;
    }
  }
  os << "; found " << found;
  return os.str();
}

}  // namespace

ParseError::ParseError(int line, int col, const std::string& what)
    : Error(located(line, col, what)), line_(line), col_(col), detail_(what) {}

SyntaxError::SyntaxError(int line, int col, std::set<std::string> expected, std::string found)
    : ParseError(line, col, syntax_message(expected, found)),
      expected_(std::move(expected)),
      found_(std::move(found)) {}

UnknownIdentifier::UnknownIdentifier(int line, int col, const std::string& name)
    : ParseError(line, col, "unknown identifier '" + name + "'"), name_(name) {}

DimensionMismatch::DimensionMismatch(int line, int col, const std::string& what)
    : ParseError(line, col, what) {}

NoConvergence::NoConvergence(int iterations, double residual)
    : NumericalError("Newton iteration did not converge after " + std::to_string(iterations) +
                     " iterations (residual " + std::to_string(residual) + ")"),
      iterations_(iterations),
      residual_(residual) {}

OffShell::OffShell(double violation, double tolerance)
    : NumericalError("point is off the classical subspace: |p + grad S| = " +
                     std::to_string(violation) + " > " + std::to_string(tolerance)),
      violation_(violation) {}

}  // namespace bmech
