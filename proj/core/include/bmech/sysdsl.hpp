#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bmech/errors.hpp"
#include "bmech/jet.hpp"

namespace bmech {

enum class UnaryFn { Sin, Cos, Exp, Log, Sqrt, Abs };

struct ExprNode;
// Immutable expression tree; subtrees may be shared.
using Expr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  enum class Kind { Const, Param, Var, Neg, Add, Sub, Mul, Div, Pow, Call };
  Kind kind = Kind::Const;
  double value = 0.0;  // Const
  int slot = -1;       // Param / Var
  std::string name;    // Param / Var (for printing)
  UnaryFn fn = UnaryFn::Sin;
  Expr lhs, rhs;  // operand(s); unary nodes use lhs
};

// Variables visible to an expression. Indexed families (x1..xn, v1..vn) take
// consecutive slots in declaration order, followed by scalar names such as t.
class SymbolTable {
 public:
  SymbolTable(int dim, std::vector<std::string> indexed_prefixes,
              std::vector<std::string> scalars = {});

  // x1..xn, v1..vn, t
  static SymbolTable lagrangian(int dim);
  // x1..xn
  static SymbolTable configuration(int dim);
  // xf1..xfn, xi1..xin: fields on the boundary value space Q x Q
  static SymbolTable boundary_values(int dim);
  // xf1..xfn, pf1..pfn, xi1..xin, pi1..pin: functions on boundary phase space
  static SymbolTable boundary_phase(int dim);

  // Slot for `name`, nullopt if the name is not a variable at all. Throws
  // DimensionMismatch (with the supplied position) for an indexed name whose
  // index falls outside 1..dim.
  std::optional<int> lookup(std::string_view name, int line, int col) const;

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int slot) const { return names_[slot]; }

 private:
  int dim_;
  std::vector<std::string> prefixes_;
  std::vector<std::string> names_;
};

struct ParamTable {
  std::vector<std::string> names;
  std::vector<double> values;

  std::optional<int> find(std::string_view name) const;
  void set(const std::string& name, double value);
};

// Parses one expression. Errors carry 1-based line/column of the offending
// byte within `text`.
Expr parse_expression(std::string_view text, const SymbolTable& symbols, const ParamTable& params);

// Canonical text form; parse(print(e)) prints identically.
std::string print(const Expr& e);

struct EvalEnv {
  std::span<const double> vars;
  std::span<const double> params;
};

// IEEE evaluation. Throws DomainError for log of non-positive, division by
// zero, negative sqrt, non-integer power of a negative base, or overflow.
double eval(const Expr& e, const EvalEnv& env);

struct Derivs {
  double value = 0.0;
  Eigen::VectorXd gradient;  // over all variable slots
  Eigen::MatrixXd hessian;
};

// Exact first and second derivatives by forward-mode propagation of Jet2.
Derivs eval_derivs(const Expr& e, const EvalEnv& env);
Jet2 eval_jet(const Expr& e, std::span<const Jet2> vars, std::span<const double> params);

bool depends_on(const Expr& e, int slot);
bool has_variables(const Expr& e);

// ---------------------------------------------------------------------------
// System description files.

struct DomainInterval {
  double min = 0.0;
  double max = 1.0;
  bool periodic = false;
};

struct SystemSpec {
  std::string name;
  int dim = 1;
  Expr lagrangian;  // over SymbolTable::lagrangian(dim)
  std::optional<std::vector<std::vector<Expr>>> metric;  // over configuration(dim)
  std::optional<Expr> potential;                          // over configuration(dim)
  ParamTable parameters;
  std::vector<DomainInterval> domain;
};

// Parse and validate a JSON system description:
//   {"name", "dim", "lagrangian", "metric"?, "potential"?, "parameters", "domain"}
// Expression diagnostics keep the line/col inside the expression string and
// record the offending field name (ParseError::field()).
SystemSpec parse_system_spec(std::string_view json_text);
SystemSpec load_system_spec(const std::filesystem::path& path);

// Formats a parse diagnostic the way the CLI and golden files show it:
// "<field>:<line>:<col>: <detail>", or "<line>:<col>: <detail>" without a field.
std::string format_diagnostic(const ParseError& err);

}  // namespace bmech
