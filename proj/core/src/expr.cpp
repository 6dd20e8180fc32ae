#include <charconv>
#include <cmath>
#include <string>

#include "bmech/sysdsl.hpp"

namespace bmech {

namespace {

const char* fn_name(UnaryFn fn) {
  switch (fn) {
    case UnaryFn::Sin: return "sin";
    case UnaryFn::Cos: return "cos";
    case UnaryFn::Exp: return "exp";
    case UnaryFn::Log: return "log";
    case UnaryFn::Sqrt: return "sqrt";
    case UnaryFn::Abs: return "abs";
  }
  return "?";
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Binding strength used by the printer; mirrors the grammar.
int precedence(const ExprNode& n) {
  using K = ExprNode::Kind;
  switch (n.kind) {
    case K::Add:
    case K::Sub: return 1;
    case K::Mul:
    case K::Div: return 2;
    case K::Neg: return 3;
    case K::Pow: return 4;
    case K::Const: return n.value < 0 || std::signbit(n.value) ? 3 : 5;
    default: return 5;
  }
}

void print_into(const Expr& e, std::string& out);

void print_operand(const Expr& e, int min_prec, std::string& out) {
  if (precedence(*e) < min_prec) {
    out += '(';
    print_into(e, out);
    out += ')';
  } else {
    print_into(e, out);
  }
}

void print_into(const Expr& e, std::string& out) {
  using K = ExprNode::Kind;
  const ExprNode& n = *e;
  switch (n.kind) {
    case K::Const:
      if (std::signbit(n.value)) {
        out += '-';
        out += format_number(-n.value);
      } else {
        out += format_number(n.value);
      }
      return;
    case K::Param:
    case K::Var: out += n.name; return;
    case K::Neg:
      out += '-';
      print_operand(n.lhs, 3, out);
      return;
    case K::Add:
    case K::Sub:
      print_operand(n.lhs, 1, out);
      out += n.kind == K::Add ? " + " : " - ";
      print_operand(n.rhs, 2, out);
      return;
    case K::Mul:
    case K::Div:
      print_operand(n.lhs, 2, out);
      out += n.kind == K::Mul ? "*" : "/";
      print_operand(n.rhs, 3, out);
      return;
    case K::Pow:
      print_operand(n.lhs, 5, out);
      out += '^';
      print_operand(n.rhs, 3, out);
      return;
    case K::Call:
      out += fn_name(n.fn);
      out += '(';
      print_into(n.lhs, out);
      out += ')';
      return;
  }
}

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string("non-finite result in ") + what);
  return v;
}

bool is_integer(double p) { return std::nearbyint(p) == p && std::abs(p) < 1e9; }

double apply_fn(UnaryFn fn, double u) {
  switch (fn) {
    case UnaryFn::Sin: return std::sin(u);
    case UnaryFn::Cos: return std::cos(u);
    case UnaryFn::Exp: return checked(std::exp(u), "exp");
    case UnaryFn::Log:
      if (!(u > 0)) throw DomainError("log of non-positive value " + format_number(u));
      return std::log(u);
    case UnaryFn::Sqrt:
      if (u < 0) throw DomainError("sqrt of negative value " + format_number(u));
      return std::sqrt(u);
    case UnaryFn::Abs: return std::abs(u);
  }
  return 0.0;
}

double eval_node(const ExprNode& n, const EvalEnv& env) {
  using K = ExprNode::Kind;
  switch (n.kind) {
    case K::Const: return n.value;
    case K::Param: return n.slot < 0 ? n.value : env.params[n.slot];
    case K::Var: return env.vars[n.slot];
    case K::Neg: return -eval_node(*n.lhs, env);
    case K::Add: return checked(eval_node(*n.lhs, env) + eval_node(*n.rhs, env), "addition");
    case K::Sub: return checked(eval_node(*n.lhs, env) - eval_node(*n.rhs, env), "subtraction");
    case K::Mul: return checked(eval_node(*n.lhs, env) * eval_node(*n.rhs, env), "product");
    case K::Div: {
      const double a = eval_node(*n.lhs, env);
      const double b = eval_node(*n.rhs, env);
      if (b == 0.0) throw DomainError("division by zero");
      return checked(a / b, "division");
    }
    case K::Pow: {
      const double a = eval_node(*n.lhs, env);
      const double p = eval_node(*n.rhs, env);
      if (a < 0 && !is_integer(p)) throw DomainError("non-integer power of negative base");
      if (a == 0 && p < 0) throw DomainError("negative power of zero");
      return checked(std::pow(a, p), "power");
    }
    case K::Call: return apply_fn(n.fn, eval_node(*n.lhs, env));
  }
  return 0.0;
}

Jet2 jet_node(const ExprNode& n, std::span<const Jet2> vars, std::span<const double> params) {
  using K = ExprNode::Kind;
  switch (n.kind) {
    case K::Const: return Jet2(n.value);
    case K::Param: return Jet2(n.slot < 0 ? n.value : params[n.slot]);
    case K::Var: return vars[n.slot];
    case K::Neg: return -jet_node(*n.lhs, vars, params);
    case K::Add: return jet_node(*n.lhs, vars, params) + jet_node(*n.rhs, vars, params);
    case K::Sub: return jet_node(*n.lhs, vars, params) - jet_node(*n.rhs, vars, params);
    case K::Mul: return jet_node(*n.lhs, vars, params) * jet_node(*n.rhs, vars, params);
    case K::Div: {
      Jet2 a = jet_node(*n.lhs, vars, params);
      Jet2 b = jet_node(*n.rhs, vars, params);
      if (b.v == 0.0) throw DomainError("division by zero");
      return a / b;
    }
    case K::Pow: {
      Jet2 a = jet_node(*n.lhs, vars, params);
      Jet2 p = jet_node(*n.rhs, vars, params);
      if (p.is_constant() && is_integer(p.v)) {
        if (a.v == 0 && p.v < 0) throw DomainError("negative power of zero");
        return powi(a, static_cast<int>(p.v));
      }
      if (a.v < 0) throw DomainError("non-integer power of negative base");
      if (a.v == 0) {
        if (p.is_constant() && p.v >= 2) return pow(a, p);
        throw DomainError("derivative of power at zero base");
      }
      return pow(a, p);
    }
    case K::Call: {
      Jet2 u = jet_node(*n.lhs, vars, params);
      switch (n.fn) {
        case UnaryFn::Sin: return sin(u);
        case UnaryFn::Cos: return cos(u);
        case UnaryFn::Exp: return exp(u);
        case UnaryFn::Log:
          if (!(u.v > 0)) throw DomainError("log of non-positive value " + format_number(u.v));
          return log(u);
        case UnaryFn::Sqrt:
          if (!(u.v > 0)) {
            if (u.v == 0 && u.is_constant()) return Jet2(0.0);
            throw DomainError("sqrt derivative at non-positive value " + format_number(u.v));
          }
          return sqrt(u);
        case UnaryFn::Abs: return abs(u);
      }
      return u;
    }
  }
  return Jet2();
}

}  // namespace

std::string print(const Expr& e) {
  std::string out;
  print_into(e, out);
  return out;
}

double eval(const Expr& e, const EvalEnv& env) { return eval_node(*e, env); }

Jet2 eval_jet(const Expr& e, std::span<const Jet2> vars, std::span<const double> params) {
  Jet2 r = jet_node(*e, vars, params);
  if (!std::isfinite(r.v) || (!r.is_constant() && (!r.g.allFinite() || !r.h.allFinite())))
    throw DomainError("non-finite value or derivative");
  return r;
}

Derivs eval_derivs(const Expr& e, const EvalEnv& env) {
  const int k = static_cast<int>(env.vars.size());
  std::vector<Jet2> vars;
  vars.reserve(k);
  for (int i = 0; i < k; ++i) vars.push_back(Jet2::variable(env.vars[i], i, k));
  Jet2 r = eval_jet(e, vars, env.params);
  return Derivs{r.v, r.gradient(k), r.hessian(k)};
}

bool depends_on(const Expr& e, int slot) {
  if (!e) return false;
  if (e->kind == ExprNode::Kind::Var) return e->slot == slot;
  return depends_on(e->lhs, slot) || depends_on(e->rhs, slot);
}

bool has_variables(const Expr& e) {
  if (!e) return false;
  if (e->kind == ExprNode::Kind::Var) return true;
  return has_variables(e->lhs) || has_variables(e->rhs);
}

}  // namespace bmech
