#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "bmech/sysdsl.hpp"

namespace bmech {

SymbolTable::SymbolTable(int dim, std::vector<std::string> indexed_prefixes,
                         std::vector<std::string> scalars)
    : dim_(dim), prefixes_(std::move(indexed_prefixes)) {
  for (const auto& p : prefixes_)
    for (int i = 1; i <= dim_; ++i) names_.push_back(p + std::to_string(i));
  for (auto& s : scalars) names_.push_back(std::move(s));
}

SymbolTable SymbolTable::lagrangian(int dim) { return SymbolTable(dim, {"x", "v"}, {"t"}); }
SymbolTable SymbolTable::configuration(int dim) { return SymbolTable(dim, {"x"}); }
SymbolTable SymbolTable::boundary_values(int dim) { return SymbolTable(dim, {"xf", "xi"}); }
SymbolTable SymbolTable::boundary_phase(int dim) {
  return SymbolTable(dim, {"xf", "pf", "xi", "pi"});
}

std::optional<int> SymbolTable::lookup(std::string_view name, int line, int col) const {
  const int np = static_cast<int>(prefixes_.size());
  for (int k = 0; k < np; ++k) {
    const std::string& p = prefixes_[k];
    if (name.size() <= p.size() || name.substr(0, p.size()) != p) continue;
    std::string_view digits = name.substr(p.size());
    if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
      continue;
    long idx = 0;
    auto res = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
    if (res.ec != std::errc() || idx < 1 || idx > dim_) {
      throw DimensionMismatch(line, col,
                              "'" + std::string(name) + "' is outside dimension " +
                                  std::to_string(dim_));
    }
    return k * dim_ + static_cast<int>(idx - 1);
  }
  for (int s = np * dim_; s < size(); ++s)
    if (names_[s] == name) return s;
  return std::nullopt;
}

std::optional<int> ParamTable::find(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return std::nullopt;
}

void ParamTable::set(const std::string& name, double value) {
  if (auto i = find(name)) {
    values[*i] = value;
  } else {
    names.push_back(name);
    values.push_back(value);
  }
}

namespace {

constexpr int kMaxDepth = 200;
constexpr int kMaxNodes = 20000;

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End, Bad };

struct Token {
  Tok kind = Tok::End;
  std::string_view text;
  double number = 0.0;
  int line = 1;
  int col = 1;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::End: return "end of input";
    case Tok::Number: return "number " + std::string(t.text);
    case Tok::Ident: return "identifier '" + std::string(t.text) + "'";
    case Tok::Bad: {
      const auto c = static_cast<unsigned char>(t.text[0]);
      if (c >= 0x20 && c < 0x7f) return "'" + std::string(1, static_cast<char>(c)) + "'";
      char buf[16];
      std::snprintf(buf, sizeof buf, "byte 0x%02x", c);
      return buf;
    }
    default: return "'" + std::string(t.text) + "'";
  }
}

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_space();
    Token t;
    t.line = line_;
    t.col = col_;
    if (pos_ >= src_.size()) {
      t.kind = Tok::End;
      return t;
    }
    const std::size_t start = pos_;
    const char c = src_[pos_];
    if (is_digit(c) || (c == '.' && pos_ + 1 < src_.size() && is_digit(src_[pos_ + 1]))) {
      while (pos_ < src_.size() && is_digit(src_[pos_])) advance();
      if (pos_ < src_.size() && src_[pos_] == '.') {
        advance();
        while (pos_ < src_.size() && is_digit(src_[pos_])) advance();
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        std::size_t look = pos_ + 1;
        if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
        if (look < src_.size() && is_digit(src_[look])) {
          while (pos_ < look) advance();
          while (pos_ < src_.size() && is_digit(src_[pos_])) advance();
        }
      }
      t.kind = Tok::Number;
      t.text = src_.substr(start, pos_ - start);
      auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
      if (res.ec != std::errc() || !std::isfinite(t.number))
        throw ParseError(t.line, t.col, "number out of range: " + std::string(t.text));
      return t;
    }
    if (ident_start(c)) {
      while (pos_ < src_.size() && (ident_start(src_[pos_]) || is_digit(src_[pos_]))) advance();
      t.kind = Tok::Ident;
      t.text = src_.substr(start, pos_ - start);
      return t;
    }
    advance();
    t.text = src_.substr(start, 1);
    switch (c) {
      case '+': t.kind = Tok::Plus; break;
      case '-': t.kind = Tok::Minus; break;
      case '*': t.kind = Tok::Star; break;
      case '/': t.kind = Tok::Slash; break;
      case '^': t.kind = Tok::Caret; break;
      case '(': t.kind = Tok::LParen; break;
      case ')': t.kind = Tok::RParen; break;
      default: t.kind = Tok::Bad; break;
    }
    return t;
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  void skip_space() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c != ' ' && c != '\t' && c != '\n' && c != '\r') break;
      advance();
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

std::optional<UnaryFn> function_named(std::string_view s) {
  if (s == "sin") return UnaryFn::Sin;
  if (s == "cos") return UnaryFn::Cos;
  if (s == "exp") return UnaryFn::Exp;
  if (s == "log") return UnaryFn::Log;
  if (s == "sqrt") return UnaryFn::Sqrt;
  if (s == "abs") return UnaryFn::Abs;
  return std::nullopt;
}

Expr make_const(double v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Const;
  n->value = v;
  return n;
}

Expr make_binary(ExprNode::Kind k, Expr a, Expr b) {
  auto n = std::make_shared<ExprNode>();
  n->kind = k;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

const std::set<std::string> kOperand = {"'('", "'-'", "identifier", "number"};

class Parser {
 public:
  Parser(std::string_view text, const SymbolTable& symbols, const ParamTable& params)
      : lex_(text), symbols_(symbols), params_(params) {
    tok_ = lex_.next();
  }

  Expr parse() {
    Expr e = expression();
    if (tok_.kind != Tok::End)
      throw SyntaxError(tok_.line, tok_.col, {"'*'", "'+'", "'-'", "'/'", "'^'", "end of input"},
                        describe(tok_));
    return e;
  }

 private:
  void bump() {
    tok_ = lex_.next();
    if (++tokens_ > kMaxNodes) throw ParseError(tok_.line, tok_.col, "expression too long");
  }

  struct DepthGuard {
    Parser& p;
    explicit DepthGuard(Parser& parser) : p(parser) {
      if (++p.depth_ > kMaxDepth)
        throw ParseError(p.tok_.line, p.tok_.col, "expression nested too deeply");
    }
    ~DepthGuard() { --p.depth_; }
  };

  Expr expression() {
    DepthGuard guard(*this);
    Expr lhs = term();
    while (tok_.kind == Tok::Plus || tok_.kind == Tok::Minus) {
      const auto k = tok_.kind == Tok::Plus ? ExprNode::Kind::Add : ExprNode::Kind::Sub;
      bump();
      lhs = make_binary(k, lhs, term());
    }
    return lhs;
  }

  Expr term() {
    Expr lhs = unary();
    while (tok_.kind == Tok::Star || tok_.kind == Tok::Slash) {
      const auto k = tok_.kind == Tok::Star ? ExprNode::Kind::Mul : ExprNode::Kind::Div;
      bump();
      lhs = make_binary(k, lhs, unary());
    }
    return lhs;
  }

  Expr unary() {
    DepthGuard guard(*this);
    if (tok_.kind == Tok::Minus) {
      bump();
      auto n = std::make_shared<ExprNode>();
      n->kind = ExprNode::Kind::Neg;
      n->lhs = unary();
      return n;
    }
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (tok_.kind == Tok::Caret) {
      bump();
      return make_binary(ExprNode::Kind::Pow, base, unary());
    }
    return base;
  }

  void expect(Tok kind, const char* what) {
    if (tok_.kind != kind) throw SyntaxError(tok_.line, tok_.col, {what}, describe(tok_));
    bump();
  }

  Expr primary() {
    const Token t = tok_;
    switch (t.kind) {
      case Tok::Number:
        bump();
        return make_const(t.number);
      case Tok::LParen: {
        bump();
        Expr e = expression();
        if (tok_.kind != Tok::RParen)
          throw SyntaxError(tok_.line, tok_.col, {"')'", "'*'", "'+'", "'-'", "'/'", "'^'"},
                            describe(tok_));
        bump();
        return e;
      }
      case Tok::Ident: return identifier(t);
      default: throw SyntaxError(t.line, t.col, kOperand, describe(t));
    }
  }

  Expr identifier(const Token& t) {
    bump();
    if (auto fn = function_named(t.text)) {
      expect(Tok::LParen, "'('");
      auto n = std::make_shared<ExprNode>();
      n->kind = ExprNode::Kind::Call;
      n->fn = *fn;
      n->lhs = expression();
      expect(Tok::RParen, "')'");
      return n;
    }
    if (tok_.kind == Tok::LParen) throw UnknownIdentifier(t.line, t.col, std::string(t.text));
    if (auto slot = symbols_.lookup(t.text, t.line, t.col)) {
      auto n = std::make_shared<ExprNode>();
      n->kind = ExprNode::Kind::Var;
      n->slot = *slot;
      n->name = std::string(t.text);
      return n;
    }
    if (auto slot = params_.find(t.text)) {
      auto n = std::make_shared<ExprNode>();
      n->kind = ExprNode::Kind::Param;
      n->slot = *slot;
      n->name = std::string(t.text);
      return n;
    }
    if (t.text == "pi") {
      auto n = std::make_shared<ExprNode>();
      n->kind = ExprNode::Kind::Param;
      n->slot = -1;
      n->value = std::numbers::pi;
      n->name = "pi";
      return n;
    }
    throw UnknownIdentifier(t.line, t.col, std::string(t.text));
  }

  Lexer lex_;
  const SymbolTable& symbols_;
  const ParamTable& params_;
  Token tok_;
  int depth_ = 0;
  int tokens_ = 0;
};

}  // namespace

Expr parse_expression(std::string_view text, const SymbolTable& symbols, const ParamTable& params) {
  return Parser(text, symbols, params).parse();
}

}  // namespace bmech
