#include "dirsens/expressions.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dirsens::expr {

namespace {

constexpr double kKinkTol = 1e-9;

double pow_int(double v, int k) {
  if (k == 0) return 1.0;
  if (k < 0) {
    if (v == 0.0) throw EvalDomain("power: zero base with negative exponent");
    return 1.0 / pow_int(v, -k);
  }
  double r = 1.0, base = v;
  int e = k;
  while (e > 0) {
    if (e & 1) r *= base;
    base *= base;
    e >>= 1;
  }
  return r;
}

struct Dual {
  double v = 0.0;
  double d = 0.0;
};

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Expression

Expression Expression::constant(double c) {
  Expression e;
  e.nodes_.clear();
  e.root_ = e.add({Op::Constant, c, -1, 0, -1, -1});
  return e;
}

Expression Expression::variable(const std::string& name, int index) {
  Expression e;
  e.nodes_.clear();
  e.root_ = e.add({Op::Variable, 0.0, index, 0, -1, -1});
  while (static_cast<int>(e.names_.size()) <= index) e.names_.emplace_back();
  e.names_[static_cast<size_t>(index)] = name;
  return e;
}

int Expression::graft(const Expression& other) {
  const int base = static_cast<int>(nodes_.size());
  for (Node n : other.nodes_) {
    if (n.a >= 0) n.a += base;
    if (n.b >= 0) n.b += base;
    nodes_.push_back(n);
  }
  if (other.names_.size() > names_.size()) names_.resize(other.names_.size());
  for (size_t i = 0; i < other.names_.size(); ++i)
    if (!other.names_[i].empty()) names_[i] = other.names_[i];
  return base + other.root_;
}

Expression Expression::unary(Op op, Expression child) {
  // Fold negation of a literal so "-2" round-trips as a constant.
  if (op == Op::Neg && child.nodes_.size() == 1 &&
      child.nodes_.front().op == Op::Constant)
    return constant(-child.nodes_.front().value);
  Expression e;
  e.nodes_.clear();
  const int c = e.graft(child);
  e.root_ = e.add({op, 0.0, -1, 0, c, -1});
  return e;
}

Expression Expression::binary(Op op, Expression lhs, Expression rhs) {
  Expression e;
  e.nodes_.clear();
  const int a = e.graft(lhs);
  const int b = e.graft(rhs);
  e.root_ = e.add({op, 0.0, -1, 0, a, b});
  return e;
}

Expression Expression::power(Expression base, int exponent) {
  Expression e;
  e.nodes_.clear();
  const int c = e.graft(base);
  e.root_ = e.add({Op::Pow, 0.0, -1, exponent, c, -1});
  return e;
}

double Expression::eval(const Vec& point) const {
  std::vector<double> val(nodes_.size());
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    const double a = n.a >= 0 ? val[static_cast<size_t>(n.a)] : 0.0;
    const double b = n.b >= 0 ? val[static_cast<size_t>(n.b)] : 0.0;
    switch (n.op) {
      case Op::Constant: val[i] = n.value; break;
      case Op::Variable:
        if (n.var < 0 || n.var >= point.size())
          throw ExprError("eval: unbound variable index " + std::to_string(n.var));
        val[i] = point[n.var];
        break;
      case Op::Add: val[i] = a + b; break;
      case Op::Sub: val[i] = a - b; break;
      case Op::Mul: val[i] = a * b; break;
      case Op::Div:
        if (b == 0.0) throw EvalDomain("division by zero");
        val[i] = a / b;
        break;
      case Op::Neg: val[i] = -a; break;
      case Op::Pow: val[i] = pow_int(a, n.ipow); break;
      case Op::Exp: val[i] = std::exp(a); break;
      case Op::Log:
        if (a <= 0.0) throw EvalDomain("log of nonpositive argument");
        val[i] = std::log(a);
        break;
      case Op::Sin: val[i] = std::sin(a); break;
      case Op::Cos: val[i] = std::cos(a); break;
      case Op::Abs: val[i] = std::abs(a); break;
      case Op::Min: val[i] = std::min(a, b); break;
      case Op::Max: val[i] = std::max(a, b); break;
      case Op::Sqrt:
        if (a < 0.0) throw EvalDomain("sqrt of negative argument");
        val[i] = std::sqrt(a);
        break;
    }
    if (!std::isfinite(val[i])) throw EvalDomain("non-finite intermediate value");
  }
  return val[static_cast<size_t>(root_)];
}

double Expression::grad_component(const Vec& point, int var_index) const {
  std::vector<Dual> val(nodes_.size());
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    const Dual a = n.a >= 0 ? val[static_cast<size_t>(n.a)] : Dual{};
    const Dual b = n.b >= 0 ? val[static_cast<size_t>(n.b)] : Dual{};
    Dual& r = val[i];
    switch (n.op) {
      case Op::Constant: r = {n.value, 0.0}; break;
      case Op::Variable:
        if (n.var < 0 || n.var >= point.size())
          throw ExprError("grad: unbound variable index " + std::to_string(n.var));
        r = {point[n.var], n.var == var_index ? 1.0 : 0.0};
        break;
      case Op::Add: r = {a.v + b.v, a.d + b.d}; break;
      case Op::Sub: r = {a.v - b.v, a.d - b.d}; break;
      case Op::Mul: r = {a.v * b.v, a.d * b.v + a.v * b.d}; break;
      case Op::Div:
        if (b.v == 0.0) throw EvalDomain("division by zero");
        r = {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
        break;
      case Op::Neg: r = {-a.v, -a.d}; break;
      case Op::Pow:
        r.v = pow_int(a.v, n.ipow);
        r.d = n.ipow == 0 ? 0.0 : n.ipow * pow_int(a.v, n.ipow - 1) * a.d;
        break;
      case Op::Exp: r = {std::exp(a.v), std::exp(a.v) * a.d}; break;
      case Op::Log:
        if (a.v <= 0.0) throw EvalDomain("log of nonpositive argument");
        r = {std::log(a.v), a.d / a.v};
        break;
      case Op::Sin: r = {std::sin(a.v), std::cos(a.v) * a.d}; break;
      case Op::Cos: r = {std::cos(a.v), -std::sin(a.v) * a.d}; break;
      case Op::Abs:
        if (std::abs(a.v) <= kKinkTol && std::abs(a.d) > 0.0)
          throw NonSmoothPoint("abs has an active kink");
        r = {std::abs(a.v), a.v >= 0.0 ? a.d : -a.d};
        break;
      case Op::Min:
        if (std::abs(a.v - b.v) <= kKinkTol) {
          if (std::abs(a.d - b.d) > 1e-12) throw NonSmoothPoint("min has an active kink");
          r = {std::min(a.v, b.v), a.d};
        } else {
          r = a.v < b.v ? a : b;
        }
        break;
      case Op::Max:
        if (std::abs(a.v - b.v) <= kKinkTol) {
          if (std::abs(a.d - b.d) > 1e-12) throw NonSmoothPoint("max has an active kink");
          r = {std::max(a.v, b.v), a.d};
        } else {
          r = a.v > b.v ? a : b;
        }
        break;
      case Op::Sqrt:
        if (a.v < 0.0) throw EvalDomain("sqrt of negative argument");
        if (a.v == 0.0) {
          if (std::abs(a.d) > 0.0) throw EvalDomain("sqrt derivative at zero");
          r = {0.0, 0.0};
        } else {
          r = {std::sqrt(a.v), a.d / (2.0 * std::sqrt(a.v))};
        }
        break;
    }
    if (!std::isfinite(r.v) || !std::isfinite(r.d))
      throw EvalDomain("non-finite intermediate value");
  }
  return val[static_cast<size_t>(root_)].d;
}

Vec Expression::grad(const Vec& point, const std::vector<int>& wrt) const {
  Vec g(static_cast<Eigen::Index>(wrt.size()));
  for (size_t i = 0; i < wrt.size(); ++i)
    g[static_cast<Eigen::Index>(i)] = grad_component(point, wrt[i]);
  return g;
}

bool Expression::contains_kinks() const {
  for (const Node& n : nodes_)
    if (n.op == Op::Abs || n.op == Op::Min || n.op == Op::Max) return true;
  return false;
}

bool Expression::uses_var_in(int lo, int hi) const {
  for (const Node& n : nodes_)
    if (n.op == Op::Variable && n.var >= lo && n.var < hi) return true;
  return false;
}

namespace {

int precedence(Op op) {
  switch (op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;
  }
}

}  // namespace

std::string Expression::print() const {
  // Recursive precedence-aware printer; parse(print(e)) rebuilds e.
  std::string out;
  auto rec = [&](auto&& self, int idx, int parent_prec) -> std::string {
    const Node& n = nodes_[static_cast<size_t>(idx)];
    std::string s;
    switch (n.op) {
      case Op::Constant: s = fmt_double(n.value); break;
      case Op::Variable: s = names_[static_cast<size_t>(n.var)]; break;
      case Op::Add: s = self(self, n.a, 1) + " + " + self(self, n.b, 2); break;
      case Op::Sub: s = self(self, n.a, 1) + " - " + self(self, n.b, 2); break;
      case Op::Mul: s = self(self, n.a, 2) + "*" + self(self, n.b, 3); break;
      case Op::Div: s = self(self, n.a, 2) + "/" + self(self, n.b, 3); break;
      case Op::Neg: s = "-" + self(self, n.a, 3); break;
      case Op::Pow: s = self(self, n.a, 5) + "^" + std::to_string(n.ipow); break;
      case Op::Exp: s = "exp(" + self(self, n.a, 0) + ")"; break;
      case Op::Log: s = "log(" + self(self, n.a, 0) + ")"; break;
      case Op::Sin: s = "sin(" + self(self, n.a, 0) + ")"; break;
      case Op::Cos: s = "cos(" + self(self, n.a, 0) + ")"; break;
      case Op::Abs: s = "abs(" + self(self, n.a, 0) + ")"; break;
      case Op::Sqrt: s = "sqrt(" + self(self, n.a, 0) + ")"; break;
      case Op::Min: s = "min(" + self(self, n.a, 0) + ", " + self(self, n.b, 0) + ")"; break;
      case Op::Max: s = "max(" + self(self, n.a, 0) + ", " + self(self, n.b, 0) + ")"; break;
    }
    if (precedence(n.op) < parent_prec &&
        (n.op == Op::Add || n.op == Op::Sub || n.op == Op::Mul || n.op == Op::Div ||
         n.op == Op::Neg || n.op == Op::Pow))
      return "(" + s + ")";
    return s;
  };
  out = rec(rec, root_, 0);
  return out;
}

bool Expression::structurally_equal(const Expression& other) const {
  auto rec = [&](auto&& self, int i, int j) -> bool {
    const Node& a = nodes_[static_cast<size_t>(i)];
    const Node& b = other.nodes_[static_cast<size_t>(j)];
    if (a.op != b.op) return false;
    switch (a.op) {
      case Op::Constant: return a.value == b.value;
      case Op::Variable: return a.var == b.var;
      case Op::Pow: return a.ipow == b.ipow && self(self, a.a, b.a);
      default: break;
    }
    if ((a.a >= 0) != (b.a >= 0) || (a.b >= 0) != (b.b >= 0)) return false;
    if (a.a >= 0 && !self(self, a.a, b.a)) return false;
    if (a.b >= 0 && !self(self, a.b, b.b)) return false;
    return true;
  };
  return rec(rec, root_, other.root_);
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct Token {
  enum Kind { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };
  Kind kind = End;
  double number = 0.0;
  std::string ident;
  int line = 1, col = 1;
};

class Lexer {
 public:
  Lexer(const std::string& s, int line) : s_(s), line_(line) {}

  Token next() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    Token t;
    t.line = line_;
    t.col = static_cast<int>(pos_) + 1;
    if (pos_ >= s_.size()) { t.kind = Token::End; return t; }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      size_t used = 0;
      t.number = std::stod(s_.substr(pos_), &used);
      pos_ += used;
      t.kind = Token::Number;
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t end = pos_;
      while (end < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_'))
        ++end;
      t.ident = s_.substr(pos_, end - pos_);
      pos_ = end;
      t.kind = Token::Ident;
      return t;
    }
    ++pos_;
    switch (c) {
      case '+': t.kind = Token::Plus; return t;
      case '-': t.kind = Token::Minus; return t;
      case '*': t.kind = Token::Star; return t;
      case '/': t.kind = Token::Slash; return t;
      case '^': t.kind = Token::Caret; return t;
      case '(': t.kind = Token::LParen; return t;
      case ')': t.kind = Token::RParen; return t;
      case ',': t.kind = Token::Comma; return t;
      default: throw ParseError(std::string("unexpected character '") + c + "'", line_, t.col);
    }
  }

 private:
  const std::string& s_;
  size_t pos_ = 0;
  int line_;
};

class ExprParser {
 public:
  ExprParser(const std::string& text, const std::map<std::string, int>& vars, int line)
      : lexer_(text, line), vars_(vars), line_(line) {
    advance();
  }

  Expression parse() {
    Expression e = expression();
    if (cur_.kind != Token::End)
      throw ParseError("trailing input after expression", cur_.line, cur_.col);
    return e;
  }

 private:
  void advance() { cur_ = lexer_.next(); }

  Expression expression() {
    Expression lhs = term();
    while (cur_.kind == Token::Plus || cur_.kind == Token::Minus) {
      const bool plus = cur_.kind == Token::Plus;
      advance();
      Expression rhs = term();
      lhs = Expression::binary(plus ? Op::Add : Op::Sub, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  Expression term() {
    Expression lhs = unary();
    while (cur_.kind == Token::Star || cur_.kind == Token::Slash) {
      const bool mul = cur_.kind == Token::Star;
      advance();
      Expression rhs = unary();
      lhs = Expression::binary(mul ? Op::Mul : Op::Div, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  Expression unary() {
    if (cur_.kind == Token::Minus) {
      advance();
      return Expression::unary(Op::Neg, unary());
    }
    return power();
  }

  Expression power() {
    Expression base = atom();
    if (cur_.kind == Token::Caret) {
      advance();
      int sign = 1;
      if (cur_.kind == Token::Minus) { sign = -1; advance(); }
      if (cur_.kind != Token::Number || cur_.number != std::floor(cur_.number))
        throw ParseError("power exponent must be an integer literal", cur_.line, cur_.col);
      const int e = sign * static_cast<int>(cur_.number);
      advance();
      return Expression::power(std::move(base), e);
    }
    return base;
  }

  Expression atom() {
    if (cur_.kind == Token::Number) {
      Expression e = Expression::constant(cur_.number);
      advance();
      return e;
    }
    if (cur_.kind == Token::LParen) {
      advance();
      Expression e = expression();
      expect(Token::RParen, ")");
      return e;
    }
    if (cur_.kind == Token::Ident) {
      const std::string name = cur_.ident;
      const Token at = cur_;
      advance();
      if (cur_.kind == Token::LParen) {
        advance();
        Expression a = expression();
        if (name == "min" || name == "max") {
          expect(Token::Comma, ",");
          Expression b = expression();
          expect(Token::RParen, ")");
          return Expression::binary(name == "min" ? Op::Min : Op::Max, std::move(a), std::move(b));
        }
        expect(Token::RParen, ")");
        if (name == "exp") return Expression::unary(Op::Exp, std::move(a));
        if (name == "log") return Expression::unary(Op::Log, std::move(a));
        if (name == "sin") return Expression::unary(Op::Sin, std::move(a));
        if (name == "cos") return Expression::unary(Op::Cos, std::move(a));
        if (name == "abs") return Expression::unary(Op::Abs, std::move(a));
        if (name == "sqrt") return Expression::unary(Op::Sqrt, std::move(a));
        throw ParseError("unknown function '" + name + "'", at.line, at.col);
      }
      auto it = vars_.find(name);
      if (it == vars_.end())
        throw ParseError("undeclared variable '" + name + "'", at.line, at.col);
      return Expression::variable(name, it->second);
    }
    throw ParseError("expected expression", cur_.line, cur_.col);
  }

  void expect(Token::Kind k, const char* what) {
    if (cur_.kind != k)
      throw ParseError(std::string("expected '") + what + "'", cur_.line, cur_.col);
    advance();
  }

  Lexer lexer_;
  Token cur_;
  const std::map<std::string, int>& vars_;
  int line_;
};

}  // namespace

Expression parse_expression(const std::string& text, const std::map<std::string, int>& vars) {
  return ExprParser(text, vars, 1).parse();
}

// ---------------------------------------------------------------------------
// ParametricProblem

bool ParametricProblem::smooth_model() const {
  if (objective.contains_kinks()) return false;
  for (const auto& c : constraints)
    if (c.contains_kinks()) return false;
  return true;
}

Vec ParametricProblem::joint(const Vec& x, const Vec& y) const {
  Vec z(n + m);
  z.head(n) = x;
  z.tail(m) = y;
  return z;
}

Vec ParametricProblem::constraint_values(const Vec& x, const Vec& y) const {
  const Vec z = joint(x, y);
  Vec v(p());
  for (int i = 0; i < p(); ++i) v[i] = constraints[static_cast<size_t>(i)].eval(z);
  return v;
}

Mat ParametricProblem::constraint_jacobian(const Vec& x, const Vec& y) const {
  const Vec z = joint(x, y);
  Mat jac(p(), joint_dim());
  for (int i = 0; i < p(); ++i)
    for (int j = 0; j < joint_dim(); ++j)
      jac(i, j) = constraints[static_cast<size_t>(i)].grad_component(z, j);
  return jac;
}

Vec ParametricProblem::objective_gradient(const Vec& x, const Vec& y) const {
  const Vec z = joint(x, y);
  Vec g(joint_dim());
  for (int j = 0; j < joint_dim(); ++j) g[j] = objective.grad_component(z, j);
  return g;
}

bool ParametricProblem::feasible(const Vec& x, const Vec& y) const {
  const Vec v = constraint_values(x, y);
  int off = 0;
  for (const auto& g : gamma) {
    if (!geometry::factor_contains(g, v.segment(off, g.dim()))) return false;
    off += g.dim();
  }
  return true;
}

std::vector<std::pair<int, int>> ParametricProblem::factor_blocks() const {
  std::vector<std::pair<int, int>> blocks;
  int off = 0;
  for (const auto& g : gamma) {
    blocks.emplace_back(off, g.dim());
    off += g.dim();
  }
  return blocks;
}

void ParametricProblem::validate() const {
  int total = 0;
  for (const auto& g : gamma) total += g.dim();
  if (total != p())
    throw ArityError("Gamma dimension " + std::to_string(total) +
                     " does not match constraint count " + std::to_string(p()));
  if (y_lo.size() != m || y_hi.size() != m)
    throw ArityError("bounding box does not cover all decision variables");
  for (int i = 0; i < m; ++i)
    if (!(y_lo[i] < y_hi[i])) throw ArityError("bounding box has empty volume");
}

// ---------------------------------------------------------------------------
// Problem files

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  size_t e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

std::vector<std::string> split_top_commas(const std::string& s) {
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(' || c == '[' || c == '{') ++depth;
    if (c == ')' || c == ']' || c == '}') --depth;
    if (c == ',' && depth == 0) {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) parts.push_back(trim(cur));
  return parts;
}

std::vector<double> parse_number_list(const std::string& body, int line) {
  std::vector<double> vals;
  for (const auto& piece : split_top_commas(body)) {
    try {
      vals.push_back(std::stod(piece));
    } catch (const std::exception&) {
      throw ParseError("expected number, got '" + piece + "'", line, 1);
    }
  }
  return vals;
}

}  // namespace

ParametricProblem parse_problem(const std::string& text) {
  ParametricProblem prob;
  std::map<std::string, int> vars;
  std::vector<bool> box_seen;
  bool have_min = false;

  // Raw rows of (expressions, kind string, payload) to fold afterwards.
  struct StRow {
    std::vector<Expression> exprs;
    std::string kind;
    std::string payload;
    int line;
  };
  std::vector<StRow> st_rows;

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::string rest = trim(line.substr(key.size()));

    if (key == "problem") {
      prob.name = rest;
    } else if (key == "params" || key == "vars") {
      const bool is_params = key == "params";
      const char expect = is_params ? 'n' : 'm';
      size_t eq = rest.find('=');
      if (eq == std::string::npos || trim(rest.substr(0, eq)) != std::string(1, expect))
        throw ParseError(std::string("expected ") + expect + "=<int>", lineno, 1);
      const int v = std::stoi(rest.substr(eq + 1));
      if (v < 0) throw ParseError("dimension must be nonnegative", lineno, 1);
      (is_params ? prob.n : prob.m) = v;
      vars.clear();
      for (int i = 0; i < prob.n; ++i) vars["x" + std::to_string(i + 1)] = i;
      for (int i = 0; i < prob.m; ++i) vars["y" + std::to_string(i + 1)] = prob.n + i;
      if (!is_params) {
        prob.y_lo = Vec::Constant(prob.m, -1.0);
        prob.y_hi = Vec::Constant(prob.m, 1.0);
        box_seen.assign(static_cast<size_t>(prob.m), false);
      }
    } else if (key == "box") {
      // box y<i> in [lo, hi]
      size_t in_pos = rest.find(" in ");
      if (in_pos == std::string::npos) throw ParseError("expected 'box y<i> in [lo, hi]'", lineno, 1);
      const std::string var = trim(rest.substr(0, in_pos));
      if (var.size() < 2 || var[0] != 'y')
        throw ParseError("box must bound a y variable", lineno, 1);
      const int idx = std::stoi(var.substr(1)) - 1;
      if (idx < 0 || idx >= prob.m) throw ParseError("box variable out of range", lineno, 1);
      std::string body = trim(rest.substr(in_pos + 4));
      if (body.size() < 2 || body.front() != '[' || body.back() != ']')
        throw ParseError("expected [lo, hi]", lineno, 1);
      auto vals = parse_number_list(body.substr(1, body.size() - 2), lineno);
      if (vals.size() != 2) throw ParseError("expected two box bounds", lineno, 1);
      prob.y_lo[idx] = vals[0];
      prob.y_hi[idx] = vals[1];
      box_seen[static_cast<size_t>(idx)] = true;
    } else if (key == "min") {
      prob.objective = ExprParser(rest, vars, lineno).parse();
      have_min = true;
    } else if (key == "st") {
      size_t in_pos = rest.rfind(" in ");
      if (in_pos == std::string::npos)
        throw ParseError("expected 'st <expr> in <set>'", lineno, 1);
      std::string expr_part = trim(rest.substr(0, in_pos));
      std::string set_part = trim(rest.substr(in_pos + 4));
      StRow row;
      row.line = lineno;
      if (!expr_part.empty() && expr_part.front() == '(' && expr_part.back() == ')') {
        for (const auto& piece : split_top_commas(expr_part.substr(1, expr_part.size() - 2)))
          row.exprs.push_back(ExprParser(piece, vars, lineno).parse());
      } else {
        row.exprs.push_back(ExprParser(expr_part, vars, lineno).parse());
      }
      size_t brace = set_part.find('{');
      if (brace == std::string::npos) {
        row.kind = set_part;
      } else {
        row.kind = trim(set_part.substr(0, brace));
        if (set_part.back() != '}') throw ParseError("expected closing '}'", lineno, 1);
        row.payload = set_part.substr(brace + 1, set_part.size() - brace - 2);
      }
      if (row.kind != "NonPositive" && row.kind != "Zero" && row.kind != "Poly")
        throw ParseError("unknown set kind '" + row.kind + "'", lineno, 1);
      st_rows.push_back(std::move(row));
    } else {
      throw ParseError("unknown directive '" + key + "'", lineno, 1);
    }
  }

  if (!have_min) throw ParseError("problem lacks a 'min' line", lineno, 1);
  for (size_t i = 0; i < box_seen.size(); ++i)
    if (!box_seen[i])
      throw ParseError("missing box line for y" + std::to_string(i + 1), lineno, 1);

  // Fold consecutive rows of the same simple kind into one factor.
  for (size_t i = 0; i < st_rows.size();) {
    const StRow& row = st_rows[i];
    if (row.kind == "Poly") {
      const int d = static_cast<int>(row.exprs.size());
      geometry::Polyhedron poly(d);
      for (const auto& piece : split_top_commas(row.payload)) {
        std::string body = trim(piece);
        if (body.size() < 2 || body.front() != '[' || body.back() != ']')
          throw ParseError("Poly rows must look like [a...,b]", row.line, 1);
        auto vals = parse_number_list(body.substr(1, body.size() - 2), row.line);
        if (static_cast<int>(vals.size()) != d + 1)
          throw ArityError("Poly row width " + std::to_string(vals.size()) +
                           " does not match factor dimension " + std::to_string(d) + "+1");
        Vec a(d);
        for (int j = 0; j < d; ++j) a[j] = vals[static_cast<size_t>(j)];
        poly.add_ineq(a, vals.back());
      }
      for (auto& e : st_rows[i].exprs) prob.constraints.push_back(std::move(e));
      prob.gamma.push_back(geometry::GammaFactor::poly_set(std::move(poly)));
      ++i;
      continue;
    }
    size_t j = i;
    int width = 0;
    while (j < st_rows.size() && st_rows[j].kind == row.kind && st_rows[j].payload.empty() &&
           st_rows[j].kind != "Poly") {
      width += static_cast<int>(st_rows[j].exprs.size());
      for (auto& e : st_rows[j].exprs) prob.constraints.push_back(std::move(e));
      ++j;
    }
    prob.gamma.push_back(row.kind == "NonPositive" ? geometry::GammaFactor::non_positive(width)
                                                   : geometry::GammaFactor::zero(width));
    i = j;
  }

  prob.validate();
  return prob;
}

std::string print_problem(const ParametricProblem& prob) {
  std::ostringstream out;
  out << "problem " << prob.name << "\n";
  out << "params n=" << prob.n << "\n";
  out << "vars m=" << prob.m << "\n";
  for (int i = 0; i < prob.m; ++i)
    out << "box y" << (i + 1) << " in [" << fmt_double(prob.y_lo[i]) << ", "
        << fmt_double(prob.y_hi[i]) << "]\n";
  out << "min " << prob.objective.print() << "\n";
  int row = 0;
  for (const auto& g : prob.gamma) {
    if (g.kind == geometry::GammaFactor::Kind::Poly) {
      out << "st (";
      for (int i = 0; i < g.dim(); ++i)
        out << (i ? ", " : "") << prob.constraints[static_cast<size_t>(row + i)].print();
      out << ") in Poly{";
      bool first = true;
      for (const auto& r : g.poly.ineqs) {
        out << (first ? "" : ", ") << "[";
        for (int j = 0; j < g.poly.dim; ++j) out << fmt_double(r.a[j]) << ", ";
        out << fmt_double(r.b) << "]";
        first = false;
      }
      out << "}\n";
      row += g.dim();
    } else {
      for (int i = 0; i < g.dim(); ++i) {
        out << "st " << prob.constraints[static_cast<size_t>(row)].print() << " in "
            << g.kind_name() << "\n";
        ++row;
      }
    }
  }
  return out.str();
}

}  // namespace dirsens::expr
