#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dirsens/geometry.hpp"
#include "dirsens/linalg.hpp"

namespace dirsens::expr {

struct ExprError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : ExprError {
  int line = 0, col = 0;
  ParseError(const std::string& msg, int l, int c)
      : ExprError(msg + " (line " + std::to_string(l) + ", col " + std::to_string(c) + ")"),
        line(l), col(c) {}
};
struct ArityError : ExprError {
  using ExprError::ExprError;
};
struct EvalDomain : ExprError {
  using ExprError::ExprError;
};
struct NonSmoothPoint : ExprError {
  using ExprError::ExprError;
};

enum class Op {
  Constant, Variable, Add, Sub, Mul, Div, Neg, Pow,
  Exp, Log, Sin, Cos, Abs, Min, Max, Sqrt
};

// Differentiable scalar expression over named variables x1..xn, y1..ym.
// Immutable after construction; eval and grad are pure.
class Expression {
 public:
  struct Node {
    Op op = Op::Constant;
    double value = 0.0;  // Constant
    int var = -1;        // Variable index into the joint (x, y) vector
    int ipow = 0;        // Pow exponent
    int a = -1, b = -1;  // children
  };

  Expression() { root_ = add({Op::Constant, 0.0, -1, 0, -1, -1}); }

  static Expression constant(double c);
  static Expression variable(const std::string& name, int index);
  static Expression unary(Op op, Expression child);
  static Expression binary(Op op, Expression lhs, Expression rhs);
  static Expression power(Expression base, int exponent);

  double eval(const Vec& point) const;
  // Derivative with respect to one joint coordinate, forward-mode duals.
  double grad_component(const Vec& point, int var_index) const;
  Vec grad(const Vec& point, const std::vector<int>& wrt) const;

  bool contains_kinks() const;  // abs / min / max present
  bool uses_var_in(int lo, int hi) const;
  std::string print() const;
  bool structurally_equal(const Expression& other) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  int root() const { return root_; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  int add(Node n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }
  int graft(const Expression& other);

  std::vector<Node> nodes_;
  std::vector<std::string> names_;  // indexed like vars that appear
  int root_ = -1;

  friend class Parser;
};

// Parses an expression over the given variable table (name -> joint index).
Expression parse_expression(const std::string& text,
                            const std::map<std::string, int>& vars);

// Bundle (n, m, f, P, Gamma) with a bounding box for the inner search.
struct ParametricProblem {
  std::string name = "problem";
  int n = 0;  // parameter dimension
  int m = 0;  // decision dimension
  Expression objective;
  std::vector<Expression> constraints;
  std::vector<geometry::GammaFactor> gamma;
  Vec y_lo, y_hi;

  int p() const { return static_cast<int>(constraints.size()); }
  int joint_dim() const { return n + m; }
  bool smooth_model() const;

  Vec joint(const Vec& x, const Vec& y) const;
  Vec constraint_values(const Vec& x, const Vec& y) const;
  // p x (n+m) Jacobian of P; NonSmoothPoint propagates from kinks.
  Mat constraint_jacobian(const Vec& x, const Vec& y) const;
  Vec objective_gradient(const Vec& x, const Vec& y) const;
  bool feasible(const Vec& x, const Vec& y) const;
  // (offset, width) of each Gamma factor inside the constraint vector.
  std::vector<std::pair<int, int>> factor_blocks() const;

  // Throws ArityError when factor widths do not match the constraint count,
  // or when the box is missing/inverted.
  void validate() const;
};

ParametricProblem parse_problem(const std::string& text);
std::string print_problem(const ParametricProblem& prob);

}  // namespace dirsens::expr
