#pragma once

// Univariate expression language for problem data:
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' ['+' | '-'] NUMBER)?
//   primary := NUMBER | 'x' | 'pi' | FUNC '(' expr ')' | '(' expr ')'
//   FUNC    := sin | cos | tan | exp | log | sqrt | abs | tanh
//
// The only variable is `x`, the coordinate of the dimension the expression is
// attached to.

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sephjb/grid.hpp"

namespace sephjb {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, const std::string& message);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class EvalError : public std::runtime_error {
 public:
  EvalError(Index node, double coordinate, const std::string& message);
  Index node() const { return node_; }
  double coordinate() const { return coordinate_; }

 private:
  Index node_;
  double coordinate_;
};

class Expr {
 public:
  enum class Kind { number, variable, pi, negate, add, sub, mul, div, pow, call };
  enum class Func { sin, cos, tan, exp, log, sqrt, abs, tanh };

  /// The constant 1.
  Expr();

  static Expr number(double v);
  static Expr variable();

  Kind kind() const { return node_->kind; }
  double value() const { return node_->value; }  // number literal or exponent
  Func func() const { return node_->func; }
  Expr lhs() const;
  Expr rhs() const;

  double eval(double x) const;
  /// Fully parenthesized text that parses back to an equal tree.
  std::string to_string() const;
  /// True for a literal constant, with its value in `out`.
  bool is_constant(double* out = nullptr) const;
  /// True if `x` occurs anywhere in the tree.
  bool has_variable() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  struct Node {
    Kind kind = Kind::number;
    double value = 0.0;
    Func func = Func::sin;
    std::shared_ptr<const Node> a;
    std::shared_ptr<const Node> b;
  };
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  static double eval_node(const Node& n, double x);
  static void print_node(const Node& n, std::string& out);
  static bool equal(const Node& a, const Node& b);
  static bool uses_variable(const Node& n);

  std::shared_ptr<const Node> node_;

  friend class ExprParser;
};

/// Throws ParseError with the byte offset of the offending token.
Expr parse_expr(std::string_view text);

/// Evaluates at every node of axis `dim`; throws EvalError on a non-finite
/// value.
Vector sample(const Expr& e, const Grid& grid, int dim);

}  // namespace sephjb
