#include "sephjb/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace sephjb {

ParseError::ParseError(std::size_t offset, const std::string& message)
    : std::runtime_error("offset " + std::to_string(offset) + ": " + message),
      offset_(offset) {}

EvalError::EvalError(Index node, double coordinate, const std::string& message)
    : std::runtime_error(message), node_(node), coordinate_(coordinate) {}

namespace {

struct FuncName {
  const char* name;
  Expr::Func func;
};

constexpr FuncName kFuncs[] = {
    {"sin", Expr::Func::sin},   {"cos", Expr::Func::cos},   {"tan", Expr::Func::tan},
    {"exp", Expr::Func::exp},   {"log", Expr::Func::log},   {"sqrt", Expr::Func::sqrt},
    {"abs", Expr::Func::abs},   {"tanh", Expr::Func::tanh},
};

const char* func_name(Expr::Func f) {
  for (const auto& fn : kFuncs)
    if (fn.func == f) return fn.name;
  return "?";
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Expr::Expr() : node_(std::make_shared<Node>(Node{Kind::number, 1.0, Func::sin, nullptr, nullptr})) {}

Expr Expr::number(double v) {
  return Expr(std::make_shared<Node>(Node{Kind::number, v, Func::sin, nullptr, nullptr}));
}

Expr Expr::variable() {
  return Expr(std::make_shared<Node>(Node{Kind::variable, 0.0, Func::sin, nullptr, nullptr}));
}

Expr Expr::lhs() const { return Expr(node_->a); }
Expr Expr::rhs() const { return Expr(node_->b); }

double Expr::eval(double x) const { return eval_node(*node_, x); }

double Expr::eval_node(const Node& n, double x) {
  switch (n.kind) {
    case Kind::number: return n.value;
    case Kind::variable: return x;
    case Kind::pi: return std::numbers::pi;
    case Kind::negate: return -eval_node(*n.a, x);
    case Kind::add: return eval_node(*n.a, x) + eval_node(*n.b, x);
    case Kind::sub: return eval_node(*n.a, x) - eval_node(*n.b, x);
    case Kind::mul: return eval_node(*n.a, x) * eval_node(*n.b, x);
    case Kind::div: return eval_node(*n.a, x) / eval_node(*n.b, x);
    case Kind::pow: {
      const double base = eval_node(*n.a, x);
      if (n.value == 2.0) return base * base;
      return std::pow(base, n.value);
    }
    case Kind::call: {
      const double v = eval_node(*n.a, x);
      switch (n.func) {
        case Func::sin: return std::sin(v);
        case Func::cos: return std::cos(v);
        case Func::tan: return std::tan(v);
        case Func::exp: return std::exp(v);
        case Func::log: return v > 0.0 ? std::log(v) : std::numeric_limits<double>::quiet_NaN();
        case Func::sqrt: return v >= 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
        case Func::abs: return std::fabs(v);
        case Func::tanh: return std::tanh(v);
      }
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

void Expr::print_node(const Node& n, std::string& out) {
  auto binary = [&](const char* op) {
    out += '(';
    print_node(*n.a, out);
    out += op;
    print_node(*n.b, out);
    out += ')';
  };
  switch (n.kind) {
    case Kind::number: out += format_number(n.value); return;
    case Kind::variable: out += 'x'; return;
    case Kind::pi: out += "pi"; return;
    case Kind::negate:
      out += "(-";
      print_node(*n.a, out);
      out += ')';
      return;
    case Kind::add: binary(" + "); return;
    case Kind::sub: binary(" - "); return;
    case Kind::mul: binary(" * "); return;
    case Kind::div: binary(" / "); return;
    case Kind::pow:
      out += '(';
      print_node(*n.a, out);
      out += ")^";
      out += format_number(n.value);
      return;
    case Kind::call:
      out += func_name(n.func);
      out += '(';
      print_node(*n.a, out);
      out += ')';
      return;
  }
}

std::string Expr::to_string() const {
  std::string out;
  print_node(*node_, out);
  return out;
}

bool Expr::is_constant(double* out) const {
  if (node_->kind != Kind::number) return false;
  if (out) *out = node_->value;
  return true;
}

bool Expr::has_variable() const { return uses_variable(*node_); }

bool Expr::uses_variable(const Node& n) {
  if (n.kind == Kind::variable) return true;
  return (n.a && uses_variable(*n.a)) || (n.b && uses_variable(*n.b));
}

bool Expr::equal(const Node& a, const Node& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Kind::number: return a.value == b.value;
    case Kind::variable:
    case Kind::pi: return true;
    case Kind::negate: return equal(*a.a, *b.a);
    case Kind::pow: return a.value == b.value && equal(*a.a, *b.a);
    case Kind::call: return a.func == b.func && equal(*a.a, *b.a);
    default: return equal(*a.a, *b.a) && equal(*a.b, *b.b);
  }
}

bool operator==(const Expr& a, const Expr& b) { return Expr::equal(*a.node_, *b.node_); }

// ---- parser ---------------------------------------------------------------------

class ExprParser {
 public:
  explicit ExprParser(std::string_view text) : text_(text) {}

  Expr parse() {
    auto n = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'; expected operator or end of input");
    return Expr(n);
  }

 private:
  using NodePtr = std::shared_ptr<const Expr::Node>;
  using Kind = Expr::Kind;

  static NodePtr make(Kind k, NodePtr a = nullptr, NodePtr b = nullptr, double v = 0.0,
                      Expr::Func f = Expr::Func::sin) {
    return std::make_shared<Expr::Node>(Expr::Node{k, v, f, std::move(a), std::move(b)});
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(pos_, msg); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) lhs = make(Kind::add, lhs, term());
      else if (accept('-')) lhs = make(Kind::sub, lhs, term());
      else return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) lhs = make(Kind::mul, lhs, unary());
      else if (accept('/')) lhs = make(Kind::div, lhs, unary());
      else return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Kind::negate, unary());
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (!accept('^')) return base;
    double sign = 1.0;
    if (accept('-')) sign = -1.0;
    else accept('+');
    skip_ws();
    if (pos_ >= text_.size() || !(std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
      fail("expected a number literal as exponent");
    return make(Kind::pow, base, nullptr, sign * number());
  }

  double number() {
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr == begin) fail("malformed number");
    pos_ += static_cast<std::size_t>(ptr - begin);
    return v;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input; expected number, 'x', function or '('");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return make(Kind::number, nullptr, nullptr, number());
    if (c == '(') {
      ++pos_;
      NodePtr inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
      const std::string_view id = text_.substr(start, pos_ - start);
      if (id == "x") return make(Kind::variable);
      if (id == "pi") return make(Kind::pi);
      for (const auto& fn : kFuncs) {
        if (id == fn.name) {
          if (!accept('(')) fail("expected '(' after function '" + std::string(id) + "'");
          NodePtr arg = expr();
          if (!accept(')')) fail("expected ')'");
          return make(Kind::call, arg, nullptr, 0.0, fn.func);
        }
      }
      pos_ = start;
      fail("unknown identifier '" + std::string(id) + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'; expected number, 'x', function or '('");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

Expr parse_expr(std::string_view text) { return ExprParser(text).parse(); }

Vector sample(const Expr& e, const Grid& grid, int dim) {
  const Axis& axis = grid.axis(dim);
  Vector out(axis.points);
  for (Index k = 0; k < axis.points; ++k) {
    const double x = axis.node(k);
    const double v = e.eval(x);
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "expression '" << e.to_string() << "' is not finite at node " << k
          << " (" << axis.name << " = " << x << ")";
      throw EvalError(k, x, msg.str());
    }
    out(k) = v;
  }
  return out;
}

}  // namespace sephjb
