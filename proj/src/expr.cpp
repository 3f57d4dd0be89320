#include "rtinv/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <string>
#include <variant>

#include "rtinv/errors.hpp"

namespace rtinv {
namespace detail {

enum class Func { Exp, Log, Sqrt, Sin, Cos, Tan, Abs };
enum class BinOp { Add, Sub, Mul, Div, Pow };

struct Literal { double value; };
struct Variable {};
struct Negate { std::shared_ptr<const ExprNode> arg; };
struct Call { Func f; std::shared_ptr<const ExprNode> arg; };
struct Binary { BinOp op; std::shared_ptr<const ExprNode> lhs, rhs; };

struct ExprNode {
  std::variant<Literal, Variable, Negate, Call, Binary> v;
};

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

template <class T>
NodePtr make(T value) {
  return std::make_shared<const ExprNode>(ExprNode{std::move(value)});
}

[[noreturn]] void domain_error(const std::string& what) {
  throw Error(ErrorCode::EvalDomainError, what);
}

double apply(Func f, double a) {
  switch (f) {
    case Func::Exp: return std::exp(a);
    case Func::Log:
      if (!(a > 0.0)) domain_error("log of non-positive value");
      return std::log(a);
    case Func::Sqrt:
      if (a < 0.0) domain_error("sqrt of negative value");
      return std::sqrt(a);
    case Func::Sin: return std::sin(a);
    case Func::Cos: return std::cos(a);
    case Func::Tan: return std::tan(a);
    case Func::Abs: return std::abs(a);
  }
  return 0.0;
}

double power(double base, double exponent) {
  if (base < 0.0 && std::trunc(exponent) != exponent) {
    domain_error("negative base raised to a non-integer power");
  }
  return std::pow(base, exponent);
}

double eval(const ExprNode& node, double x) {
  struct Visitor {
    double x;
    double operator()(const Literal& l) const { return l.value; }
    double operator()(const Variable&) const { return x; }
    double operator()(const Negate& n) const { return -eval(*n.arg, x); }
    double operator()(const Call& c) const { return apply(c.f, eval(*c.arg, x)); }
    double operator()(const Binary& b) const {
      const double l = eval(*b.lhs, x);
      const double r = eval(*b.rhs, x);
      switch (b.op) {
        case BinOp::Add: return l + r;
        case BinOp::Sub: return l - r;
        case BinOp::Mul: return l * r;
        case BinOp::Div:
          if (r == 0.0) domain_error("division by zero");
          return l / r;
        case BinOp::Pow: return power(l, r);
      }
      return 0.0;
    }
  };
  return std::visit(Visitor{x}, node.v);
}

const char* func_name(Func f) {
  switch (f) {
    case Func::Exp: return "exp";
    case Func::Log: return "log";
    case Func::Sqrt: return "sqrt";
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Tan: return "tan";
    case Func::Abs: return "abs";
  }
  return "?";
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string render(const ExprNode& node) {
  struct Visitor {
    std::string operator()(const Literal& l) const {
      // negative literals only arise from Expression::constant
      return l.value < 0 ? "(" + format_double(l.value) + ")" : format_double(l.value);
    }
    std::string operator()(const Variable&) const { return "x"; }
    std::string operator()(const Negate& n) const { return "(-" + render(*n.arg) + ")"; }
    std::string operator()(const Call& c) const {
      return std::string(func_name(c.f)) + "(" + render(*c.arg) + ")";
    }
    std::string operator()(const Binary& b) const {
      static constexpr const char* ops[] = {"+", "-", "*", "/", "^"};
      return "(" + render(*b.lhs) + ops[static_cast<int>(b.op)] + render(*b.rhs) + ")";
    }
  };
  return std::visit(Visitor{}, node.v);
}

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  NodePtr parse_all() {
    NodePtr e = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected character");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ParseError,
                what + " at byte offset " + std::to_string(pos_), pos_);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = make(Binary{BinOp::Add, lhs, term()});
      } else if (accept('-')) {
        lhs = make(Binary{BinOp::Sub, lhs, term()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make(Binary{BinOp::Mul, lhs, unary()});
      } else if (accept('/')) {
        lhs = make(Binary{BinOp::Div, lhs, unary()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Negate{unary()});
    if (accept('+')) return unary();
    return pow_expr();
  }

  NodePtr pow_expr() {
    NodePtr base = primary();
    if (accept('^')) return make(Binary{BinOp::Pow, base, unary()});
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < s_.size() && (s_[p] == '+' || s_[p] == '-')) ++p;
      if (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) {
        pos_ = p;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      }
    }
    const std::string tok(s_.substr(start, pos_ - start));
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) {
      pos_ = start;
      fail("malformed number '" + tok + "'");
    }
    return make(Literal{v});
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    const std::string name(s_.substr(start, pos_ - start));
    if (name == "x") return make(Variable{});
    if (name == "pi") return make(Literal{std::numbers::pi});
    if (name == "e") return make(Literal{std::numbers::e});

    static const std::pair<const char*, Func> funcs[] = {
        {"exp", Func::Exp}, {"log", Func::Log}, {"sqrt", Func::Sqrt},
        {"sin", Func::Sin}, {"cos", Func::Cos}, {"tan", Func::Tan},
        {"abs", Func::Abs}};
    for (const auto& [fname, f] : funcs) {
      if (name == fname) {
        if (!accept('(')) fail("expected '(' after " + name);
        NodePtr arg = expr();
        if (!accept(')')) fail("expected ')'");
        return make(Call{f, arg});
      }
    }
    throw Error(ErrorCode::UnknownSymbol,
                "unknown identifier '" + name + "' at byte offset " + std::to_string(start),
                start);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace
}  // namespace detail

Expression Expression::parse(std::string_view text) {
  bool blank = true;
  for (char c : text) blank = blank && std::isspace(static_cast<unsigned char>(c));
  if (blank) throw Error(ErrorCode::ParseError, "empty expression", 0);
  detail::Parser p(text);
  return Expression(p.parse_all(), std::string(text));
}

Expression Expression::constant(double value) {
  auto node = detail::make(detail::Literal{value});
  return Expression(node, detail::render(*node));
}

double Expression::evaluate(double x) const {
  const double v = detail::eval(*root_, x);
  if (!std::isfinite(v)) detail::domain_error("non-finite result");
  return v;
}

std::string Expression::render() const { return detail::render(*root_); }

Vector eval_vector(const Expression& expr, const NodeGrid& grid) {
  Vector out(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    try {
      out[static_cast<Eigen::Index>(k)] = expr.evaluate(grid[k]);
    } catch (const Error&) {
      throw Error(ErrorCode::EvalDomainError,
                  "'" + expr.source() + "' undefined at node " + std::to_string(k) +
                      " (x = " + std::to_string(grid[k]) + ")",
                  k);
    }
  }
  return out;
}

}  // namespace rtinv
