#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "rtinv/grid.hpp"
#include "rtinv/types.hpp"

namespace rtinv {

namespace detail {
struct ExprNode;
}

/// Immutable scalar expression in the single variable `x`.
///
/// Grammar (whitespace insensitive, no implicit multiplication):
///
///     expr    := term (('+' | '-') term)*
///     term    := unary (('*' | '/') unary)*
///     unary   := ('-' | '+') unary | power
///     power   := primary ('^' unary)?          right associative
///     primary := number | 'x' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
///     func    := exp | log | sqrt | sin | cos | tan | abs
///
/// `^` binds tighter than unary minus, so "-x^2" is -(x^2).
class Expression {
 public:
  static Expression parse(std::string_view text);
  static Expression constant(double value);

  /// Throws EvalDomainError when the result is not finite or a negative base
  /// is raised to a non-integer power.
  double evaluate(double x) const;

  /// Fully parenthesized text that parses back to the same values.
  std::string render() const;

  const std::string& source() const noexcept { return source_; }

 private:
  explicit Expression(std::shared_ptr<const detail::ExprNode> root,
                      std::string source)
      : root_(std::move(root)), source_(std::move(source)) {}

  std::shared_ptr<const detail::ExprNode> root_;
  std::string source_;
};

/// Element-wise evaluation; a non-finite value at node k raises
/// EvalDomainError carrying index k.
Vector eval_vector(const Expression& expr, const NodeGrid& grid);

}  // namespace rtinv
