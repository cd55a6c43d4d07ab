#ifndef HAMDRIFT_EXPR_HPP
#define HAMDRIFT_EXPR_HPP

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hamdrift {

/// Parameter bindings used when evaluating expressions (lam, mu, kap, ...).
using ParamEnv = std::map<std::string, double>;

struct ParseError : std::runtime_error {
  ParseError(std::string msg, std::size_t offset, std::string expected)
      : std::runtime_error(std::move(msg)), offset(offset), expected(std::move(expected)) {}
  std::size_t offset;   // byte offset into the source text
  std::string expected; // what the parser would have accepted here
};

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {
struct Node;
}

class CompiledExpr;

/// Immutable scalar expression in the variables x, y plus named parameters.
///
/// Grammar:
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := '-' factor | atom ('^' factor)?
///   atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'
///
/// '^' binds tighter than unary minus, so "-x^2" means -(x^2).
/// IDENT is one of the variables {x, y}, a function name
/// {sin, cos, exp, log, sqrt, abs}, or otherwise a free parameter.
///
/// Expressions are immutable after construction and safe to share and
/// evaluate concurrently from many threads.
class Expr {
 public:
  Expr() = default;

  static Expr parse(std::string_view source);

  static Expr number(double v);

  /// Throws EvalError on unbound parameters and domain errors
  /// (log of a non-positive value, sqrt of a negative value,
  ///  non-integer power of a non-positive base).
  double eval(double x, double y, const ParamEnv& env = {}) const;

  /// Exact symbolic derivative with respect to 'x' or 'y'.
  /// Only constant folding is applied; no other simplification.
  Expr diff(char var) const;

  /// Parseable text form; parse(str()) evaluates identically.
  std::string str() const;

  /// Structural equality of the syntax trees.
  bool same_tree(const Expr& other) const;

  /// Names of free parameters (everything except x, y, function names).
  std::vector<std::string> parameters() const;

  /// True when the tree is the literal constant 0 (after folding).
  bool is_zero_literal() const;

  bool empty() const { return !root_; }

  /// Flatten into a stack program with parameter values baked in.
  /// Missing parameters throw EvalError at compile time.
  CompiledExpr compile(const ParamEnv& env = {}) const;

 private:
  explicit Expr(std::shared_ptr<const detail::Node> n) : root_(std::move(n)) {}
  std::shared_ptr<const detail::Node> root_;
  friend class ExprBuilder;
};

/// Postfix stack program for fast repeated evaluation.
/// Domain errors produce NaN instead of throwing; callers on hot paths
/// check for non-finite results where it matters.
class CompiledExpr {
 public:
  double eval(double x, double y) const;
  bool empty() const { return ops_.empty(); }

 private:
  struct Op {
    int code;
    double value; // PushConst payload / integer exponent for PowInt
  };
  std::vector<Op> ops_;
  int max_stack_ = 0;
  friend class Expr;
};

}  // namespace hamdrift

#endif
