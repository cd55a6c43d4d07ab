#include "hamdrift/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

namespace hamdrift {

namespace detail {

enum class NodeKind { Number, VarX, VarY, Param, Neg, Func, Binary };
enum class Func { Sin, Cos, Exp, Log, Sqrt, Abs };
enum class BinOp { Add, Sub, Mul, Div, Pow };

struct Node {
  NodeKind kind;
  double value = 0;       // Number
  std::string name;       // Param
  Func func = Func::Sin;  // Func
  BinOp op = BinOp::Add;  // Binary
  std::shared_ptr<const Node> a, b;
};

using NodePtr = std::shared_ptr<const Node>;

}  // namespace detail

using detail::BinOp;
using detail::Func;
using detail::Node;
using detail::NodeKind;
using detail::NodePtr;

namespace {

NodePtr make_number(double v) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Number;
  n->value = v;
  return n;
}

NodePtr make_var(char c) {
  auto n = std::make_shared<Node>();
  n->kind = c == 'x' ? NodeKind::VarX : NodeKind::VarY;
  return n;
}

NodePtr make_param(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Param;
  n->name = std::move(name);
  return n;
}

bool is_number(const NodePtr& n, double v) {
  return n->kind == NodeKind::Number && n->value == v;
}

NodePtr make_neg(NodePtr a) {
  if (a->kind == NodeKind::Number) return make_number(-a->value);
  if (a->kind == NodeKind::Neg) return a->a;
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Neg;
  n->a = std::move(a);
  return n;
}

NodePtr make_func(Func f, NodePtr a) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Func;
  n->func = f;
  n->a = std::move(a);
  return n;
}

double apply_bin(BinOp op, double x, double y) {
  switch (op) {
    case BinOp::Add: return x + y;
    case BinOp::Sub: return x - y;
    case BinOp::Mul: return x * y;
    case BinOp::Div: return x / y;
    case BinOp::Pow: return std::pow(x, y);
  }
  return 0;
}

NodePtr make_bin(BinOp op, NodePtr a, NodePtr b) {
  // constant folding plus the obvious algebraic identities
  if (a->kind == NodeKind::Number && b->kind == NodeKind::Number &&
      op != BinOp::Pow)
    return make_number(apply_bin(op, a->value, b->value));
  switch (op) {
    case BinOp::Add:
      if (is_number(a, 0)) return b;
      if (is_number(b, 0)) return a;
      break;
    case BinOp::Sub:
      if (is_number(b, 0)) return a;
      if (is_number(a, 0)) return make_neg(b);
      break;
    case BinOp::Mul:
      if (is_number(a, 0) || is_number(b, 0)) return make_number(0);
      if (is_number(a, 1)) return b;
      if (is_number(b, 1)) return a;
      break;
    case BinOp::Div:
      if (is_number(a, 0)) return make_number(0);
      if (is_number(b, 1)) return a;
      break;
    case BinOp::Pow:
      if (is_number(b, 1)) return a;
      if (is_number(b, 0)) return make_number(1);
      break;
  }
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Binary;
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

const std::map<std::string, Func, std::less<>>& function_table() {
  static const std::map<std::string, Func, std::less<>> tbl = {
      {"sin", Func::Sin}, {"cos", Func::Cos},   {"exp", Func::Exp},
      {"log", Func::Log}, {"sqrt", Func::Sqrt}, {"abs", Func::Abs}};
  return tbl;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  NodePtr run() {
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ != src_.size())
      fail("unexpected trailing input", "operator or end of input");
    return e;
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what, const std::string& expected) {
    std::ostringstream os;
    os << "syntax error at byte " << pos_ << ": " << what << " (expected "
       << expected << ")";
    throw ParseError(os.str(), pos_, expected);
  }

  void skip_ws() {
    while (pos_ < src_.size() &&
           std::isspace(static_cast<unsigned char>(src_[pos_])))
      ++pos_;
  }

  bool peek_is(char c) {
    skip_ws();
    return pos_ < src_.size() && src_[pos_] == c;
  }

  bool consume(char c) {
    if (peek_is(c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_expr() {
    NodePtr e = parse_term();
    for (;;) {
      if (consume('+'))
        e = make_bin(BinOp::Add, e, parse_term());
      else if (consume('-'))
        e = make_bin(BinOp::Sub, e, parse_term());
      else
        return e;
    }
  }

  NodePtr parse_term() {
    NodePtr e = parse_factor();
    for (;;) {
      if (consume('*'))
        e = make_bin(BinOp::Mul, e, parse_factor());
      else if (consume('/'))
        e = make_bin(BinOp::Div, e, parse_factor());
      else
        return e;
    }
  }

  // '-' applies to a whole factor, so -x^2 == -(x^2)
  NodePtr parse_factor() {
    if (consume('-')) return make_neg(parse_factor());
    NodePtr base = parse_atom();
    if (consume('^')) return make_bin(BinOp::Pow, base, parse_factor());
    return base;
  }

  NodePtr parse_atom() {
    skip_ws();
    if (pos_ >= src_.size()) fail("input ended", "number, name or '('");
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      if (!consume(')')) fail("unbalanced parenthesis", "')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
      return parse_ident();
    fail(std::string("unexpected character '") + c + "'",
         "number, name or '('");
  }

  NodePtr parse_number() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) ||
            src_[pos_] == '.'))
      ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t mark = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() &&
               std::isdigit(static_cast<unsigned char>(src_[pos_])))
          ++pos_;
      } else {
        pos_ = mark;  // 'e' starts an identifier, not an exponent
      }
    }
    std::string text(src_.substr(start, pos_ - start));
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0') {
      pos_ = start;
      fail("malformed number '" + text + "'", "number");
    }
    return make_number(v);
  }

  NodePtr parse_ident() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
            src_[pos_] == '_'))
      ++pos_;
    std::string name(src_.substr(start, pos_ - start));
    if (peek_is('(')) {
      auto it = function_table().find(name);
      if (it == function_table().end()) {
        pos_ = start;
        fail("unknown function '" + name + "'",
             "one of sin, cos, exp, log, sqrt, abs");
      }
      ++pos_;  // '('
      NodePtr arg = parse_expr();
      if (!consume(')')) fail("unbalanced parenthesis", "')'");
      return make_func(it->second, arg);
    }
    if (name == "x" || name == "y") return make_var(name[0]);
    return make_param(std::move(name));
  }
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

bool integral_exponent(double e, long long& n) {
  if (e != std::floor(e) || std::abs(e) > 64) return false;
  n = static_cast<long long>(e);
  return true;
}

double pow_int(double base, long long n) {
  if (n < 0) return 1.0 / pow_int(base, -n);
  double r = 1, b = base;
  while (n > 0) {
    if (n & 1) r *= b;
    b *= b;
    n >>= 1;
  }
  return r;
}

double eval_node(const Node* n, double x, double y, const ParamEnv& env) {
  switch (n->kind) {
    case NodeKind::Number: return n->value;
    case NodeKind::VarX: return x;
    case NodeKind::VarY: return y;
    case NodeKind::Param: {
      auto it = env.find(n->name);
      if (it == env.end())
        throw EvalError("unbound parameter '" + n->name + "'");
      return it->second;
    }
    case NodeKind::Neg: return -eval_node(n->a.get(), x, y, env);
    case NodeKind::Func: {
      double a = eval_node(n->a.get(), x, y, env);
      switch (n->func) {
        case Func::Sin: return std::sin(a);
        case Func::Cos: return std::cos(a);
        case Func::Exp: return std::exp(a);
        case Func::Log:
          if (a <= 0) throw EvalError("log of non-positive value");
          return std::log(a);
        case Func::Sqrt:
          if (a < 0) throw EvalError("sqrt of negative value");
          return std::sqrt(a);
        case Func::Abs: return std::abs(a);
      }
      return 0;
    }
    case NodeKind::Binary: {
      double a = eval_node(n->a.get(), x, y, env);
      double b = eval_node(n->b.get(), x, y, env);
      if (n->op == BinOp::Pow) {
        long long k;
        if (integral_exponent(b, k)) return pow_int(a, k);
        if (a <= 0)
          throw EvalError("non-integer power of non-positive base");
        return std::pow(a, b);
      }
      return apply_bin(n->op, a, b);
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Differentiation (symbolic, constant folding only)
// ---------------------------------------------------------------------------

NodePtr diff_node(const NodePtr& n, char var) {
  switch (n->kind) {
    case NodeKind::Number:
    case NodeKind::Param: return make_number(0);
    case NodeKind::VarX: return make_number(var == 'x' ? 1 : 0);
    case NodeKind::VarY: return make_number(var == 'y' ? 1 : 0);
    case NodeKind::Neg: return make_neg(diff_node(n->a, var));
    case NodeKind::Func: {
      NodePtr u = n->a, du = diff_node(n->a, var);
      switch (n->func) {
        case Func::Sin: return make_bin(BinOp::Mul, make_func(Func::Cos, u), du);
        case Func::Cos:
          return make_neg(make_bin(BinOp::Mul, make_func(Func::Sin, u), du));
        case Func::Exp: return make_bin(BinOp::Mul, make_func(Func::Exp, u), du);
        case Func::Log: return make_bin(BinOp::Div, du, u);
        case Func::Sqrt:
          return make_bin(BinOp::Div, du,
                          make_bin(BinOp::Mul, make_number(2),
                                   make_func(Func::Sqrt, u)));
        case Func::Abs:
          // d|u| = u/|u| * du, undefined at u = 0
          return make_bin(BinOp::Mul,
                          make_bin(BinOp::Div, u, make_func(Func::Abs, u)), du);
      }
      return make_number(0);
    }
    case NodeKind::Binary: {
      NodePtr u = n->a, v = n->b;
      NodePtr du = diff_node(u, var), dv = diff_node(v, var);
      switch (n->op) {
        case BinOp::Add: return make_bin(BinOp::Add, du, dv);
        case BinOp::Sub: return make_bin(BinOp::Sub, du, dv);
        case BinOp::Mul:
          return make_bin(BinOp::Add, make_bin(BinOp::Mul, du, v),
                          make_bin(BinOp::Mul, u, dv));
        case BinOp::Div:
          return make_bin(
              BinOp::Div,
              make_bin(BinOp::Sub, make_bin(BinOp::Mul, du, v),
                       make_bin(BinOp::Mul, u, dv)),
              make_bin(BinOp::Pow, v, make_number(2)));
        case BinOp::Pow:
          if (v->kind == NodeKind::Number) {
            // d(u^c) = c*u^(c-1)*du
            return make_bin(
                BinOp::Mul,
                make_bin(BinOp::Mul, v,
                         make_bin(BinOp::Pow, u, make_number(v->value - 1))),
                du);
          }
          // d(u^v) = u^v * (dv*log(u) + v*du/u)
          return make_bin(
              BinOp::Mul, make_bin(BinOp::Pow, u, v),
              make_bin(BinOp::Add,
                       make_bin(BinOp::Mul, dv, make_func(Func::Log, u)),
                       make_bin(BinOp::Div, make_bin(BinOp::Mul, v, du), u)));
      }
      return make_number(0);
    }
  }
  return make_number(0);
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

int precedence(const Node* n) {
  switch (n->kind) {
    case NodeKind::Binary:
      switch (n->op) {
        case BinOp::Add:
        case BinOp::Sub: return 1;
        case BinOp::Mul:
        case BinOp::Div: return 2;
        case BinOp::Pow: return 4;
      }
      return 1;
    case NodeKind::Neg: return 3;
    default: return 5;
  }
}

void print_node(std::ostringstream& os, const Node* n);

void print_child(std::ostringstream& os, const Node* c, int parent_prec,
                 bool right_side) {
  int p = precedence(c);
  bool need = p < parent_prec || (p == parent_prec && right_side);
  if (need) os << '(';
  print_node(os, c);
  if (need) os << ')';
}

void print_node(std::ostringstream& os, const Node* n) {
  switch (n->kind) {
    case NodeKind::Number: {
      char buf[40];
      if (n->value < 0) {
        std::snprintf(buf, sizeof buf, "(%.17g)", n->value);
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", n->value);
      }
      os << buf;
      return;
    }
    case NodeKind::VarX: os << 'x'; return;
    case NodeKind::VarY: os << 'y'; return;
    case NodeKind::Param: os << n->name; return;
    case NodeKind::Neg:
      os << '-';
      print_child(os, n->a.get(), 3, true);
      return;
    case NodeKind::Func: {
      static const char* names[] = {"sin", "cos", "exp", "log", "sqrt", "abs"};
      os << names[static_cast<int>(n->func)] << '(';
      print_node(os, n->a.get());
      os << ')';
      return;
    }
    case NodeKind::Binary: {
      static const char* ops[] = {"+", "-", "*", "/", "^"};
      int p = precedence(n);
      // '^' is parsed right-associative; print the left side fenced
      bool pow = n->op == BinOp::Pow;
      print_child(os, n->a.get(), p, pow);
      os << ops[static_cast<int>(n->op)];
      print_child(os, n->b.get(), p, !pow);
      return;
    }
  }
}

void collect_params(const Node* n, std::set<std::string>& out) {
  if (!n) return;
  if (n->kind == NodeKind::Param) out.insert(n->name);
  if (n->a) collect_params(n->a.get(), out);
  if (n->b) collect_params(n->b.get(), out);
}

bool same_node(const Node* a, const Node* b) {
  if (a == b) return true;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case NodeKind::Number: return a->value == b->value;
    case NodeKind::VarX:
    case NodeKind::VarY: return true;
    case NodeKind::Param: return a->name == b->name;
    case NodeKind::Neg: return same_node(a->a.get(), b->a.get());
    case NodeKind::Func:
      return a->func == b->func && same_node(a->a.get(), b->a.get());
    case NodeKind::Binary:
      return a->op == b->op && same_node(a->a.get(), b->a.get()) &&
             same_node(a->b.get(), b->b.get());
  }
  return false;
}

// Stack program op codes
enum OpCode {
  OpConst, OpX, OpY, OpAdd, OpSub, OpMul, OpDiv, OpNeg,
  OpSin, OpCos, OpExp, OpLog, OpSqrt, OpAbs, OpPowInt, OpPow
};

}  // namespace

class ExprBuilder {
 public:
  static Expr wrap(NodePtr n) { return Expr(std::move(n)); }
  static const Node* root(const Expr& e) { return e.root_.get(); }
  static NodePtr share(const Expr& e) { return e.root_; }
};

Expr Expr::parse(std::string_view source) {
  Parser p(source);
  return ExprBuilder::wrap(p.run());
}

Expr Expr::number(double v) { return ExprBuilder::wrap(make_number(v)); }

double Expr::eval(double x, double y, const ParamEnv& env) const {
  if (!root_) throw EvalError("empty expression");
  return eval_node(root_.get(), x, y, env);
}

Expr Expr::diff(char var) const {
  if (!root_) throw EvalError("empty expression");
  return ExprBuilder::wrap(diff_node(root_, var));
}

std::string Expr::str() const {
  if (!root_) return "0";
  std::ostringstream os;
  print_node(os, root_.get());
  return os.str();
}

bool Expr::same_tree(const Expr& other) const {
  if (!root_ || !other.root_) return root_ == other.root_;
  return same_node(root_.get(), other.root_.get());
}

std::vector<std::string> Expr::parameters() const {
  std::set<std::string> s;
  collect_params(root_.get(), s);
  return {s.begin(), s.end()};
}

bool Expr::is_zero_literal() const {
  return root_ && root_->kind == NodeKind::Number && root_->value == 0;
}

namespace {

void compile_node(const Node* n, const ParamEnv& env,
                  std::vector<std::pair<int, double>>& out) {
  switch (n->kind) {
    case NodeKind::Number: out.emplace_back(OpConst, n->value); return;
    case NodeKind::VarX: out.emplace_back(OpX, 0); return;
    case NodeKind::VarY: out.emplace_back(OpY, 0); return;
    case NodeKind::Param: {
      auto it = env.find(n->name);
      if (it == env.end())
        throw EvalError("unbound parameter '" + n->name + "'");
      out.emplace_back(OpConst, it->second);
      return;
    }
    case NodeKind::Neg:
      compile_node(n->a.get(), env, out);
      out.emplace_back(OpNeg, 0);
      return;
    case NodeKind::Func:
      compile_node(n->a.get(), env, out);
      out.emplace_back(OpSin + static_cast<int>(n->func), 0);
      return;
    case NodeKind::Binary: {
      compile_node(n->a.get(), env, out);
      if (n->op == BinOp::Pow && n->b->kind == NodeKind::Number) {
        long long k;
        if (integral_exponent(n->b->value, k)) {
          out.emplace_back(OpPowInt, static_cast<double>(k));
          return;
        }
      }
      compile_node(n->b.get(), env, out);
      switch (n->op) {
        case BinOp::Add: out.emplace_back(OpAdd, 0); break;
        case BinOp::Sub: out.emplace_back(OpSub, 0); break;
        case BinOp::Mul: out.emplace_back(OpMul, 0); break;
        case BinOp::Div: out.emplace_back(OpDiv, 0); break;
        case BinOp::Pow: out.emplace_back(OpPow, 0); break;
      }
      return;
    }
  }
}

}  // namespace

CompiledExpr Expr::compile(const ParamEnv& env) const {
  CompiledExpr ce;
  if (!root_) return ce;
  std::vector<std::pair<int, double>> prog;
  compile_node(root_.get(), env, prog);
  ce.ops_.reserve(prog.size());
  int depth = 0, maxd = 0;
  for (auto& [code, value] : prog) {
    if (code == OpConst || code == OpX || code == OpY)
      ++depth;
    else if (code >= OpAdd && code <= OpDiv)
      --depth;
    else if (code == OpPow)
      --depth;
    maxd = std::max(maxd, depth);
    ce.ops_.push_back({code, value});
  }
  ce.max_stack_ = maxd + 1;
  return ce;
}

double CompiledExpr::eval(double x, double y) const {
  double stack[64];
  int sp = 0;
  for (const Op& op : ops_) {
    switch (op.code) {
      case OpConst: stack[sp++] = op.value; break;
      case OpX: stack[sp++] = x; break;
      case OpY: stack[sp++] = y; break;
      case OpAdd: --sp; stack[sp - 1] += stack[sp]; break;
      case OpSub: --sp; stack[sp - 1] -= stack[sp]; break;
      case OpMul: --sp; stack[sp - 1] *= stack[sp]; break;
      case OpDiv: --sp; stack[sp - 1] /= stack[sp]; break;
      case OpNeg: stack[sp - 1] = -stack[sp - 1]; break;
      case OpSin: stack[sp - 1] = std::sin(stack[sp - 1]); break;
      case OpCos: stack[sp - 1] = std::cos(stack[sp - 1]); break;
      case OpExp: stack[sp - 1] = std::exp(stack[sp - 1]); break;
      case OpLog:
        stack[sp - 1] =
            stack[sp - 1] > 0 ? std::log(stack[sp - 1]) : std::nan("");
        break;
      case OpSqrt:
        stack[sp - 1] =
            stack[sp - 1] >= 0 ? std::sqrt(stack[sp - 1]) : std::nan("");
        break;
      case OpAbs: stack[sp - 1] = std::abs(stack[sp - 1]); break;
      case OpPowInt:
        stack[sp - 1] = pow_int(stack[sp - 1], static_cast<long long>(op.value));
        break;
      case OpPow:
        --sp;
        stack[sp - 1] = stack[sp - 1] > 0
                            ? std::pow(stack[sp - 1], stack[sp])
                            : std::nan("");
        break;
    }
  }
  return sp > 0 ? stack[0] : 0.0;
}

}  // namespace hamdrift
