#ifndef HAMDRIFT_SYSTEM_HPP
#define HAMDRIFT_SYSTEM_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hamdrift/expr.hpp"
#include "hamdrift/ode.hpp"

namespace hamdrift {

struct SystemError : std::runtime_error {
  SystemError(std::string msg, std::string term = "")
      : std::runtime_error(std::move(msg)), offending_term(std::move(term)) {}
  std::string offending_term;  // e.g. "F[2]" when a term violates an invariant
};

/// Per-order derivative bundle for one H_k or F_k entry.
struct TermFns {
  Expr expr;
  CompiledExpr f, fx, fy;
};

/// dx/dt = d_y H,  dy/dt = -d_x H + F,  with
///   H = H0 + sum_k t^(-k/q) H_k,  F = sum_k t^(-k/q) F_k.
///
/// The limiting Hamiltonian H0 must have a non-degenerate center at the
/// origin in normal form: H0(0,0) = 0, grad H0(0,0) = 0, Hessian ~ identity.
/// A Hessian that deviates from the identity (e.g. an isotropic scaling)
/// is reported as a warning, not an error; coordinates are never rescaled
/// automatically. Every perturbation term must preserve the fixed point:
/// F_k(0,0) = 0, H_k(0,0) = 0, grad H_k(0,0) = 0.
class PerturbedSystem {
 public:
  PerturbedSystem(Expr h0, int q, std::map<int, Expr> h_terms,
                  std::map<int, Expr> f_terms, double e0, ParamEnv env);

  int q() const { return q_; }
  double e0() const { return e0_; }
  const ParamEnv& env() const { return env_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  const Expr& h0_expr() const { return h0_.expr; }
  double h0(double x, double y) const { return h0_.f.eval(x, y); }
  double h0_x(double x, double y) const { return h0_.fx.eval(x, y); }
  double h0_y(double x, double y) const { return h0_.fy.eval(x, y); }
  double grad_norm(double x, double y) const;

  const std::map<int, TermFns>& h_terms() const { return h_terms_; }
  const std::map<int, TermFns>& f_terms() const { return f_terms_; }
  const TermFns* h_term(int k) const;  // nullptr when absent (treated as 0)
  const TermFns* f_term(int k) const;
  int max_order() const;  // largest k occurring in either series

  /// Right-hand side of the limiting system (perturbations dropped).
  void limiting_rhs(const State2& s, State2& ds) const;

  /// Right-hand side of the full non-autonomous system at time t > 0,
  /// with the series truncated at the orders actually present.
  void full_rhs(double t, const State2& s, State2& ds) const;

 private:
  Expr h0_src_;
  TermFns h0_;
  int q_;
  double e0_;
  std::map<int, TermFns> h_terms_, f_terms_;
  ParamEnv env_;
  std::vector<std::string> warnings_;

  void check_invariants();
};

}  // namespace hamdrift

#endif
