#include "hamdrift/system.hpp"

#include <cmath>
#include <sstream>

namespace hamdrift {

namespace {

TermFns make_term(const Expr& e, const ParamEnv& env) {
  TermFns t;
  t.expr = e;
  t.f = e.compile(env);
  t.fx = e.diff('x').compile(env);
  t.fy = e.diff('y').compile(env);
  return t;
}

}  // namespace

PerturbedSystem::PerturbedSystem(Expr h0, int q, std::map<int, Expr> h_terms,
                                 std::map<int, Expr> f_terms, double e0,
                                 ParamEnv env)
    : h0_src_(h0), q_(q), e0_(e0), env_(std::move(env)) {
  if (q_ < 1) throw SystemError("decay denominator q must be a positive integer");
  if (!(e0_ > 0)) throw SystemError("E0 must be positive");
  h0_ = make_term(h0_src_, env_);
  for (auto& [k, e] : h_terms) {
    if (k < 1) throw SystemError("H term index must be >= 1", "H[" + std::to_string(k) + "]");
    h_terms_.emplace(k, make_term(e, env_));
  }
  for (auto& [k, e] : f_terms) {
    if (k < 1) throw SystemError("F term index must be >= 1", "F[" + std::to_string(k) + "]");
    f_terms_.emplace(k, make_term(e, env_));
  }
  check_invariants();
}

void PerturbedSystem::check_invariants() {
  const double tol = 1e-9;
  double v0 = h0_.f.eval(0, 0);
  if (!std::isfinite(v0) || std::abs(v0) > tol)
    throw SystemError("H0(0,0) must vanish");
  double gx = h0_.fx.eval(0, 0), gy = h0_.fy.eval(0, 0);
  if (!std::isfinite(gx) || !std::isfinite(gy) ||
      std::abs(gx) > tol || std::abs(gy) > tol)
    throw SystemError("grad H0(0,0) must vanish (origin must be a fixed point)");

  // Hessian against the normal form; deviations are warnings only.
  double hxx = h0_src_.diff('x').diff('x').eval(0, 0, env_);
  double hyy = h0_src_.diff('y').diff('y').eval(0, 0, env_);
  double hxy = h0_src_.diff('x').diff('y').eval(0, 0, env_);
  const double htol = 1e-6;
  if (std::abs(hxy) > htol || std::abs(hxx - hyy) > htol) {
    std::ostringstream os;
    os << "H0 Hessian at the origin is not in normal form (Hxx=" << hxx
       << ", Hyy=" << hyy << ", Hxy=" << hxy << ")";
    warnings_.push_back(os.str());
  } else if (std::abs(hxx - 1.0) > htol) {
    std::ostringstream os;
    os << "H0 Hessian at the origin is a scaled identity (factor " << hxx
       << "); coordinates are not rescaled automatically";
    warnings_.push_back(os.str());
  }

  for (auto& [k, t] : f_terms_) {
    double f0 = t.f.eval(0, 0);
    if (!std::isfinite(f0) || std::abs(f0) > tol)
      throw SystemError("F term does not vanish at the origin",
                        "F[" + std::to_string(k) + "]");
  }
  for (auto& [k, t] : h_terms_) {
    if (std::abs(t.f.eval(0, 0)) > tol)
      throw SystemError("H term does not vanish at the origin",
                        "H[" + std::to_string(k) + "]");
    if (std::abs(t.fx.eval(0, 0)) > tol || std::abs(t.fy.eval(0, 0)) > tol)
      throw SystemError("H term gradient does not vanish at the origin",
                        "H[" + std::to_string(k) + "]");
  }
}

double PerturbedSystem::grad_norm(double x, double y) const {
  double gx = h0_.fx.eval(x, y), gy = h0_.fy.eval(x, y);
  return std::sqrt(gx * gx + gy * gy);
}

const TermFns* PerturbedSystem::h_term(int k) const {
  auto it = h_terms_.find(k);
  return it == h_terms_.end() ? nullptr : &it->second;
}

const TermFns* PerturbedSystem::f_term(int k) const {
  auto it = f_terms_.find(k);
  return it == f_terms_.end() ? nullptr : &it->second;
}

int PerturbedSystem::max_order() const {
  int m = 0;
  if (!h_terms_.empty()) m = std::max(m, h_terms_.rbegin()->first);
  if (!f_terms_.empty()) m = std::max(m, f_terms_.rbegin()->first);
  return m;
}

void PerturbedSystem::limiting_rhs(const State2& s, State2& ds) const {
  ds[0] = h0_.fy.eval(s[0], s[1]);
  ds[1] = -h0_.fx.eval(s[0], s[1]);
}

void PerturbedSystem::full_rhs(double t, const State2& s, State2& ds) const {
  double hy = h0_.fy.eval(s[0], s[1]);
  double hx = h0_.fx.eval(s[0], s[1]);
  double f = 0;
  double lt = std::log(t);
  for (auto& [k, term] : h_terms_) {
    double w = std::exp(-(static_cast<double>(k) / q_) * lt);
    hy += w * term.fy.eval(s[0], s[1]);
    hx += w * term.fx.eval(s[0], s[1]);
  }
  for (auto& [k, term] : f_terms_) {
    double w = std::exp(-(static_cast<double>(k) / q_) * lt);
    f += w * term.f.eval(s[0], s[1]);
  }
  ds[0] = hy;
  ds[1] = -hx + f;
}

}  // namespace hamdrift
