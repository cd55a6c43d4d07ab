#ifndef HAMDRIFT_CLASSIFY_HPP
#define HAMDRIFT_CLASSIFY_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hamdrift/averaging.hpp"

namespace hamdrift {

enum class Regime {
  ExponentiallyStable,
  PolynomiallyStable,
  Stable,
  NeutrallyStable,
  Unstable,
  WeightedUnstable,
  Undetermined,
};

const char* regime_name(Regime r);

enum class RateKind { PowerLaw, StretchedExponential, ConvergesToCycle, None };

const char* rate_kind_name(RateKind k);

/// Predicted long-time behaviour of E(t) = H0(x(t), y(t)).
///  PowerLaw:             E(t) ~ t^exponent
///  StretchedExponential: log E drifts linearly in t^exponent
///                        (exponent = 1 - n/q > 0; decay when the verdict
///                         is stable, growth when unstable)
///  ConvergesToCycle:     E(t) -> cycle_energy
struct RatePrediction {
  RateKind kind = RateKind::None;
  double exponent = 0;
  std::optional<double> cycle_energy;
  bool one_sided = false;  // exponent is an upper bound, not a sharp rate
};

struct VerdictInputs {
  int n = 0, m = 0, s = 0, d = 0, q = 0;
  std::optional<double> lambda_n, gamma_ms, gamma_nd;
};

struct StabilityVerdict {
  Regime regime = Regime::Undetermined;
  std::optional<double> weight_exponent;  // t^w instability weight in (x, y)
  RatePrediction rate;
  std::string source;  // which lemma/theorem produced the verdict
  VerdictInputs inputs;
  std::string note;
};

/// Decision tree over the fitted leading powers of the model:
///  (a) first nonzero order linear        -> sign of lambda_n, position of
///                                           n against q (exponential /
///                                           polynomial / marginal)
///  (b) nonlinear order m before linear n -> the (lambda_n, gamma_ms)
///                                           partition with
///                                           nu  = (n-m)/(q(s-1)),
///                                           eta = (q-m)/(q(s-1))
///  (c) two nonlinear orders              -> matching-sign rules on
///                                           (gamma_ms, gamma_nd)
/// Everything not covered returns Undetermined. lambda_n within 1e-8 of
/// zero (relative to the Lambda/E scale) is treated as the bifurcation
/// boundary and returns Undetermined rather than guessing a side.
StabilityVerdict classify(const AveragedModel& model, int q);

struct Cycle {
  double energy = 0;
  bool stable = false;
  double derivative = 0;  // Lambda_n'(V_c)
  bool boundary = false;  // root in the first/last grid cell
  bool degenerate = false;  // |Lambda_n'| below 1e-8 of scale
};

struct CycleSet {
  int order = 0;               // n used for the root search
  bool convergence_claim = false;  // 1 <= n <= q
  std::vector<Cycle> cycles;
};

/// Roots of Lambda_n on the grid, refined by bisection to 1e-10 in E.
/// When an evaluator is supplied (fresh per-energy averaging) it is used
/// for the refinement; otherwise the sampled curve is interpolated.
/// A root is a stable cycle iff Lambda_n' < 0 there.
CycleSet find_cycles(const AveragedModel& model, int q, double e0,
                     const std::function<double(double)>& evaluator = {});

struct ConditionCheck {
  std::string name;
  bool pass = false;
  double residual = 0;
  std::string detail;
};

struct TheoremReport {
  int theorem = 0;
  bool applicable = false;  // structural preconditions met
  bool passed = false;      // all numeric conditions hold
  std::vector<ConditionCheck> checks;
  std::map<std::string, double> extracted;  // lambda_n, alpha_m, mu_n, ...
  std::string detail;
};

/// Numerically verify the structural conditions of the three applicability
/// theorems (vanishing coefficients, loop integrals that must vanish on
/// every level curve, and the small-radius expansion of the decisive F
/// term), and extract the decision constants.
TheoremReport check_theorem_conditions(const PerturbedSystem& sys,
                                       const ActionAngleChart& chart, int thm);

/// classify() on the model, falling back to the theorem checkers when the
/// computed orders are all zero (the decisive order can lie beyond the
/// order cap of the recursion; the theorem conditions identify it without
/// computing Lambda there).
StabilityVerdict classify_system(const PerturbedSystem& sys,
                                 const ActionAngleChart& chart,
                                 const AveragedModel& model);

}  // namespace hamdrift

#endif
