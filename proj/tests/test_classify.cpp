#include <doctest.h>

#include <cmath>
#include <random>

#include "hamdrift/classify.hpp"
#include "support/oracles.hpp"

using namespace hamdrift;

namespace {

std::vector<double> logspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return v;
}

// model with prescribed leading fits and matching sampled curves
AveragedModel synthetic_model(
    const std::vector<std::pair<int, std::pair<double, double>>>& orders,
    int order_cap, int q) {
  AveragedModel m;
  m.energies = logspace(2e-4, 2.0, 48);
  m.n_phi = 64;
  m.order = order_cap;
  m.q = q;
  for (int k = 1; k <= order_cap; ++k) {
    std::vector<double> curve(m.energies.size(), 0.0);
    LeadingFit fit;
    fit.k = k;
    fit.zero = true;
    for (auto& [ko, pc] : orders) {
      if (ko != k) continue;
      for (std::size_t i = 0; i < curve.size(); ++i)
        curve[i] = pc.second * std::pow(m.energies[i], pc.first);
      fit.zero = false;
      fit.power = pc.first;
      fit.raw_power = pc.first;
      fit.coeff = pc.second;
      fit.integer_power = true;
      fit.r2 = 1.0;
    }
    m.lambda[k] = curve;
    m.f_mean[k] = curve;
    m.z_mean[k] = std::vector<double>(curve.size(), 0.0);
    m.f_scale[k] = 1.0;
    m.leading.push_back(fit);
    if (!fit.zero && m.summary.first_nonzero == 0)
      m.summary.first_nonzero = k;
  }
  return m;
}

}  // namespace

TEST_CASE("linear order before q: exponentially stable / unstable") {
  AveragedModel m = synthetic_model({{1, {1.0, -1.0}}}, 3, 4);
  StabilityVerdict v = classify(m, 4);
  CHECK(v.regime == Regime::ExponentiallyStable);
  CHECK(v.rate.kind == RateKind::StretchedExponential);
  CHECK(v.rate.exponent == doctest::Approx(0.75));
  CHECK(v.source == "linear-rate rule");

  AveragedModel mu = synthetic_model({{1, {1.0, 0.5}}}, 3, 4);
  CHECK(classify(mu, 4).regime == Regime::Unstable);
}

TEST_CASE("linear order at q: polynomial rate equals lambda") {
  AveragedModel m = synthetic_model({{2, {1.0, -0.7}}}, 3, 2);
  StabilityVerdict v = classify(m, 2);
  CHECK(v.regime == Regime::PolynomiallyStable);
  CHECK(v.rate.kind == RateKind::PowerLaw);
  CHECK(v.rate.exponent == doctest::Approx(-0.7));
  CHECK(v.rate.one_sided);
}

TEST_CASE("linear order beyond q: marginal stability") {
  AveragedModel m = synthetic_model({{3, {1.0, -0.7}}}, 3, 2);
  StabilityVerdict v = classify(m, 2);
  CHECK(v.regime == Regime::Stable);
  CHECK(v.rate.kind == RateKind::None);
}

TEST_CASE("nonlinear before linear at n = q: the partition of Fig-style "
          "parameters") {
  // m=1, n=2, q=2, s=2: nu = 1/2
  AveragedModel m =
      synthetic_model({{1, {2.0, -1.0}}, {2, {1.0, 0.4}}}, 2, 2);
  StabilityVerdict v = classify(m, 2);
  CHECK(v.regime == Regime::PolynomiallyStable);
  CHECK(v.rate.exponent == doctest::Approx(-0.5));
  CHECK(v.inputs.m == 1);
  CHECK(v.inputs.n == 2);
  CHECK(v.inputs.s == 2);

  // gamma > 0 with lambda + nu > 0: weighted instability
  AveragedModel mw =
      synthetic_model({{1, {2.0, 0.8}}, {2, {1.0, 0.4}}}, 2, 2);
  StabilityVerdict vw = classify(mw, 2);
  CHECK(vw.regime == Regime::WeightedUnstable);
  CHECK(*vw.weight_exponent == doctest::Approx(0.25));

  // lambda + nu < 0: polynomial with the one-sided lambda bound
  AveragedModel ms =
      synthetic_model({{1, {2.0, -1.0}}, {2, {1.0, -0.9}}}, 2, 2);
  StabilityVerdict vs = classify(ms, 2);
  CHECK(vs.regime == Regime::PolynomiallyStable);
  CHECK(vs.rate.exponent == doctest::Approx(-0.9));
  CHECK(vs.rate.one_sided);
}

TEST_CASE("nonlinear before linear with m < n < q") {
  AveragedModel m =
      synthetic_model({{1, {2.0, -1.0}}, {2, {1.0, -0.4}}}, 2, 4);
  CHECK(classify(m, 4).regime == Regime::ExponentiallyStable);

  AveragedModel mp =
      synthetic_model({{1, {2.0, -1.0}}, {2, {1.0, 0.4}}}, 2, 4);
  StabilityVerdict vp = classify(mp, 4);
  CHECK(vp.regime == Regime::PolynomiallyStable);
  CHECK(vp.rate.exponent == doctest::Approx(-0.25));  // -nu = -(2-1)/(4*1)

  AveragedModel mu =
      synthetic_model({{1, {2.0, 1.0}}, {2, {1.0, 0.4}}}, 2, 4);
  CHECK(classify(mu, 4).regime == Regime::Unstable);
}

TEST_CASE("nonlinear before linear with m < q < n and q <= m") {
  // m=1, q=2, n=3: eta = (2-1)/(2*1) = 1/2
  AveragedModel m =
      synthetic_model({{1, {2.0, -1.0}}, {3, {1.0, 0.4}}}, 3, 2);
  StabilityVerdict v = classify(m, 2);
  CHECK(v.regime == Regime::PolynomiallyStable);
  CHECK(v.rate.exponent == doctest::Approx(-0.5));

  AveragedModel mw =
      synthetic_model({{1, {2.0, 1.0}}, {3, {1.0, -0.4}}}, 3, 2);
  StabilityVerdict vw = classify(mw, 2);
  CHECK(vw.regime == Regime::WeightedUnstable);
  CHECK(*vw.weight_exponent == doctest::Approx(0.25));

  // q <= m < n
  AveragedModel mn =
      synthetic_model({{2, {2.0, -1.0}}, {3, {1.0, 0.4}}}, 3, 2);
  CHECK(classify(mn, 2).regime == Regime::NeutrallyStable);
  AveragedModel mnu =
      synthetic_model({{2, {2.0, 1.0}}, {3, {1.0, 0.4}}}, 3, 2);
  CHECK(classify(mnu, 2).regime == Regime::Unstable);
  AveragedModel mund =
      synthetic_model({{2, {2.0, 1.0}}, {3, {1.0, -0.4}}}, 3, 2);
  CHECK(classify(mund, 2).regime == Regime::Undetermined);
}

TEST_CASE("two nonlinear orders: matched-sign rules") {
  // s=3 at m=1, d=2 at n=2: s > d needs matching signs
  AveragedModel both_pos =
      synthetic_model({{1, {3.0, 0.15}}, {2, {2.0, 0.15}}}, 2, 2);
  CHECK(classify(both_pos, 2).regime == Regime::Unstable);
  AveragedModel both_neg =
      synthetic_model({{1, {3.0, -0.15}}, {2, {2.0, -0.15}}}, 2, 2);
  CHECK(classify(both_neg, 2).regime == Regime::Stable);
  AveragedModel mixed =
      synthetic_model({{1, {3.0, 0.15}}, {2, {2.0, -0.15}}}, 2, 2);
  CHECK(classify(mixed, 2).regime == Regime::Undetermined);

  // s <= d: the first sign decides
  AveragedModel first =
      synthetic_model({{1, {2.0, -0.15}}, {2, {3.0, 0.15}}}, 2, 2);
  CHECK(classify(first, 2).regime == Regime::Stable);
  AveragedModel firstu =
      synthetic_model({{1, {2.0, 0.15}}, {2, {3.0, -0.15}}}, 2, 2);
  CHECK(classify(firstu, 2).regime == Regime::Unstable);
}

TEST_CASE("degenerate and inconsistent models return Undetermined") {
  AveragedModel empty = synthetic_model({}, 3, 2);
  CHECK(classify(empty, 2).regime == Regime::Undetermined);

  AveragedModel critical = synthetic_model({{1, {1.0, 1e-12}}}, 2, 2);
  StabilityVerdict v = classify(critical, 2);
  CHECK(v.regime == Regime::Undetermined);
  CHECK(v.note.find("critical") != std::string::npos);

  AveragedModel single = synthetic_model({{1, {3.0, 0.15}}}, 3, 2);
  CHECK(classify(single, 2).regime == Regime::Undetermined);
}

TEST_CASE("property: the decision tree is total over sign and order "
          "enumerations") {
  int count = 0;
  for (int q = 1; q <= 4; ++q)
    for (int m = 1; m <= 4; ++m)
      for (int n = m; n <= 4; ++n)
        for (int s = 2; s <= 4; ++s)
          for (int d = 2; d <= 4; ++d)
            for (double sg : {-1.0, 1.0})
              for (double sl : {-1.0, 1.0}) {
                int cap = std::min(4, std::max(m, n));
                cap = std::min(cap, 3);
                if (m > cap || n > cap) continue;
                // (b)-shaped: nonlinear at m, linear at n > m
                if (n > m) {
                  AveragedModel mb = synthetic_model(
                      {{m, {double(s), sg * 0.5}}, {n, {1.0, sl * 0.5}}}, cap,
                      q);
                  StabilityVerdict v = classify(mb, q);
                  ++count;
                  // exactly one regime, with the verdict invariants
                  if (v.regime == Regime::WeightedUnstable)
                    CHECK(*v.weight_exponent > 0);
                  if (v.regime == Regime::ExponentiallyStable)
                    CHECK(v.inputs.n < q);
                  if (v.regime == Regime::PolynomiallyStable &&
                      v.rate.kind == RateKind::PowerLaw)
                    CHECK(v.rate.exponent < 0);
                }
                // (c)-shaped: two nonlinear orders
                if (n > m) {
                  AveragedModel mc = synthetic_model(
                      {{m, {double(s), sg * 0.5}}, {n, {double(d), sl * 0.5}}},
                      cap, q);
                  StabilityVerdict v = classify(mc, q);
                  ++count;
                  CHECK((v.regime == Regime::Stable ||
                         v.regime == Regime::Unstable ||
                         v.regime == Regime::Undetermined));
                }
                // (a)-shaped: single linear order
                AveragedModel ma =
                    synthetic_model({{m, {1.0, sl * 0.5}}}, cap, q);
                StabilityVerdict v = classify(ma, q);
                ++count;
                if (v.regime == Regime::ExponentiallyStable)
                  CHECK(v.inputs.n < q);
              }
  CHECK(count > 500);
}

TEST_CASE("verdicts are invariant under a common positive rescaling of the "
          "perturbation") {
  std::mt19937 rng(777);
  std::uniform_real_distribution<double> coef(-1.5, 1.5);
  Expr h0 = Expr::parse("1 - cos(x) + y^2/2");
  for (int trial = 0; trial < 10; ++trial) {
    double a = coef(rng), b = coef(rng);
    for (double scale : {7.0}) {
      ParamEnv env1{{"alpha", a}, {"lam", b}};
      ParamEnv env2{{"alpha", scale * a}, {"lam", scale * b}};
      PerturbedSystem s1(h0, 2, {},
                         {{1, Expr::parse("alpha*x^2*y")},
                          {2, Expr::parse("lam*y")}},
                         1.8, env1);
      PerturbedSystem s2(h0, 2, {},
                         {{1, Expr::parse("alpha*x^2*y")},
                          {2, Expr::parse("lam*y")}},
                         1.8, env2);
      ActionAngleChart chart = build_chart(s1, 24, 128);
      StabilityVerdict v1 =
          classify(build_averaged_model(s1, chart, 2), 2);
      StabilityVerdict v2 =
          classify(build_averaged_model(s2, chart, 2), 2);
      CHECK(v1.regime == v2.regime);
    }
  }
}

TEST_CASE("cycles: saturating harmonic system has a stable cycle at "
          "lam / mu") {
  PerturbedSystem sys(Expr::parse("(x^2+y^2)/2"), 1, {},
                      {{1, Expr::parse("y*(lam + kap*x - mu*(x^2+y^2)/2)")}},
                      4.0, {{"lam", 0.5}, {"mu", 0.5}, {"kap", 0.0}});
  ActionAngleChart chart = build_chart(sys, 48, 256);
  AveragedModel model = build_averaged_model(sys, chart, 1);
  auto fresh = [&](double e) { return fresh_drift(sys, model, e); };
  CycleSet cs = find_cycles(model, 1, 4.0, fresh);
  REQUIRE(cs.cycles.size() == 1);
  CHECK(std::abs(cs.cycles[0].energy - 1.0) <= 1e-6);
  CHECK(cs.cycles[0].stable);
  CHECK(cs.cycles[0].derivative < 0);
  CHECK(cs.convergence_claim);
}

TEST_CASE("cycles: flipping the signs makes the cycle repelling") {
  PerturbedSystem sys(Expr::parse("(x^2+y^2)/2"), 1, {},
                      {{1, Expr::parse("y*(lam + kap*x - mu*(x^2+y^2)/2)")}},
                      4.0, {{"lam", -0.5}, {"mu", -0.5}, {"kap", 0.0}});
  ActionAngleChart chart = build_chart(sys, 48, 256);
  AveragedModel model = build_averaged_model(sys, chart, 1);
  auto fresh = [&](double e) { return fresh_drift(sys, model, e); };
  CycleSet cs = find_cycles(model, 1, 4.0, fresh);
  REQUIRE(cs.cycles.size() == 1);
  CHECK(std::abs(cs.cycles[0].energy - 1.0) <= 1e-6);
  CHECK(!cs.cycles[0].stable);
  CHECK(cs.cycles[0].derivative > 0);
}

TEST_CASE("cycles: a sign-definite drift has no cycles, and negation swaps "
          "stability labels at identical roots") {
  std::vector<double> e = logspace(2e-4, 2.0, 48);
  auto make = [&](double flip) {
    AveragedModel m;
    m.energies = e;
    m.n_phi = 64;
    m.order = 1;
    m.q = 1;
    std::vector<double> lam(e.size());
    for (std::size_t i = 0; i < e.size(); ++i)
      lam[i] = flip * (0.5 - 0.5 * e[i]) * e[i];
    m.lambda[1] = lam;
    m.z_mean[1] = std::vector<double>(e.size(), 0.0);
    m.f_scale[1] = 1.0;
    LeadingFit f;
    f.k = 1;
    f.power = 1;
    f.coeff = flip * 0.5;
    f.integer_power = true;
    m.leading.push_back(f);
    m.summary.first_nonzero = 1;
    return m;
  };

  AveragedModel plus = make(1.0), minus = make(-1.0);
  CycleSet cp = find_cycles(plus, 1, 2.0);
  CycleSet cm = find_cycles(minus, 1, 2.0);
  REQUIRE(cp.cycles.size() == 1);
  REQUIRE(cm.cycles.size() == 1);
  CHECK(cp.cycles[0].energy ==
        doctest::Approx(cm.cycles[0].energy).epsilon(1e-12));
  CHECK(cp.cycles[0].stable != cm.cycles[0].stable);

  // strictly negative drift: no roots
  AveragedModel none = make(1.0);
  for (double& v : none.lambda[1]) v = -std::abs(v) - 1e-6;
  CHECK(find_cycles(none, 1, 2.0).cycles.empty());
}

TEST_CASE("theorem conditions: resonance-free pendulum") {
  PerturbedSystem sys(Expr::parse("1 - cos(x) + y^2/2"), 4, {},
                      {{1, Expr::parse("kap*y*sin(x)")},
                       {2, Expr::parse("lam*y")}},
                      1.8, {{"kap", 1.0}, {"lam", -1.0}});
  ActionAngleChart chart = build_chart(sys, 24, 256);
  TheoremReport rep = check_theorem_conditions(sys, chart, 1);
  CHECK(rep.applicable);
  CHECK(rep.passed);
  CHECK(std::abs(rep.extracted.at("lambda_n") - (-1.0)) <= 1e-6);
  CHECK(rep.extracted.at("n") == 2);
  CHECK(rep.extracted.at("l") == 1);
}

TEST_CASE("theorem conditions: cubic friction satisfies the second theorem "
          "but not the first") {
  PerturbedSystem sys(Expr::parse("1 - cos(x) + y^2/2"), 2, {},
                      {{1, Expr::parse("alpha*x^2*y")},
                       {2, Expr::parse("lam*y")}},
                      1.8, {{"alpha", -2.0}, {"lam", 0.4}});
  ActionAngleChart chart = build_chart(sys, 24, 256);

  TheoremReport rep1 = check_theorem_conditions(sys, chart, 1);
  CHECK(!rep1.passed);  // the x^2 y loop integral does not vanish

  TheoremReport rep2 = check_theorem_conditions(sys, chart, 2);
  CHECK(rep2.applicable);
  CHECK(rep2.passed);
  CHECK(std::abs(rep2.extracted.at("alpha_m") - (-2.0)) <= 1e-5);
  CHECK(std::abs(rep2.extracted.at("beta_m")) <= 1e-6);
  CHECK(std::abs(rep2.extracted.at("gamma_ms") - (-1.0)) <= 1e-5);
  CHECK(std::abs(rep2.extracted.at("lambda_n") - 0.4) <= 1e-6);
}

TEST_CASE("theorem conditions: saturating term splits into the cycle shape "
          "plus a vanishing-loop residual") {
  PerturbedSystem sys(Expr::parse("(x^2+y^2)/2"), 1, {},
                      {{1, Expr::parse("y*(lam + kap*x - mu*(x^2+y^2)/2)")}},
                      4.0, {{"lam", 0.5}, {"mu", 0.5}, {"kap", 0.7}});
  ActionAngleChart chart = build_chart(sys, 24, 256);
  TheoremReport rep = check_theorem_conditions(sys, chart, 3);
  CHECK(rep.applicable);
  CHECK(rep.passed);
  CHECK(std::abs(rep.extracted.at("lambda_n") - 0.5) <= 1e-6);
  CHECK(std::abs(rep.extracted.at("mu_n") - 0.5) <= 1e-6);
  CHECK(std::abs(rep.extracted.at("cycle_energy") - 1.0) <= 1e-5);
}

TEST_CASE("cycles: grid-edge roots carry the boundary flag, flat roots the "
          "degenerate flag") {
  std::vector<double> e = logspace(2e-4, 2.0, 48);
  AveragedModel m;
  m.energies = e;
  m.n_phi = 64;
  m.order = 1;
  m.q = 1;
  // root in the last grid cell plus an extremely flat (quintic) root at
  // 0.02; the sampled-curve derivative there sits below the degeneracy
  // threshold
  std::vector<double> lam(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    double E = e[i];
    double d = E - 0.02;
    lam[i] = 1e-3 * E * d * d * d * d * d * (1.9 - E);
  }
  m.lambda[1] = lam;
  m.z_mean[1] = std::vector<double>(e.size(), 0.0);
  m.f_scale[1] = 1.0;
  LeadingFit f;
  f.k = 1;
  f.power = 1;
  f.coeff = lam[0] / e[0];
  f.integer_power = true;
  m.leading.push_back(f);
  m.summary.first_nonzero = 1;

  CycleSet cs = find_cycles(m, 1, 2.0);
  REQUIRE(cs.cycles.size() == 2);
  bool saw_boundary = false, saw_degenerate = false;
  for (const Cycle& c : cs.cycles) {
    if (c.boundary) saw_boundary = true;
    if (c.degenerate) saw_degenerate = true;
  }
  CHECK(saw_boundary);
  CHECK(saw_degenerate);
}
