#include "hamdrift/sim.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "hamdrift/chart.hpp"
#include "hamdrift/fit.hpp"
#include "hamdrift/ode.hpp"

namespace hamdrift {

Trajectory integrate(const PerturbedSystem& sys, double x0, double y0,
                     double t_start, double t_end,
                     const IntegrateOptions& opts) {
  if (!(t_start > 0))
    throw SimError("integrate: t_start must be positive (the decaying "
                   "coefficients are singular at t = 0)");
  if (!(t_end > t_start)) throw SimError("integrate: t_end must exceed t_start");

  Trajectory traj;
  traj.t_start = t_start;
  traj.t_end = t_end;
  traj.tol = opts.tol;
  traj.seed = {x0, y0};

  Rhs2 rhs = [&sys](double t, const State2& s, State2& ds) {
    sys.full_rhs(t, s, ds);
  };
  OdeOptions oo;
  oo.rel_tol = opts.tol;
  oo.abs_tol = opts.tol * 1e-2;
  oo.fixed_step = opts.fixed_step;
  Dopri5 stepper(rhs, oo);
  stepper.init(t_start, {x0, y0});

  std::size_t n_out = std::min(opts.max_samples, opts.samples);
  if (n_out < 2) n_out = 2;
  double log_ratio = std::log(t_end / t_start);
  std::size_t next = 0;

  auto push_sample = [&](double t, double x, double y) {
    traj.t.push_back(t);
    traj.x.push_back(x);
    traj.y.push_back(y);
    traj.e.push_back(sys.h0(x, y));
  };
  push_sample(t_start, x0, y0);
  next = 1;

  double y_prev = y0;
  while (stepper.t() < t_end) {
    DenseStep st;
    try {
      st = stepper.advance(t_end);
    } catch (const OdeError& e) {
      throw SimError(std::string("integrate: ") + e.what());
    }
    double t1 = stepper.t();
    double x1 = stepper.y()[0], y1 = stepper.y()[1];

    while (next < n_out) {
      double tj = t_start * std::exp(log_ratio * static_cast<double>(next) /
                                     static_cast<double>(n_out - 1));
      if (tj > t1 && t1 < t_end) break;
      tj = std::min(tj, t1);
      push_sample(tj, st.eval_component(0, tj), st.eval_component(1, tj));
      ++next;
    }

    if (opts.record_peaks && ((y_prev < 0 && y1 >= 0) || (y_prev > 0 && y1 <= 0))) {
      double a = st.t0, b = st.t0 + st.h;
      for (int i = 0; i < 60; ++i) {
        double mid = 0.5 * (a + b);
        double ym = st.eval_component(1, mid);
        if ((ym > 0) == (y_prev > 0))
          a = mid;
        else
          b = mid;
      }
      double tc = 0.5 * (a + b);
      traj.peak_t.push_back(tc);
      traj.peak_x.push_back(std::abs(st.eval_component(0, tc)));
    }
    y_prev = y1;

    if (!std::isfinite(x1) || !std::isfinite(y1) ||
        std::abs(x1) > opts.blow_up_limit || std::abs(y1) > opts.blow_up_limit) {
      traj.blow_up = true;
      traj.note = "state escaped the blow-up limit at t = " + std::to_string(t1);
      push_sample(t1, x1, y1);
      return traj;
    }
  }
  if (traj.t.back() < t_end * (1 - 1e-12))
    push_sample(stepper.t(), stepper.y()[0], stepper.y()[1]);
  return traj;
}

namespace {

struct Window {
  std::size_t lo = 0, hi = 0;  // index range [lo, hi)
  double t_lo = 0, t_hi = 0;
};

// last decade in t, after clamping away samples at the energy floor
Window fit_window(const Trajectory& traj) {
  if (traj.t.size() < 8) throw SimError("fit window: too few samples");
  double e_max = 0;
  for (double e : traj.e) e_max = std::max(e_max, e);
  double floor = 1e-18 * std::max(e_max, 1e-300);
  std::size_t last = traj.t.size();
  while (last > 1 && (traj.e[last - 1] <= floor || !std::isfinite(traj.e[last - 1])))
    --last;
  double t_hi = traj.t[last - 1];
  double t_lo = t_hi / 10.0;
  if (t_lo < traj.t_start)
    throw SimError("fit window: trajectory shorter than one decade");
  Window w;
  w.t_lo = t_lo;
  w.t_hi = t_hi;
  w.hi = last;
  w.lo = static_cast<std::size_t>(
      std::lower_bound(traj.t.begin(), traj.t.begin() + last, t_lo) -
      traj.t.begin());
  if (w.hi - w.lo < 8) throw SimError("fit window: too few samples in the last decade");
  return w;
}

}  // namespace

RateFit fit_rate(const Trajectory& traj, const RatePrediction& hypothesis,
                 double n_over_q) {
  Window w = fit_window(traj);
  RateFit out;
  out.kind = hypothesis.kind;
  out.window_lo = w.t_lo;
  out.window_hi = w.t_hi;

  std::vector<double> ts(traj.t.begin() + w.lo, traj.t.begin() + w.hi);
  std::vector<double> es(traj.e.begin() + w.lo, traj.e.begin() + w.hi);

  switch (hypothesis.kind) {
    case RateKind::PowerLaw: {
      LinearFit lf = loglog_fit(ts, es);
      out.fitted_exponent = lf.slope;
      out.r2 = lf.r2;
      return out;
    }
    case RateKind::StretchedExponential: {
      if (std::abs(1.0 - n_over_q) < 1e-9)
        throw SimError("fit_rate: stretched-exponential frame needs n != q");
      std::vector<double> u, v;
      for (std::size_t i = 0; i < ts.size(); ++i) {
        if (es[i] > 0 && std::isfinite(es[i])) {
          u.push_back(std::pow(ts[i], 1.0 - n_over_q));
          v.push_back(std::log(es[i]));
        }
      }
      LinearFit lf = linear_fit(u, v);
      out.fitted_exponent = lf.slope;
      out.r2 = lf.r2;
      return out;
    }
    case RateKind::ConvergesToCycle:
    case RateKind::None: {
      double mean = 0;
      for (double e : es) mean += e;
      mean /= static_cast<double>(es.size());
      std::vector<double> lt(ts.size());
      for (std::size_t i = 0; i < ts.size(); ++i) lt[i] = std::log(ts[i]);
      LinearFit lf = linear_fit(lt, es);
      out.fitted_exponent = mean;
      out.drift = lf.slope * std::log(w.t_hi / w.t_lo);  // change across window
      out.r2 = 1.0 - std::min(1.0, std::abs(out.drift) /
                                       std::max(mean, 1e-300));
      return out;
    }
  }
  return out;
}

EnvelopeFit fit_envelope(const Trajectory& traj, double t_lo, double t_hi) {
  std::vector<double> ts, xs;
  for (std::size_t i = 0; i < traj.peak_t.size(); ++i) {
    if (traj.peak_t[i] >= t_lo && traj.peak_t[i] <= t_hi &&
        traj.peak_x[i] > 0) {
      ts.push_back(traj.peak_t[i]);
      xs.push_back(traj.peak_x[i]);
    }
  }
  if (ts.size() < 8)
    throw SimError("fit_envelope: fewer than 8 oscillation peaks in the window");
  LinearFit lf = loglog_fit(ts, xs);
  EnvelopeFit out;
  out.exponent = lf.slope;
  out.r2 = lf.r2;
  out.peaks = ts.size();
  return out;
}

WeightedCheck weighted_instability_check(const Trajectory& traj, double nu) {
  const double eps = 1e-3;
  WeightedCheck out;
  std::size_t n = traj.t.size();
  if (n < 4) return out;  // Unknown

  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = traj.e[i] * std::pow(traj.t[i], nu);

  // first index from which the weighted energy stays above the threshold
  std::size_t cross = n;
  for (std::size_t i = n; i-- > 0;) {
    if (w[i] < eps) break;
    cross = i;
  }
  if (cross < n && w[cross] >= eps) {
    out.verdict = TriState::Yes;
    out.t_cross = traj.t[cross];
    return out;
  }

  if (traj.t.back() / traj.t.front() < 100) {
    out.verdict = TriState::Unknown;
    return out;
  }
  // persistently far below the threshold: settled
  std::size_t half = n / 2;
  double late_max = 0;
  for (std::size_t i = half; i < n; ++i) late_max = std::max(late_max, w[i]);
  if (late_max <= 0.1 * eps) {
    out.verdict = TriState::No;
    return out;
  }
  // still growing at the end? then the crossing may simply lie beyond t_end
  std::vector<double> lt, lw;
  for (std::size_t i = half; i < n; ++i) {
    if (w[i] > 0) {
      lt.push_back(std::log(traj.t[i]));
      lw.push_back(std::log(w[i]));
    }
  }
  if (lt.size() >= 4 && linear_fit(lt, lw).slope > 0.05) {
    out.verdict = TriState::Unknown;
    return out;
  }
  out.verdict = TriState::No;
  return out;
}

namespace {

double mean_energy_tail(const Trajectory& traj) {
  Window w = fit_window(traj);
  double mean = 0;
  for (std::size_t i = w.lo; i < w.hi; ++i) mean += traj.e[i];
  return mean / static_cast<double>(w.hi - w.lo);
}

double max_energy_after(const Trajectory& traj, double t_min) {
  double m = 0;
  for (std::size_t i = 0; i < traj.t.size(); ++i)
    if (traj.t[i] >= t_min) m = std::max(m, traj.e[i]);
  return m;
}

SeedOutcome check_seed(const PerturbedSystem& sys,
                       const StabilityVerdict& verdict,
                       const std::array<double, 2>& seed,
                       const VerifyOptions& opts) {
  SeedOutcome out;
  out.seed = seed;
  out.e_start = sys.h0(seed[0], seed[1]);

  IntegrateOptions io;
  io.tol = opts.tol;
  Trajectory traj;
  try {
    traj = integrate(sys, seed[0], seed[1], 1.0, opts.t_end, io);
  } catch (const SimError& e) {
    out.pass = false;
    out.detail = std::string("integration failed: ") + e.what();
    return out;
  }

  double n_over_q =
      verdict.inputs.q > 0
          ? static_cast<double>(verdict.inputs.n) / verdict.inputs.q
          : 0.0;

  switch (verdict.regime) {
    case Regime::ExponentiallyStable: {
      out.fit = fit_rate(traj, verdict.rate, n_over_q);
      out.measured = out.fit.fitted_exponent;
      out.pass = out.fit.fitted_exponent < 0 && out.fit.r2 >= 0.95;
      out.detail = "stretched-frame slope";
      return out;
    }
    case Regime::PolynomiallyStable: {
      out.fit = fit_rate(traj, verdict.rate, n_over_q);
      out.measured = out.fit.fitted_exponent;
      out.predicted = verdict.rate.exponent;
      if (verdict.rate.one_sided)
        out.pass = out.measured <= out.predicted + opts.exponent_tol;
      else
        out.pass = std::abs(out.measured - out.predicted) <= opts.exponent_tol;
      out.detail = verdict.rate.one_sided ? "power-law exponent (one-sided bound)"
                                          : "power-law exponent";
      return out;
    }
    case Regime::Stable:
    case Regime::NeutrallyStable: {
      double m = max_energy_after(traj, 10.0);
      out.measured = m / std::max(out.e_start, 1e-300);
      out.pass = !traj.blow_up && m <= 2.0 * out.e_start &&
                 traj.e_end() <= 1.2 * out.e_start;
      out.detail = "bounded energy (max/start ratio)";
      return out;
    }
    case Regime::Unstable: {
      bool bounded_cell =
          verdict.inputs.q > 0 && verdict.inputs.n > verdict.inputs.q;
      if (traj.blow_up) {
        out.measured = traj.e.back() / std::max(out.e_start, 1e-300);
        out.pass = !bounded_cell;
        out.detail = "trajectory blew up";
        return out;
      }
      double late = mean_energy_tail(traj);
      out.measured = late / std::max(out.e_start, 1e-300);
      if (bounded_cell) {
        out.pass = out.measured >= 1.05 && out.measured <= 10.0;
        out.detail = "bounded growth factor (n > q)";
      } else {
        out.pass = out.measured >= 4.0;
        out.detail = "energy growth factor";
      }
      return out;
    }
    case Regime::WeightedUnstable: {
      double nu = 2.0 * verdict.weight_exponent.value_or(0.0);
      WeightedCheck wc = weighted_instability_check(traj, nu);
      out.measured = wc.t_cross;
      out.pass = wc.verdict == TriState::Yes;
      out.detail = "weighted energy crossing";
      return out;
    }
    case Regime::Undetermined: {
      out.pass = true;
      out.detail = "no prediction to verify";
      return out;
    }
  }
  return out;
}

}  // namespace

VerifyReport verify(const PerturbedSystem& sys,
                    const StabilityVerdict& verdict,
                    const std::vector<std::array<double, 2>>& seeds,
                    const VerifyOptions& opts) {
  VerifyReport rep;
  rep.verdict = verdict;
  std::vector<std::future<SeedOutcome>> futs;
  futs.reserve(seeds.size());
  for (const auto& s : seeds)
    futs.push_back(std::async(std::launch::async, [&, s] {
      return check_seed(sys, verdict, s, opts);
    }));
  rep.all_pass = true;
  for (auto& f : futs) {
    rep.seeds.push_back(f.get());
    rep.all_pass = rep.all_pass && rep.seeds.back().pass;
  }
  return rep;
}

VerifyReport verify_cycle(const PerturbedSystem& sys, double cycle_energy,
                          const std::vector<std::array<double, 2>>& seeds,
                          const VerifyOptions& opts) {
  VerifyReport rep;
  rep.verdict.regime = Regime::Stable;
  rep.verdict.source = "cycle convergence";
  rep.verdict.rate.kind = RateKind::ConvergesToCycle;
  rep.verdict.rate.cycle_energy = cycle_energy;

  auto one = [&](const std::array<double, 2>& s) {
    SeedOutcome out;
    out.seed = s;
    out.e_start = sys.h0(s[0], s[1]);
    IntegrateOptions io;
    io.tol = opts.tol;
    try {
      Trajectory traj = integrate(sys, s[0], s[1], 1.0, opts.t_end, io);
      RatePrediction hyp;
      hyp.kind = RateKind::ConvergesToCycle;
      out.fit = fit_rate(traj, hyp, 0.0);
      out.measured = out.fit.fitted_exponent;  // mean energy on the window
      out.predicted = cycle_energy;
      out.pass = std::abs(out.measured - cycle_energy) <= 0.02 &&
                 std::abs(out.fit.drift) <= 0.05 * std::max(cycle_energy, 1e-300);
      out.detail = "mean energy over the last decade";
    } catch (const SimError& e) {
      out.pass = false;
      out.detail = e.what();
    }
    return out;
  };

  std::vector<std::future<SeedOutcome>> futs;
  for (const auto& s : seeds)
    futs.push_back(std::async(std::launch::async, [&, s] { return one(s); }));
  rep.all_pass = true;
  for (auto& f : futs) {
    rep.seeds.push_back(f.get());
    rep.all_pass = rep.all_pass && rep.seeds.back().pass;
  }
  return rep;
}

std::vector<std::array<double, 2>> default_seeds(const PerturbedSystem& sys) {
  std::vector<double> energies = {0.005, 0.125, 0.5};
  std::vector<std::array<double, 2>> seeds;
  for (double e : energies) {
    double clamped = std::min(e, 0.45 * sys.e0());
    seeds.push_back(locate_start(sys, clamped));
  }
  return seeds;
}

}  // namespace hamdrift
