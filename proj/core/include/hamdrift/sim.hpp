#ifndef HAMDRIFT_SIM_HPP
#define HAMDRIFT_SIM_HPP

#include <array>
#include <string>
#include <vector>

#include "hamdrift/classify.hpp"
#include "hamdrift/system.hpp"

namespace hamdrift {

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Time series of the full non-autonomous system, log-thinned, with the
/// energy E = H0(x, y) of the limiting Hamiltonian along the trajectory.
/// peak_t / peak_x record |x| at the y = 0 crossings (the turning points
/// of x), which trace the oscillation envelope.
struct Trajectory {
  std::vector<double> t, x, y, e;
  std::vector<double> peak_t, peak_x;
  double t_start = 1, t_end = 0, tol = 0;
  std::array<double, 2> seed{};
  bool blow_up = false;  // |x| or |y| crossed the blow-up limit; data partial
  std::string note;

  double e_start() const { return e.empty() ? 0.0 : e.front(); }
  double e_end() const { return e.empty() ? 0.0 : e.back(); }
};

struct IntegrateOptions {
  double tol = 1e-10;           // relative tolerance; absolute = tol * 1e-2
  std::size_t max_samples = 100000;
  std::size_t samples = 2000;   // log-spaced output points
  bool record_peaks = true;
  double blow_up_limit = 1e6;
  double fixed_step = 0;        // nonzero: constant-step integration
};

/// Integrate dx/dt = d_y H, dy/dt = -d_x H + F from t_start > 0.
/// Blow-up is a first-class outcome: the flag is set and the partial
/// trajectory returned. Step-size underflow throws SimError.
Trajectory integrate(const PerturbedSystem& sys, double x0, double y0,
                     double t_start, double t_end,
                     const IntegrateOptions& opts = {});

/// Empirical fit of the asymptotic law over the last decade in t
/// (the transient half of the samples is discarded; samples at the
/// numerical energy floor are clamped away first).
///  PowerLaw:             fitted_exponent = d log E / d log t
///  StretchedExponential: fitted_exponent = slope of log E vs t^(1 - n/q)
///  ConvergesToCycle:     fitted_exponent = mean E; drift = change across
///                        the window
struct RateFit {
  RateKind kind = RateKind::None;
  double fitted_exponent = 0;
  double r2 = 0;
  double window_lo = 0, window_hi = 0;
  double drift = 0;
};

RateFit fit_rate(const Trajectory& traj, const RatePrediction& hypothesis,
                 double n_over_q);

/// Log-log slope of the |x| oscillation envelope over [t_lo, t_hi].
struct EnvelopeFit {
  double exponent = 0;
  double r2 = 0;
  std::size_t peaks = 0;
};

EnvelopeFit fit_envelope(const Trajectory& traj, double t_lo, double t_hi);

enum class TriState { Yes, No, Unknown };

/// Does E(t) * t^nu exceed 1e-3 and stay above it for the rest of the
/// window? Meaningful for trajectories started from small energies when a
/// weighted-instability verdict is under test (for a conservative system
/// the product grows trivially). Returns Unknown rather than No when the
/// trajectory is too short to tell.
struct WeightedCheck {
  TriState verdict = TriState::Unknown;
  double t_cross = 0;
};

WeightedCheck weighted_instability_check(const Trajectory& traj, double nu);

struct SeedOutcome {
  std::array<double, 2> seed{};
  double e_start = 0;
  bool pass = false;
  double measured = 0;
  double predicted = 0;
  std::string detail;
  RateFit fit;
};

struct VerifyReport {
  StabilityVerdict verdict;
  std::vector<SeedOutcome> seeds;
  bool all_pass = false;
};

struct VerifyOptions {
  double t_end = 1e4;
  double tol = 1e-10;
  double exponent_tol = 0.15;  // |measured - predicted| for power laws
};

/// Closes the predict-then-simulate loop: integrates every seed and runs
/// the estimator matching the verdict's rate prediction. Seeds fan out
/// across worker threads; the report order is the seed order.
VerifyReport verify(const PerturbedSystem& sys,
                    const StabilityVerdict& verdict,
                    const std::vector<std::array<double, 2>>& seeds,
                    const VerifyOptions& opts = {});

/// Convergence check for one predicted cycle energy: mean E over the fit
/// window within 0.02 of the prediction with negligible drift.
VerifyReport verify_cycle(const PerturbedSystem& sys, double cycle_energy,
                          const std::vector<std::array<double, 2>>& seeds,
                          const VerifyOptions& opts = {});

/// Three seeds spanning small to medium energies on the y = 0 section.
std::vector<std::array<double, 2>> default_seeds(const PerturbedSystem& sys);

}  // namespace hamdrift

#endif
