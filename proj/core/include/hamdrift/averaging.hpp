#ifndef HAMDRIFT_AVERAGING_HPP
#define HAMDRIFT_AVERAGING_HPP

#include <map>
#include <optional>
#include <vector>

#include "hamdrift/chart.hpp"
#include "hamdrift/fit.hpp"
#include "hamdrift/system.hpp"

namespace hamdrift {

struct AveragingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Real samples on the chart lattice (energy rows x uniform phase grid),
/// 2*pi-periodic in phase by construction.
struct AngularField {
  std::size_t n_e = 0, n_phi = 0;
  std::vector<double> v;

  AngularField() = default;
  AngularField(std::size_t ne, std::size_t np)
      : n_e(ne), n_phi(np), v(ne * np, 0.0) {}
  double& at(std::size_t ie, std::size_t j) { return v[ie * n_phi + j]; }
  double at(std::size_t ie, std::size_t j) const { return v[ie * n_phi + j]; }
  const double* row(std::size_t ie) const { return &v[ie * n_phi]; }
  double* row(std::size_t ie) { return &v[ie * n_phi]; }
  double max_abs() const;
};

/// Leading small-energy behaviour of one averaged drift curve,
/// Lambda_k(E) ~ coeff * E^power.
struct LeadingFit {
  int k = 0;
  bool zero = false;        // curve identically zero (below 1e-12 of scale)
  bool fit_failed = false;  // non-power-law residual (R^2 < 0.99)
  bool integer_power = false;
  double power = 0;   // rounded to the nearest integer when within 0.1
  double raw_power = 0;
  double coeff = 0;   // signed, recovered from the smallest-energy sample
  double r2 = 0;
  std::string note;
};

/// Averaged model of the energy drift: sampled Lambda_k(E) curves, the
/// oscillatory corrections v_k(E, phi) of the Lyapunov change of variables,
/// and fitted leading powers. Pure data; safe to share once built.
struct AveragedModel {
  std::vector<double> energies;
  std::size_t n_phi = 0;
  int order = 0;  // highest k computed (N)
  int q = 0;

  std::map<int, std::vector<double>> lambda;  // Lambda_k(E)
  std::map<int, std::vector<double>> f_mean, z_mean;
  std::map<int, AngularField> f_field, g_field, z_field, v_field;
  std::map<int, double> f_scale;  // max |f_k|, reference for zero detection
  std::vector<LeadingFit> leading;

  /// Positional summary of the fitted leading terms.
  struct Summary {
    int first_nonzero = 0;  // smallest k with Lambda_k not identically 0
    int linear_order = 0;   // smallest k whose leading power is 1 (else 0)
    double lambda_lin = 0;
    int nonlinear_order = 0;  // smallest k with leading power >= 2 (else 0)
    int s = 0;
    double gamma_s = 0;
    int second_order = 0;  // next nonzero k after nonlinear_order (else 0)
    int d = 0;
    double gamma_d = 0;
    bool fits_ok = true;
  } summary;

  const LeadingFit* fit_for(int k) const;
  double lambda_over_e_scale(int k) const;

  /// V_N(E, phi, t) = E + sum_k t^(-k/q) v_k evaluated at a lattice node.
  double transform_value_at(std::size_t ie, std::size_t j, double t) const;
};

/// Coefficient of t^(-k/q) in dE/dt after the action-angle change of
/// variables:  -omega * (d_phi H_k(X,Y) - F_k(X,Y) d_phi X).
/// Phase derivatives of the chart are 4th-order centered differences;
/// a missing H_k or F_k acts as zero.
AngularField energy_rate_term(const PerturbedSystem& sys,
                              const ActionAngleChart& chart, int k);

/// Coefficient of t^(-k/q) in dphi/dt - omega:
///   omega * (d_E H_k(X,Y) - F_k(X,Y) d_E X),
/// with 3-point nonuniform stencils for the energy derivatives.
AngularField phase_rate_term(const PerturbedSystem& sys,
                             const ActionAngleChart& chart, int k);

/// Mean over the periodic phase grid, (1/2pi) integral f dphi
/// (trapezoid rule; spectrally accurate for smooth periodic samples).
std::vector<double> average_phi(const AngularField& field);

/// Order-k coupling term assembled from lower-order corrections:
///   Z_1 = 0
///   Z_2 = v_1 d_E L_1 - (f_1 d_E v_1 + g_1 d_phi v_1) [+ ((2-q)/q) v_{2-q}]
///   Z_3 = v_2 d_E L_1 + v_1 d_E L_2 + (1/2) v_1^2 d2_E L_1
///         - sum_{i+j=3} (f_j d_E v_i + g_j d_phi v_i) [+ ((3-q)/q) v_{3-q}]
/// where L_k is Lambda_k and v with index <= 0 or missing is zero.
/// Orders above 3 are not implemented and throw.
AngularField drift_correction_term(const AveragedModel& partial, int k,
                                   const ActionAngleChart& chart);

/// Lambda_k = <f_k> - <Z_k>.
std::vector<double> averaged_drift(const AngularField& f_k,
                                   const AngularField& z_k);

/// Oscillatory correction v_k of the change of variables:
///   v_k = H_k(X,Y) + (1/omega) int_0^phi (Lambda_k - omega F_k d_phi X + Z_k)
/// anchored at v_k(E, 0) = H_k(X(0,E), Y(0,E)). The integrand must have
/// zero phase average (checked to 1e-7 of its scale, then removed exactly).
AngularField oscillatory_correction(const PerturbedSystem& sys,
                                    const ActionAngleChart& chart, int k,
                                    const std::vector<double>& lambda_k,
                                    const AngularField& z_k);

/// Loop integral of F * d_y H0 once around the level curve H0 = E,
/// quadrature along the stored orbit with arclength elements divided by
/// |grad H0| (the time element), so the value equals (2*pi/omega) times
/// the phase average of F * d_y H0.
double loop_integral(const PerturbedSystem& sys, const ActionAngleChart& chart,
                     const Expr& f, double E, const ParamEnv& env);

/// loop_integral normalized by the loop time: the plain orbit average of
/// F * d_y H0. Computed without using omega or any chart derivatives, so
/// it is an independent route to <F d_y H0>.
double loop_average(const PerturbedSystem& sys, const ActionAngleChart& chart,
                    const Expr& f, double E, const ParamEnv& env);

/// Same loop average from an explicit orbit and a compiled integrand.
double orbit_loop_average(const PerturbedSystem& sys, const OrbitSamples& orb,
                          const CompiledExpr& f);

/// Least-squares fit of log|curve| against log E over the smallest decade
/// of the grid. Power is rounded to the nearest integer when within 0.1
/// (fractional powers are reported with a warning note). The coefficient
/// is recovered, with sign, from the smallest-energy sample. Throws
/// FitError when R^2 < 0.99 or the window has fewer than 8 usable points.
///
/// A curve with max|curve| <= zero_rel * ref_scale is flagged identically
/// zero. The nominal threshold is 1e-12 of the field scale; the model
/// builder raises it to the measured chart accuracy floor, below which a
/// "zero" cannot be distinguished from orbit integration noise.
LeadingFit fit_leading_power(const std::vector<double>& energies,
                             const std::vector<double>& curve,
                             double ref_scale, int k, double zero_rel = 1e-12);

/// Run the full order-1..N chain (N <= 3) and fit every leading power.
AveragedModel build_averaged_model(const PerturbedSystem& sys,
                                   const ActionAngleChart& chart, int order);

/// Re-evaluate Lambda_n (n = first nonzero order) at an arbitrary energy
/// by integrating a fresh orbit; the coupling-term average is interpolated
/// from the model grid. Used to refine cycle locations beyond the grid
/// resolution.
double fresh_drift(const PerturbedSystem& sys, const AveragedModel& model,
                   double E);

/// 3-point nonuniform first derivative of a curve sampled on the grid.
std::vector<double> grid_derivative(const std::vector<double>& e,
                                    const std::vector<double>& f);
/// 3-point nonuniform second derivative.
std::vector<double> grid_second_derivative(const std::vector<double>& e,
                                           const std::vector<double>& f);

}  // namespace hamdrift

#endif
