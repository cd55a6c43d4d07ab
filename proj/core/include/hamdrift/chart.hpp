#ifndef HAMDRIFT_CHART_HPP
#define HAMDRIFT_CHART_HPP

#include <cstddef>
#include <vector>

#include "hamdrift/system.hpp"

namespace hamdrift {

struct ChartError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ChartOptions {
  double abs_tol = 1e-12;   // limiting-orbit integration tolerances
  double rel_tol = 1e-10;
  double e_min = 0;         // 0: defaults to E0 * 1e-4
  double max_period = 1e4;  // period search bound ("level curve not closed")
};

/// One periodic orbit of the limiting system, sampled uniformly in phase.
struct OrbitSamples {
  std::vector<double> x, y;  // size M, samples at phi_j = 2*pi*j/M
  double energy = 0;
  double period = 0;
  double omega = 0;
};

struct ChartPoint {
  double x, y, omega;
};

/// Sampled action-angle coordinates of the limiting system: for each grid
/// energy E the 2*pi-periodic orbit (X(phi,E), Y(phi,E)) and the angular
/// frequency omega(E) = 2*pi/T(E).
///
/// Phase convention: phi = 0 at the intersection of the level curve with
/// the half-line {y = 0, x < 0}, matching the small-energy expansion
/// X = -sqrt(2E) cos(phi) + O(E). Any rotation of the phase origin would
/// be equally valid; this one is fixed so results are reproducible.
///
/// The energy grid is geometric (uniform in log E) so that leading-power
/// fits have support near E = 0. Immutable once built; safe to share
/// across threads.
class ActionAngleChart {
 public:
  const std::vector<double>& energies() const { return energies_; }
  const std::vector<double>& omegas() const { return omegas_; }
  std::size_t n_energy() const { return energies_.size(); }
  std::size_t n_phi() const { return n_phi_; }

  double x_at(std::size_t ie, std::size_t j) const { return x_[ie * n_phi_ + j]; }
  double y_at(std::size_t ie, std::size_t j) const { return y_[ie * n_phi_ + j]; }
  const double* x_row(std::size_t ie) const { return &x_[ie * n_phi_]; }
  const double* y_row(std::size_t ie) const { return &y_[ie * n_phi_]; }
  double omega_row(std::size_t ie) const { return omegas_[ie]; }

  /// Interpolated lookup: cubic in log E across grid rows, trigonometric
  /// (barycentric) in phi. phi is reduced mod 2*pi. Throws ChartError when
  /// E lies outside the grid range.
  ChartPoint lookup(double E, double phi) const;
  double omega_at(double E) const;

  /// Worst relative energy defect max |H0(X,Y) - E| / E over all samples.
  double energy_defect() const { return energy_defect_; }

 private:
  std::vector<double> energies_, omegas_;
  std::vector<double> x_, y_;
  std::size_t n_phi_ = 0;
  double energy_defect_ = 0;
  friend ActionAngleChart build_chart(const PerturbedSystem&, std::size_t,
                                      std::size_t, const ChartOptions&);
};

/// Starting point of the phi = 0 section: y = 0, x < 0, H0(x,0) = E
/// within 1e-12. Newton iteration with a bisection fallback bracket.
/// Throws ChartError when no sign change is found on the half-line.
std::array<double, 2> locate_start(const PerturbedSystem& sys, double E);

/// Integrate the limiting system once around the level curve H0 = E,
/// locate the period by the return of y to the phi = 0 section (rising
/// crossing, polished on the dense output), and resample at M uniform
/// phases.
OrbitSamples sample_orbit(const PerturbedSystem& sys, double E, std::size_t m,
                          const ChartOptions& opts = {});

/// Build the full chart; orbit integrations run in parallel across grid
/// energies. Requires n_e >= 8 and even n_phi >= 64.
ActionAngleChart build_chart(const PerturbedSystem& sys, std::size_t n_e,
                             std::size_t n_phi, const ChartOptions& opts = {});

/// Fourth-order centered derivative of a periodic row sampled uniformly
/// in phi (period 2*pi).
std::vector<double> periodic_derivative(const double* row, std::size_t m);

}  // namespace hamdrift

#endif
