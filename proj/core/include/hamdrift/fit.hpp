#ifndef HAMDRIFT_FIT_HPP
#define HAMDRIFT_FIT_HPP

#include <cstddef>
#include <span>
#include <stdexcept>

namespace hamdrift {

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
  std::size_t count = 0;
};

/// Ordinary least squares of v against u. Throws FitError for fewer than
/// two points or a degenerate abscissa.
LinearFit linear_fit(std::span<const double> u, std::span<const double> v);

/// Slope of log|v| against log u over (u, v) pairs with u > 0, |v| > floor.
LinearFit loglog_fit(std::span<const double> u, std::span<const double> v,
                     double floor = 0.0);

}  // namespace hamdrift

#endif
