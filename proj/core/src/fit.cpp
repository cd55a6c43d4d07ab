#include "hamdrift/fit.hpp"

#include <cmath>
#include <vector>

namespace hamdrift {

LinearFit linear_fit(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw FitError("linear_fit: size mismatch");
  std::size_t n = u.size();
  if (n < 2) throw FitError("linear_fit: need at least two points");
  double su = 0, sv = 0;
  for (std::size_t i = 0; i < n; ++i) {
    su += u[i];
    sv += v[i];
  }
  double mu = su / n, mv = sv / n;
  double suu = 0, suv = 0, svv = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double du = u[i] - mu, dv = v[i] - mv;
    suu += du * du;
    suv += du * dv;
    svv += dv * dv;
  }
  if (suu <= 0) throw FitError("linear_fit: degenerate abscissa");
  LinearFit f;
  f.slope = suv / suu;
  f.intercept = mv - f.slope * mu;
  f.count = n;
  if (svv <= 0) {
    f.r2 = 1.0;  // perfectly flat data, exactly reproduced
  } else {
    double ss_res = svv - f.slope * suv;
    f.r2 = 1.0 - std::max(0.0, ss_res) / svv;
  }
  return f;
}

LinearFit loglog_fit(std::span<const double> u, std::span<const double> v,
                     double floor) {
  std::vector<double> lu, lv;
  lu.reserve(u.size());
  lv.reserve(v.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] > 0 && std::abs(v[i]) > floor && std::isfinite(v[i])) {
      lu.push_back(std::log(u[i]));
      lv.push_back(std::log(std::abs(v[i])));
    }
  }
  return linear_fit(lu, lv);
}

}  // namespace hamdrift
