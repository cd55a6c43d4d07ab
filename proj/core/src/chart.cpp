#include "hamdrift/chart.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace hamdrift {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

double reduce_phase(double phi) {
  double r = std::remainder(phi, two_pi);
  if (r < 0) r += two_pi;
  if (r >= two_pi) r -= two_pi;
  return r;
}

}  // namespace

std::array<double, 2> locate_start(const PerturbedSystem& sys, double E) {
  if (!(E > 0)) throw ChartError("locate_start: E must be positive");
  if (E > sys.e0() * (1 + 1e-12))
    throw ChartError("locate_start: E exceeds E0");

  auto h = [&](double x) { return sys.h0(x, 0.0); };

  // walk outward from the origin to bracket the innermost crossing
  double step = std::sqrt(2.0 * E) / 8.0;
  if (!(step > 0) || !std::isfinite(step)) step = 1e-6;
  double inner = 0.0, outer = -step;
  double v_prev = 0.0;
  bool bracketed = false;
  for (int i = 0; i < 400; ++i) {
    double v = h(outer);
    if (!std::isfinite(v))
      throw ChartError("locate_start: H0 not finite on the bracket");
    if (v >= E) {
      bracketed = true;
      break;
    }
    if (v < v_prev) {
      // the walk stepped over a fold of H0 along the ray; put the outer
      // end at the interior maximum instead
      double a = outer, b = inner;
      for (int it = 0; it < 200; ++it) {
        double m1 = a + (b - a) / 3, m2 = b - (b - a) / 3;
        if (h(m1) < h(m2))
          a = m1;
        else
          b = m2;
      }
      double peak = 0.5 * (a + b);
      if (h(peak) >= E) {
        outer = peak;
        bracketed = true;
      }
      break;
    }
    v_prev = v;
    inner = outer;
    outer *= 1.25;
  }
  if (!bracketed)
    throw ChartError("locate_start: no sign change of H0 - E on {y=0, x<0}");

  // safeguarded Newton: keep x inside [outer, inner]
  double lo = outer, hi = inner;  // h(lo) >= E >= h(hi), lo < hi <= 0
  double x = 0.5 * (lo + hi);
  const double tol = 1e-12 * std::max(1.0, E);
  for (int it = 0; it < 200; ++it) {
    double v = h(x) - E;
    if (std::abs(v) <= tol) return {x, 0.0};
    if (v > 0)
      lo = x;
    else
      hi = x;
    double d = sys.h0_x(x, 0.0);
    double xn = (d != 0) ? x - v / d : lo;
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    x = xn;
  }
  if (std::abs(h(x) - E) <= 1e3 * tol) return {x, 0.0};
  throw ChartError("locate_start: Newton failed to converge");
}

OrbitSamples sample_orbit(const PerturbedSystem& sys, double E, std::size_t m,
                          const ChartOptions& opts) {
  auto start = locate_start(sys, E);

  Rhs2 rhs = [&sys](double, const State2& s, State2& ds) {
    sys.limiting_rhs(s, ds);
  };
  State2 ds0;
  rhs(0.0, start, ds0);
  if (!(ds0[1] > 0))
    throw ChartError("sample_orbit: flow does not leave the section upward");

  OdeOptions oo;
  oo.abs_tol = opts.abs_tol;
  oo.rel_tol = opts.rel_tol;
  Dopri5 stepper(rhs, oo);
  stepper.init(0.0, start);

  std::vector<DenseStep> steps;
  steps.reserve(256);
  double period = -1;
  double y_prev = 0.0;
  while (stepper.t() < opts.max_period) {
    DenseStep st;
    try {
      st = stepper.advance(opts.max_period);
    } catch (const OdeError& e) {
      throw ChartError(std::string("sample_orbit: integration failed: ") +
                       e.what());
    }
    double y_new = stepper.y()[1];
    if (y_prev < 0 && y_new >= 0) {
      // polish the rising crossing on the dense output
      double a = st.t0, b = st.t0 + st.h;
      for (int i = 0; i < 80; ++i) {
        double mid = 0.5 * (a + b);
        if (st.eval_component(1, mid) < 0)
          a = mid;
        else
          b = mid;
      }
      period = 0.5 * (a + b);
      steps.push_back(st);
      break;
    }
    y_prev = y_new;
    steps.push_back(st);
  }
  if (period <= 0)
    throw ChartError(
        "sample_orbit: level curve did not close within the period bound "
        "(possible separatrix or open level set)");

  OrbitSamples orb;
  orb.energy = E;
  orb.period = period;
  orb.omega = two_pi / period;
  orb.x.resize(m);
  orb.y.resize(m);
  orb.x[0] = start[0];
  orb.y[0] = start[1];

  // second pass: land on each phase time exactly instead of interpolating,
  // so the stored samples carry only the integration error
  Dopri5 resampler(rhs, oo);
  resampler.init(0.0, start);
  for (std::size_t j = 1; j <= m; ++j) {
    double tj = period * static_cast<double>(j) / static_cast<double>(m);
    while (resampler.t() < tj) {
      try {
        resampler.advance(tj);
      } catch (const OdeError& e) {
        throw ChartError(std::string("sample_orbit: resampling failed: ") +
                         e.what());
      }
    }
    if (j < m) {
      orb.x[j] = resampler.y()[0];
      orb.y[j] = resampler.y()[1];
    }
  }

  double closure =
      std::hypot(resampler.y()[0] - start[0], resampler.y()[1] - start[1]);
  if (closure > 1e-8 * std::max(1.0, std::abs(start[0])))
    throw ChartError("sample_orbit: orbit fails to close (gap " +
                     std::to_string(closure) + ")");
  return orb;
}

ActionAngleChart build_chart(const PerturbedSystem& sys, std::size_t n_e,
                             std::size_t n_phi, const ChartOptions& opts) {
  if (n_e < 8) throw ChartError("build_chart: n_e must be >= 8");
  if (n_phi < 64 || n_phi % 2 != 0)
    throw ChartError("build_chart: n_phi must be even and >= 64");

  double e_max = sys.e0();
  double e_min = opts.e_min > 0 ? opts.e_min : e_max * 1e-4;
  if (!(e_min > 0 && e_min < e_max))
    throw ChartError("build_chart: invalid energy range");

  ActionAngleChart chart;
  chart.n_phi_ = n_phi;
  chart.energies_.resize(n_e);
  chart.omegas_.assign(n_e, 0.0);
  chart.x_.assign(n_e * n_phi, 0.0);
  chart.y_.assign(n_e * n_phi, 0.0);
  double ratio = std::log(e_max / e_min) / static_cast<double>(n_e - 1);
  for (std::size_t i = 0; i < n_e; ++i)
    chart.energies_[i] = e_min * std::exp(ratio * static_cast<double>(i));
  chart.energies_.back() = e_max;

  std::exception_ptr first_error = nullptr;
  std::mutex err_mutex;
  auto worker = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < n_e; i += stride) {
      try {
        OrbitSamples orb = sample_orbit(sys, chart.energies_[i], n_phi, opts);
        chart.omegas_[i] = orb.omega;
        std::copy(orb.x.begin(), orb.x.end(), &chart.x_[i * n_phi]);
        std::copy(orb.y.begin(), orb.y.end(), &chart.y_[i * n_phi]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  std::size_t n_threads = std::min<std::size_t>(hw, n_e);
  std::vector<std::thread> pool;
  for (std::size_t tid = 1; tid < n_threads; ++tid)
    pool.emplace_back(worker, tid, n_threads);
  worker(0, n_threads);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);

  double defect = 0;
  for (std::size_t i = 0; i < n_e; ++i) {
    double E = chart.energies_[i];
    for (std::size_t j = 0; j < n_phi; ++j) {
      double d = std::abs(sys.h0(chart.x_at(i, j), chart.y_at(i, j)) - E) / E;
      defect = std::max(defect, d);
    }
    double w = chart.omegas_[i];
    if (!(std::isfinite(w)) || std::abs(w) < 1e-12 || std::abs(w) > 1e12)
      throw ChartError("build_chart: omega(E) left the admissible range");
  }
  chart.energy_defect_ = defect;
  if (defect > 1e-7)
    throw ChartError("build_chart: energy conservation defect " +
                     std::to_string(defect) + " exceeds 1e-7");
  return chart;
}

namespace {

// barycentric trigonometric interpolation on a uniform periodic grid
double trig_interp(const double* f, std::size_t m, double phi) {
  double num = 0, den = 0;
  double sign = 1;
  for (std::size_t j = 0; j < m; ++j) {
    double d = 0.5 * (phi - two_pi * static_cast<double>(j) / m);
    double s = std::sin(d);
    if (std::abs(s) < 1e-14) return f[j];
    double w = sign * std::cos(d) / s;
    num += w * f[j];
    den += w;
    sign = -sign;
  }
  return num / den;
}

// 4-point Lagrange interpolation in log E across chart rows
struct Stencil4 {
  std::size_t i0;
  double w[4];
};

Stencil4 log_stencil(const std::vector<double>& energies, double E) {
  std::size_t n = energies.size();
  auto it = std::upper_bound(energies.begin(), energies.end(), E);
  std::size_t hi = static_cast<std::size_t>(it - energies.begin());
  std::size_t i0 = hi >= 2 ? hi - 2 : 0;
  if (i0 + 4 > n) i0 = n - 4;
  Stencil4 st;
  st.i0 = i0;
  double u = std::log(E);
  double t[4];
  for (int a = 0; a < 4; ++a) t[a] = std::log(energies[i0 + a]);
  for (int a = 0; a < 4; ++a) {
    double w = 1;
    for (int b = 0; b < 4; ++b)
      if (b != a) w *= (u - t[b]) / (t[a] - t[b]);
    st.w[a] = w;
  }
  return st;
}

}  // namespace

ChartPoint ActionAngleChart::lookup(double E, double phi) const {
  if (!(E >= energies_.front() * (1 - 1e-12) &&
        E <= energies_.back() * (1 + 1e-12)))
    throw ChartError("lookup: E outside the chart range (no extrapolation)");
  E = std::clamp(E, energies_.front(), energies_.back());
  double p = reduce_phase(phi);
  Stencil4 st = log_stencil(energies_, E);
  ChartPoint out{0, 0, 0};
  for (int a = 0; a < 4; ++a) {
    std::size_t ie = st.i0 + a;
    out.x += st.w[a] * trig_interp(x_row(ie), n_phi_, p);
    out.y += st.w[a] * trig_interp(y_row(ie), n_phi_, p);
    out.omega += st.w[a] * omegas_[ie];
  }
  return out;
}

double ActionAngleChart::omega_at(double E) const {
  if (!(E >= energies_.front() * (1 - 1e-12) &&
        E <= energies_.back() * (1 + 1e-12)))
    throw ChartError("omega_at: E outside the chart range");
  E = std::clamp(E, energies_.front(), energies_.back());
  Stencil4 st = log_stencil(energies_, E);
  double w = 0;
  for (int a = 0; a < 4; ++a) w += st.w[a] * omegas_[st.i0 + a];
  return w;
}

std::vector<double> periodic_derivative(const double* row, std::size_t m) {
  std::vector<double> d(m);
  double h = two_pi / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t jm2 = (j + m - 2) % m, jm1 = (j + m - 1) % m;
    std::size_t jp1 = (j + 1) % m, jp2 = (j + 2) % m;
    d[j] = (-row[jp2] + 8.0 * row[jp1] - 8.0 * row[jm1] + row[jm2]) / (12.0 * h);
  }
  return d;
}

}  // namespace hamdrift
