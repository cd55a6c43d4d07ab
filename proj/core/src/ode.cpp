#include "hamdrift/ode.hpp"

#include <algorithm>
#include <cmath>

namespace hamdrift {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// difference between the 5th and 4th order weights
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense output
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

}  // namespace

Dopri5::Dopri5(Rhs2 rhs, OdeOptions opts)
    : rhs_(std::move(rhs)), opts_(opts) {}

void Dopri5::init(double t0, const State2& y0) {
  t_ = t0;
  y_ = y0;
  have_k1_ = false;
  h_ = 0;
  n_accepted_ = 0;
  n_total_ = 0;
}

double Dopri5::initial_step_guess(double dir) const {
  State2 dy;
  rhs_(t_, y_, dy);
  double ynorm = std::max(std::abs(y_[0]), std::abs(y_[1]));
  double fnorm = std::max(std::abs(dy[0]), std::abs(dy[1]));
  double scale = opts_.abs_tol + opts_.rel_tol * std::max(ynorm, 1.0);
  double h = fnorm > 1e-30 ? 0.01 * std::sqrt(scale / fnorm) : 1e-4;
  h = std::min(h, 1e-2 * std::max(std::abs(t_), 1.0));
  return std::max(h, 1e-10) * dir;
}

DenseStep Dopri5::advance(double t_max) {
  double dir = t_max >= t_ ? 1.0 : -1.0;
  if (t_max == t_) throw OdeError("advance() called with t_max == t");

  if (opts_.fixed_step > 0) {
    h_ = opts_.fixed_step * dir;
  } else if (h_ == 0 || h_ * dir <= 0) {
    h_ = initial_step_guess(dir);
  }

  if (!have_k1_) {
    rhs_(t_, y_, k1_);
    have_k1_ = true;
  }

  State2 k2, k3, k4, k5, k6, k7, yt, y1;
  for (;;) {
    if (++n_total_ > opts_.max_steps)
      throw OdeError("step budget exceeded");

    double h = h_;
    if (opts_.max_step > 0 && std::abs(h) > opts_.max_step)
      h = opts_.max_step * dir;
    if ((t_ + h - t_max) * dir > 0) h = t_max - t_;
    if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t_)))
      throw OdeError("step size underflow");

    for (int i = 0; i < 2; ++i) yt[i] = y_[i] + h * a21 * k1_[i];
    rhs_(t_ + c2 * h, yt, k2);
    for (int i = 0; i < 2; ++i)
      yt[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2[i]);
    rhs_(t_ + c3 * h, yt, k3);
    for (int i = 0; i < 2; ++i)
      yt[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2[i] + a43 * k3[i]);
    rhs_(t_ + c4 * h, yt, k4);
    for (int i = 0; i < 2; ++i)
      yt[i] = y_[i] +
              h * (a51 * k1_[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs_(t_ + c5 * h, yt, k5);
    for (int i = 0; i < 2; ++i)
      yt[i] = y_[i] + h * (a61 * k1_[i] + a62 * k2[i] + a63 * k3[i] +
                           a64 * k4[i] + a65 * k5[i]);
    rhs_(t_ + h, yt, k6);
    for (int i = 0; i < 2; ++i)
      y1[i] = y_[i] + h * (b1 * k1_[i] + b3 * k3[i] + b4 * k4[i] +
                           b5 * k5[i] + b6 * k6[i]);
    rhs_(t_ + h, y1, k7);

    double err = 0;
    for (int i = 0; i < 2; ++i) {
      double e = h * (e1 * k1_[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                      e6 * k6[i] + e7 * k7[i]);
      double sc = opts_.abs_tol +
                  opts_.rel_tol * std::max(std::abs(y_[i]), std::abs(y1[i]));
      err += (e / sc) * (e / sc);
    }
    err = std::sqrt(err / 2.0);

    if (!std::isfinite(err)) {
      // non-finite state (blow-up in progress); retry with a smaller step
      h_ = h * 0.2;
      continue;
    }

    bool accept = opts_.fixed_step > 0 || err <= 1.0;
    double factor =
        err > 1e-30 ? 0.9 * std::pow(err, -0.2) : 5.0;
    factor = std::clamp(factor, 0.2, 5.0);

    if (accept) {
      DenseStep ds;
      ds.t0 = t_;
      ds.h = h;
      for (int i = 0; i < 2; ++i) {
        double ydiff = y1[i] - y_[i];
        double bspl = h * k1_[i] - ydiff;
        ds.r1[i] = y_[i];
        ds.r2[i] = ydiff;
        ds.r3[i] = bspl;
        ds.r4[i] = ydiff - h * k7[i] - bspl;
        ds.r5[i] = h * (d1 * k1_[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                        d6 * k6[i] + d7 * k7[i]);
      }
      t_ += h;
      y_ = y1;
      k1_ = k7;  // FSAL
      ++n_accepted_;
      if (opts_.fixed_step == 0) h_ = h * factor;
      return ds;
    }
    h_ = h * factor;
  }
}

}  // namespace hamdrift
