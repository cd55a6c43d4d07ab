#ifndef HAMDRIFT_ODE_HPP
#define HAMDRIFT_ODE_HPP

#include <array>
#include <cstddef>
#include <functional>
#include <stdexcept>

namespace hamdrift {

using State2 = std::array<double, 2>;
using Rhs2 = std::function<void(double t, const State2& y, State2& dy)>;

struct OdeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OdeOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double initial_step = 0;  // 0: choose automatically
  double max_step = 0;      // 0: unlimited
  double fixed_step = 0;    // 0: adaptive; otherwise constant step size
  std::size_t max_steps = 50'000'000;
};

/// One accepted step with the standard dopri5 dense-output coefficients.
/// eval() interpolates the solution anywhere inside [t0, t0+h].
struct DenseStep {
  double t0 = 0, h = 0;
  State2 r1{}, r2{}, r3{}, r4{}, r5{};

  double eval_component(int c, double t) const {
    double th = (t - t0) / h;
    double th1 = 1.0 - th;
    return r1[c] + th * (r2[c] + th1 * (r3[c] + th * (r4[c] + th1 * r5[c])));
  }
  State2 eval(double t) const {
    return {eval_component(0, t), eval_component(1, t)};
  }
};

/// Adaptive embedded Runge-Kutta 5(4), Dormand-Prince coefficients.
/// Integrates forward or backward depending on the ordering of t0 and the
/// t_max passed to advance().
class Dopri5 {
 public:
  Dopri5(Rhs2 rhs, OdeOptions opts = {});

  void init(double t0, const State2& y0);

  /// Take one accepted step, not moving past t_max. Returns the dense
  /// representation of the step. Throws OdeError on step-size underflow
  /// or when the step budget is exhausted.
  DenseStep advance(double t_max);

  double t() const { return t_; }
  const State2& y() const { return y_; }
  std::size_t steps_taken() const { return n_accepted_; }

 private:
  Rhs2 rhs_;
  OdeOptions opts_;
  double t_ = 0;
  State2 y_{};
  State2 k1_{};
  bool have_k1_ = false;
  double h_ = 0;
  std::size_t n_accepted_ = 0;
  std::size_t n_total_ = 0;

  double initial_step_guess(double dir) const;
};

}  // namespace hamdrift

#endif
