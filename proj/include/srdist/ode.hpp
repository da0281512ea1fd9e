#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "srdist/numeric.hpp"

namespace srdist {

struct OdeOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  double initial_step = 0.0;  // 0 => heuristic
  std::int64_t max_steps = 4000000;
};

// One accepted step; c5 is the fifth coefficient of the order-4 continuous
// extension of the pair (the other four derive from y0, y1, f0, f1).
struct OdeStep {
  double t0, t1;
  VectorXd y0, y1, f0, f1, c5;
};

class OdeSolution {
 public:
  std::vector<OdeStep> steps;

  double t_begin() const { return steps.front().t0; }
  double t_end() const { return steps.back().t1; }

  // Order-4 continuous extension inside the accepted step containing t;
  // its local error matches the order of the step itself.
  VectorXd at(double t) const {
    const OdeStep& s = locate(t);
    double h = s.t1 - s.t0;
    if (h == 0.0) return s.y1;
    double u = (t - s.t0) / h;
    double u1 = 1.0 - u;
    VectorXd ydiff = s.y1 - s.y0;
    VectorXd bspl = h * s.f0 - ydiff;
    VectorXd r4 = ydiff - h * s.f1 - bspl;
    return s.y0 + u * (ydiff + u1 * (bspl + u * (r4 + u1 * s.c5)));
  }

  const VectorXd& final_state() const { return steps.back().y1; }

 private:
  const OdeStep& locate(double t) const {
    bool fwd = t_end() >= t_begin();
    std::size_t lo = 0, hi = steps.size() - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      bool after = fwd ? (t > steps[mid].t1) : (t < steps[mid].t1);
      if (after)
        lo = mid + 1;
      else
        hi = mid;
    }
    return steps[lo];
  }
};

// Adaptive embedded Runge-Kutta 5(4) pair (Dormand-Prince coefficients)
// with FSAL; the derivative functor is f(t, y, dy).  Integrates forwards
// or backwards depending on the sign of t1 - t0.
template <class F>
OdeSolution integrate_ode(F&& f, VectorXd y0, double t0, double t1,
                          const OdeOptions& opt = {}) {
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                      a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                      a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                      a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static const double d1 = -12715105075.0 / 11282082432.0,
                      d3 = 87487479700.0 / 32700410799.0,
                      d4 = -10690763975.0 / 1880347072.0,
                      d5 = 701980252875.0 / 199316789632.0,
                      d6 = -1453857185.0 / 822651844.0,
                      d7 = 69997945.0 / 29380423.0;

  const Eigen::Index n = y0.size();
  OdeSolution sol;
  if (t1 == t0) {
    VectorXd f0(n);
    f(t0, y0, f0);
    sol.steps.push_back({t0, t0, y0, y0, f0, f0, VectorXd::Zero(n)});
    return sol;
  }
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);

  VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  VectorXd ytmp(n), y5(n), err(n);
  double t = t0;
  VectorXd y = y0;
  f(t, y, k1);

  double h = opt.initial_step > 0 ? opt.initial_step : span / 100.0;
  h = std::min(h, span);

  std::int64_t nsteps = 0;
  while (dir * (t1 - t) > 0) {
    if (++nsteps > opt.max_steps)
      throw NumericalError("ode: step budget exhausted at t=" +
                           std::to_string(t));
    if (h < span * 1e-15 || t + dir * h == t)
      throw NumericalError("ode: step size underflow at t=" + std::to_string(t) +
                           ", h=" + std::to_string(h));
    h = std::min(h, dir * (t1 - t));
    const double hs = dir * h;

    ytmp = y + hs * (a21 * k1);
    f(t + c2 * hs, ytmp, k2);
    ytmp = y + hs * (a31 * k1 + a32 * k2);
    f(t + c3 * hs, ytmp, k3);
    ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * hs, ytmp, k4);
    ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * hs, ytmp, k5);
    ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + hs, ytmp, k6);
    y5 = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    f(t + hs, y5, k7);
    err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err_norm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double sc =
          opt.abs_tol + opt.rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
      double q = err[i] / sc;
      err_norm += q * q;
    }
    err_norm = std::sqrt(err_norm / static_cast<double>(n));

    if (err_norm <= 1.0) {
      VectorXd c5 = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 +
                          d7 * k7);
      sol.steps.push_back({t, t + hs, y, y5, k1, k7, std::move(c5)});
      t += hs;
      y.swap(y5);
      k1.swap(k7);  // FSAL
    }
    double factor = err_norm > 0
                        ? 0.9 * std::pow(err_norm, -0.2)
                        : 5.0;
    h *= std::clamp(factor, 0.2, 5.0);
  }
  return sol;
}

}  // namespace srdist
