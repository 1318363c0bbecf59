#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

#include "sojourn/errors.hpp"

namespace sojourn {

// Dormand-Prince 5(4) with FSAL, fixed maximum state size. The flow module
// drives it with event location done by re-stepping from the last accepted
// state, so no high-order interpolant is needed for the limits.
struct OdeState {
  static constexpr int kMax = 10;
  std::array<double, kMax> y{};
  int dim = 0;

  double& operator[](int i) { return y[i]; }
  double operator[](int i) const { return y[i]; }
};

template <class RHS>
class Dopri5 {
 public:
  Dopri5(RHS rhs, int dim, double rtol = 1e-10, double atol = 1e-12)
      : rhs_(rhs), dim_(dim), rtol_(rtol), atol_(atol) {}

  // One embedded step attempt from (t, y) with size h. Fills y_out, err; k1
  // must hold f(t, y) on entry (FSAL: k7 of an accepted step).
  void stage(double t, const OdeState& y, double h, const OdeState& k1, OdeState& y_out,
             OdeState& k_last, double& err) const {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                            e4 = 125.0 / 192 - 393.0 / 640,
                            e5 = -2187.0 / 6784 + 92097.0 / 339200,
                            e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;

    OdeState k2, k3, k4, k5, k6, tmp;
    tmp.dim = k2.dim = k3.dim = k4.dim = k5.dim = k6.dim = dim_;
    y_out.dim = k_last.dim = dim_;

    for (int i = 0; i < dim_; ++i) tmp[i] = y[i] + h * a21 * k1[i];
    rhs_(t + c2 * h, tmp, k2);
    for (int i = 0; i < dim_; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    rhs_(t + c3 * h, tmp, k3);
    for (int i = 0; i < dim_; ++i)
      tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs_(t + c4 * h, tmp, k4);
    for (int i = 0; i < dim_; ++i)
      tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs_(t + c5 * h, tmp, k5);
    for (int i = 0; i < dim_; ++i)
      tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    rhs_(t + h, tmp, k6);
    for (int i = 0; i < dim_; ++i)
      y_out[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    rhs_(t + h, y_out, k_last);

    err = 0.0;
    for (int i = 0; i < dim_; ++i) {
      double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                      e7 * k_last[i]);
      double sc = atol_ + rtol_ * std::max(std::abs(y[i]), std::abs(y_out[i]));
      err = std::max(err, std::abs(e) / sc);
    }
  }

  // Advance one accepted adaptive step. On entry f1 = f(t, y); on exit it
  // holds f at the new point. Returns the step size actually taken.
  double step(double& t, OdeState& y, OdeState& f1, double& h) const {
    for (int attempt = 0; attempt < 60; ++attempt) {
      OdeState y_new, f_new;
      double err = 0.0;
      stage(t, y, h, f1, y_new, f_new, err);
      if (err <= 1.0) {
        double taken = h;
        t += h;
        y = y_new;
        f1 = f_new;
        double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
        h *= std::clamp(fac, 0.2, 5.0);
        return taken;
      }
      h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.7);
      if (std::abs(h) < 1e-14 * (1.0 + std::abs(t)))
        throw Error(Err::IntegratorFailure, "step size underflow");
    }
    throw Error(Err::IntegratorFailure, "too many rejected steps");
  }

  // Single forced step of size h (no error control); used by the event
  // refinement, which re-steps from an accepted state with shrinking h.
  void forced(double t, const OdeState& y, const OdeState& f1, double h, OdeState& y_out) const {
    OdeState k_last;
    double err;
    stage(t, y, h, f1, y_out, k_last, err);
  }

  void eval(double t, const OdeState& y, OdeState& f) const { rhs_(t, y, f); }

 private:
  RHS rhs_;
  int dim_;
  double rtol_, atol_;
};

// Locate g(t*, y(t*)) = 0 inside an accepted step [t0, t0+h] given a sign
// change of g. Secant/bisection hybrid on the re-stepped solution; returns
// the step offset tau and fills the state at the event.
template <class RHS, class EventFn>
double locate_event(const Dopri5<RHS>& ode, double t0, const OdeState& y0, const OdeState& f0,
                    double h, EventFn g, OdeState& y_event, double gtol) {
  double lo = 0.0, hi = h;
  double glo = g(y0);
  OdeState ytmp;
  ode.forced(t0, y0, f0, h, ytmp);
  double ghi = g(ytmp);
  double tau = hi, gtau = ghi;
  y_event = ytmp;

  for (int it = 0; it < 80; ++it) {
    if (std::abs(gtau) <= gtol) break;
    double mid;
    if (std::abs(ghi - glo) > 1e-300) {
      mid = lo - glo * (hi - lo) / (ghi - glo);  // secant estimate
      double lo_g = lo + 0.05 * (hi - lo), hi_g = hi - 0.05 * (hi - lo);
      if (!(mid > lo_g && mid < hi_g)) mid = 0.5 * (lo + hi);
    } else {
      mid = 0.5 * (lo + hi);
    }
    if (mid == lo || mid == hi) break;
    ode.forced(t0, y0, f0, mid, ytmp);
    double gm = g(ytmp);
    tau = mid;
    gtau = gm;
    y_event = ytmp;
    if ((gm < 0) == (glo < 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
      ghi = gm;
    }
    if (hi - lo < 1e-16 * (1.0 + std::abs(t0))) break;
  }
  return tau;
}

}  // namespace sojourn
