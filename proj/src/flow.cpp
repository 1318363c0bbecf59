#include "sojourn/flow.hpp"

#include <algorithm>
#include <cmath>

namespace sojourn {

namespace {

// Interior packing: [z(n), zeta(n), t], dim 2n+1.
// Collar packing:   [x, y(m), s, xi, eta(m)], dim 2n+1 with m = n-1.

struct CollarIdx {
  int m;
  explicit CollarIdx(int n) : m(n - 1) {}
  int x() const { return 0; }
  int y(int a) const { return 1 + a; }
  int s() const { return 1 + m; }
  int xi() const { return 2 + m; }
  int eta(int a) const { return 3 + m + a; }
  int dim() const { return 3 + 2 * m; }
};

}  // namespace

void interior_rhs(const Model& model, const OdeState& st, OdeState& d) {
  int n = model.dim();
  Vec<Dual<double, 3>> zd(n);
  for (int i = 0; i < n; ++i) zd[i] = Dual<double, 3>::seed(st[i], i);
  Mat<Dual<double, 3>> g = model.interior_metric_components(zd);
  Mat<Dual<double, 3>> ginv = inverse(g);

  Vecd zeta(n);
  for (int i = 0; i < n; ++i) zeta[i] = st[n + i];

  d.dim = 2 * n + 1;
  double norm2_val = 0.0;
  for (int i = 0; i < n; ++i) {
    double zdot = 0.0;
    for (int j = 0; j < n; ++j) zdot += ginv(i, j).val * zeta[j];
    d[i] = zdot;
    norm2_val += zeta[i] * zdot;
  }
  for (int c = 0; c < n; ++c) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += ginv(i, j).d[c] * zeta[i] * zeta[j];
    d[n + c] = -0.5 * s;
  }
  d[2 * n] = std::sqrt(std::max(norm2_val, 0.0));  // dt = |zeta|_g d(param)
}

void collar_rhs(const Model& model, double sigma, const OdeState& st, OdeState& d) {
  int n = model.dim();
  CollarIdx ix(n);
  int m = ix.m;
  double x = st[ix.x()];
  Vecd y(m), eta(m);
  for (int a = 0; a < m; ++a) {
    y[a] = st[ix.y(a)];
    eta[a] = st[ix.eta(a)];
  }
  double xi = st[ix.xi()];

  double hsym, dhx;
  Vecd dhy, hinv_eta;
  model.collar_symbol(x, y, eta, hsym, dhx, dhy, hinv_eta);

  d.dim = ix.dim();
  if (model.kind() == GeometryKind::Scattering) {
    d[ix.x()] = -2.0 * (sigma + x * x * xi);
    d[ix.s()] = -2.0 * xi;
    d[ix.xi()] = 2.0 * x * xi * xi + dhx;
    for (int a = 0; a < m; ++a) {
      d[ix.y(a)] = -2.0 * hinv_eta[a];
      d[ix.eta(a)] = dhy[a];
    }
  } else {
    d[ix.x()] = -2.0 * (sigma + x * xi);
    d[ix.s()] = -2.0 * xi;
    d[ix.xi()] = xi * xi + hsym + x * dhx;
    for (int a = 0; a < m; ++a) {
      d[ix.y(a)] = -2.0 * x * hinv_eta[a];
      d[ix.eta(a)] = x * dhy[a];
    }
  }
}

double collar_characteristic(const Model& model, double sigma, const OdeState& st) {
  int n = model.dim();
  CollarIdx ix(n);
  int m = ix.m;
  double x = st[ix.x()];
  Vecd y(m), eta(m);
  for (int a = 0; a < m; ++a) {
    y[a] = st[ix.y(a)];
    eta[a] = st[ix.eta(a)];
  }
  double xi = st[ix.xi()];
  double hsym, dhx;
  Vecd dhy, hinv_eta;
  model.collar_symbol(x, y, eta, hsym, dhx, dhy, hinv_eta);
  if (model.kind() == GeometryKind::Scattering)
    return -2.0 * xi * sigma - x * x * xi * xi - hsym;
  return -(2.0 * xi * sigma + x * xi * xi + x * hsym);
}

OdeState pack_interior(const Model& model, const Vecd& z, const Vecd& zeta, double t) {
  int n = model.dim();
  OdeState st;
  st.dim = 2 * n + 1;
  for (int i = 0; i < n; ++i) {
    st[i] = z[i];
    st[n + i] = zeta[i];
  }
  st[2 * n] = t;
  return st;
}

OdeState pack_collar(const Model& model, double x, const Vecd& y, double s, double xi,
                     const Vecd& eta) {
  CollarIdx ix(model.dim());
  OdeState st;
  st.dim = ix.dim();
  st[ix.x()] = x;
  st[ix.s()] = s;
  st[ix.xi()] = xi;
  for (int a = 0; a < ix.m; ++a) {
    st[ix.y(a)] = y[a];
    st[ix.eta(a)] = eta[a];
  }
  return st;
}

PhaseState unpack_state(const Model& model, ChartId chart, double sigma, double param,
                        const OdeState& st) {
  int n = model.dim();
  PhaseState ps;
  ps.chart = chart;
  ps.param = param;
  if (chart == ChartId::Interior) {
    ps.base = Vecd(n);
    ps.momentum = Vecd(n);
    for (int i = 0; i < n; ++i) {
      ps.base[i] = st[i];
      ps.momentum[i] = st[n + i];
    }
    ps.t = st[2 * n];
  } else {
    CollarIdx ix(n);
    ps.base = Vecd(n);
    ps.momentum = Vecd(n);
    ps.base[0] = st[ix.x()];
    ps.momentum[0] = st[ix.xi()];
    for (int a = 0; a < ix.m; ++a) {
      ps.base[1 + a] = st[ix.y(a)];
      ps.momentum[1 + a] = st[ix.eta(a)];
    }
    ps.s = st[ix.s()];
    ps.sigma = sigma;
    double x = ps.base[0];
    ps.t = (model.kind() == GeometryKind::Scattering) ? ps.s + 1.0 / std::max(x, 1e-300)
                                                      : ps.s - std::log(std::max(x, 1e-300));
  }
  return ps;
}

OdeState hamilton_rhs(const Model& model, const PhaseState& state) {
  OdeState st, d;
  if (state.chart == ChartId::Interior) {
    st = pack_interior(model, state.base, state.momentum, state.t);
    interior_rhs(model, st, d);
    return d;
  }
  int m = model.bdim();
  Vecd y(m), eta(m);
  for (int a = 0; a < m; ++a) {
    y[a] = state.base[1 + a];
    eta[a] = state.momentum[1 + a];
  }
  st = pack_collar(model, state.base[0], y, state.s, state.momentum[0], eta);
  double p = collar_characteristic(model, state.sigma, st);
  double scale = state.sigma * state.sigma + 1e-30;
  if (std::abs(p) > 1e-6 * scale)
    throw Error(Err::ChartInvariantViolated, "collar state off the characteristic variety");
  collar_rhs(model, state.sigma, st, d);
  return d;
}

void enter_collar(const Model& model, const Vecd& z, const Vecd& zeta, double t, double tau,
                  double& x, Vecd& y, double& s, double& xi, Vecd& eta) {
  ChartPointd p{ChartId::Interior, z}, q;
  Vecd cov;
  model.transition(p, zeta, q, cov);
  x = q.coords[0];
  int m = model.bdim();
  y = Vecd(m);
  eta = Vecd(m);
  for (int a = 0; a < m; ++a) {
    y[a] = q.coords[1 + a];
    eta[a] = -cov[1 + a];
  }
  double xi_rev = -cov[0];
  if (model.kind() == GeometryKind::Scattering) {
    xi = xi_rev - tau / (x * x);
    s = t - 1.0 / x;
  } else {
    xi = xi_rev - tau / x;
    s = t + std::log(x);
  }
}

void leave_collar(const Model& model, double x, const Vecd& y, double s, double xi,
                  const Vecd& eta, double sigma, Vecd& z, Vecd& zeta, double& t) {
  int n = model.dim();
  int m = n - 1;
  double xi_rev;
  if (model.kind() == GeometryKind::Scattering) {
    xi_rev = xi + sigma / (x * x);
    t = s + 1.0 / x;
  } else {
    xi_rev = xi + sigma / x;
    t = s - std::log(x);
  }
  Vecd cov(n);
  cov[0] = -xi_rev;
  for (int a = 0; a < m; ++a) cov[1 + a] = -eta[a];
  Vecd xy(n);
  xy[0] = x;
  for (int a = 0; a < m; ++a) xy[1 + a] = y[a];
  ChartPointd p{ChartId::Collar, xy}, q;
  model.transition(p, cov, q, zeta);
  z = q.coords;
}

namespace {

struct PathBuilder {
  GeodesicPath path;
  const Model* model;
  bool store;

  void add(ChartId chart, double sigma, double param, const OdeState& st, const OdeState& d) {
    if (!store && !path.samples.empty()) {
      path.samples.back() = unpack_state(*model, chart, sigma, param, st);
      path.raw.back() = st;
      path.draw.back() = d;
      path.raw_chart.back() = chart;
      return;
    }
    path.samples.push_back(unpack_state(*model, chart, sigma, param, st));
    path.raw.push_back(st);
    path.draw.push_back(d);
    path.raw_chart.push_back(chart);
  }
};

}  // namespace

GeodesicPath integrate_geodesic(const Model& model, const Vecd& z, const Vecd& zeta,
                                const FlowOptions& opts) {
  int n = model.dim();
  if (!model.interior_chart_contains(z))
    throw Error(Err::OutsideChart, "launch point outside the interior chart");
  double tau = model.covector_norm(z, zeta);
  if (!(tau > 0.0)) throw Error(Err::ChartInvariantViolated, "zero initial covector");

  double x0 = model.collar_x0();
  double x_back = std::min(1.5 * x0, 0.95 * model.collar_limit());

  PathBuilder pb;
  pb.model = &model;
  pb.store = opts.store_samples;
  pb.path.n = n;
  pb.path.sigma = tau;

  auto rhs_int = [&](double, const OdeState& st, OdeState& d) { interior_rhs(model, st, d); };
  auto rhs_col = [&](double, const OdeState& st, OdeState& d) { collar_rhs(model, tau, st, d); };
  Dopri5<decltype(rhs_int)> ode_int(rhs_int, 2 * n + 1, opts.rtol, opts.atol);
  Dopri5<decltype(rhs_col)> ode_col(rhs_col, 2 * n + 1, opts.rtol, opts.atol);

  CollarIdx ix(n);
  double param = 0.0;
  int steps = 0;

  bool in_collar = model.x_of_interior(z) < x0;
  OdeState st, f;
  if (in_collar) {
    double xx, s0, xi0;
    Vecd yy, eta0;
    enter_collar(model, z, zeta, 0.0, tau, xx, yy, s0, xi0, eta0);
    st = pack_collar(model, xx, yy, s0, xi0, eta0);
    ode_col.eval(param, st, f);
    pb.add(ChartId::Collar, tau, param, st, f);
  } else {
    st = pack_interior(model, z, zeta, 0.0);
    ode_int.eval(param, st, f);
    pb.add(ChartId::Interior, tau, param, st, f);
  }

  double h = 1e-4;
  while (steps++ < opts.max_steps) {
    if (!in_collar) {
      double t_prev = st[2 * n];
      OdeState st_prev = st, f_prev = f;
      double p_prev = param;
      ode_int.step(param, st, f, h);
      double taken = param - p_prev;

      Vecd zc(n);
      for (int i = 0; i < n; ++i) zc[i] = st[i];
      double xv = model.x_of_interior(zc);
      if (xv < x0) {
        // locate the x = x0 crossing and hand over to the rescaled flow
        auto g = [&](const OdeState& y_) {
          Vecd zz(n);
          for (int i = 0; i < n; ++i) zz[i] = y_[i];
          return model.x_of_interior(zz) - x0;
        };
        OdeState y_ev;
        double tau_ev = locate_event(ode_int, p_prev, st_prev, f_prev, taken, g, y_ev, 1e-13);
        param = p_prev + tau_ev;
        Vecd ze(n), zetae(n);
        for (int i = 0; i < n; ++i) {
          ze[i] = y_ev[i];
          zetae[i] = y_ev[n + i];
        }
        double te = y_ev[2 * n];
        pb.add(ChartId::Interior, tau, param, y_ev, f);

        double xx, s0, xi0;
        Vecd yy, eta0;
        enter_collar(model, ze, zetae, te, tau, xx, yy, s0, xi0, eta0);
        st = pack_collar(model, xx, yy, s0, xi0, eta0);
        ode_col.eval(param, st, f);
        in_collar = true;
        h = 1e-4;
        pb.add(ChartId::Collar, tau, param, st, f);
        continue;
      }
      pb.add(ChartId::Interior, tau, param, st, f);
      if (st[2 * n] > opts.trap_time && t_prev > opts.trap_time) {
        pb.path.status = PathStatus::Trapped;
        return pb.path;
      }
    } else {
      OdeState st_prev = st, f_prev = f;
      double p_prev = param;
      ode_col.step(param, st, f, h);
      double taken = param - p_prev;

      if (st[ix.x()] <= 0.0) {
        auto g = [&](const OdeState& y_) { return y_[0]; };
        OdeState y_ev;
        double tau_ev = locate_event(ode_col, p_prev, st_prev, f_prev, taken, g, y_ev, 1e-12);
        param = p_prev + tau_ev;
        y_ev[ix.x()] = 0.0;  // event-located boundary point
        OdeState d_ev;
        ode_col.eval(param, y_ev, d_ev);
        pb.path.dx_dparam_at_exit = d_ev[ix.x()];
        // always append the exit sample
        bool saved_store = pb.store;
        pb.store = true;
        pb.add(ChartId::Collar, tau, param, y_ev, d_ev);
        pb.store = saved_store;
        pb.path.status = PathStatus::ReachedBoundary;
        return pb.path;
      }
      if (st[ix.x()] > x_back) {
        // crossed back out of the collar; switch to the interior chart
        auto g = [&](const OdeState& y_) { return y_[0] - x_back; };
        OdeState y_ev;
        double tau_ev = locate_event(ode_col, p_prev, st_prev, f_prev, taken, g, y_ev, 1e-13);
        param = p_prev + tau_ev;
        pb.add(ChartId::Collar, tau, param, y_ev, f);

        Vecd yy(ix.m), eta0(ix.m);
        for (int a = 0; a < ix.m; ++a) {
          yy[a] = y_ev[ix.y(a)];
          eta0[a] = y_ev[ix.eta(a)];
        }
        Vecd ze, zetae;
        double te;
        leave_collar(model, y_ev[ix.x()], yy, y_ev[ix.s()], y_ev[ix.xi()], eta0, tau, ze, zetae,
                     te);
        st = pack_interior(model, ze, zetae, te);
        ode_int.eval(param, st, f);
        in_collar = false;
        h = 1e-4;
        pb.add(ChartId::Interior, tau, param, st, f);
        continue;
      }
      pb.add(ChartId::Collar, tau, param, st, f);
      double t_now = unpack_state(model, ChartId::Collar, tau, param, st).t;
      if (t_now > opts.trap_time && st[ix.x()] > 0.5 * x0) {
        pb.path.status = PathStatus::Trapped;
        return pb.path;
      }
    }
  }
  pb.path.status = PathStatus::MaxTime;
  return pb.path;
}

namespace {

// Cubic Hermite evaluation of one path segment at fraction w in [0, 1].
void hermite_eval(const OdeState& y0, const OdeState& f0, const OdeState& y1, const OdeState& f1,
                  double h, double w, OdeState& out) {
  double w2 = w * w, w3 = w2 * w;
  double c0 = 2 * w3 - 3 * w2 + 1, c1 = w3 - 2 * w2 + w, c2 = -2 * w3 + 3 * w2, c3 = w3 - w2;
  out = y0;
  for (int k = 0; k < y0.dim; ++k)
    out.y[size_t(k)] = c0 * y0[k] + c1 * h * f0[k] + c2 * y1[k] + c3 * h * f1[k];
}

}  // namespace

// Dense (Hermite) interpolation of the raw collar state to a prescribed x
// value, scanning the stored samples from the end of the path.
bool path_state_at_x(const GeodesicPath& path, double x_target, OdeState& out) {
  for (int i = int(path.raw.size()) - 1; i > 0; --i) {
    if (path.raw_chart[i] != ChartId::Collar || path.raw_chart[i - 1] != ChartId::Collar)
      continue;
    double xa = path.raw[i - 1][0], xb = path.raw[i][0];
    if ((xa - x_target) * (xb - x_target) <= 0.0 && xa != xb) {
      double h = path.samples[i].param - path.samples[i - 1].param;
      double w = (x_target - xa) / (xb - xa);
      // refine w so the interpolated x hits x_target
      for (int it = 0; it < 40; ++it) {
        hermite_eval(path.raw[i - 1], path.draw[i - 1], path.raw[i], path.draw[i], h, w, out);
        double fx = out[0] - x_target;
        if (std::abs(fx) < 1e-14) break;
        // derivative of the interpolated x w.r.t. w
        double w2 = w * w;
        double d0 = 6 * w2 - 6 * w, d1 = 3 * w2 - 4 * w + 1, d2 = -6 * w2 + 6 * w,
               d3 = 3 * w2 - 2 * w;
        double dxdw = d0 * path.raw[i - 1][0] + d1 * h * path.draw[i - 1][0] +
                      d2 * path.raw[i][0] + d3 * h * path.draw[i][0];
        if (dxdw == 0.0) break;
        w = std::clamp(w - fx / dxdw, 0.0, 1.0);
      }
      hermite_eval(path.raw[i - 1], path.draw[i - 1], path.raw[i], path.draw[i], h, w, out);
      return true;
    }
  }
  return false;
}

BoundaryLimit boundary_limits(const Model& model, const GeodesicPath& path) {
  if (path.status != PathStatus::ReachedBoundary)
    throw Error(Err::NotAtBoundary, "path did not reach the boundary");
  const PhaseState& fin = path.back();
  int m = model.bdim();

  BoundaryLimit lim;
  lim.s = fin.s;
  lim.sigma = fin.sigma;
  lim.y = Vecd(m);
  lim.eta = Vecd(m);
  for (int a = 0; a < m; ++a) {
    lim.y[a] = fin.base[1 + a];
    lim.eta[a] = fin.momentum[1 + a];
  }

  // Consistency estimate: Richardson extrapolation of (s, y) in x from three
  // interior-of-collar cuts against the event values.
  CollarIdx ix(model.dim());
  double xa = 0.25 * model.collar_x0(), xb = 0.5 * xa, xc = 0.5 * xb;
  OdeState sa, sb, sc;
  if (path_state_at_x(path, xa, sa) && path_state_at_x(path, xb, sb) &&
      path_state_at_x(path, xc, sc)) {
    double err = 0.0;
    auto extrap = [&](int idx) {
      // Neville to x = 0 through (xa, xb, xc)
      double p01 = (xa * sb[idx] - xb * sa[idx]) / (xa - xb);
      double p12 = (xb * sc[idx] - xc * sb[idx]) / (xb - xc);
      return (xa * p12 - xc * p01) / (xa - xc);
    };
    err += std::abs(extrap(ix.s()) - fin.s);
    for (int a = 0; a < m; ++a) err += std::abs(extrap(ix.y(a)) - lim.y[a]);
    lim.err = err;
  } else {
    lim.err = 0.0;
  }
  return lim;
}

}  // namespace sojourn
