#include "sojourn/radiation_pde.hpp"

#include <algorithm>
#include <cmath>

namespace sojourn {

namespace {

double bump(double q) {  // supported (-1,1), max 1
  if (q <= -1.0 || q >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - q * q));
}

double bump_prime(double q) {
  if (q <= -1.0 || q >= 1.0) return 0.0;
  double d = 1.0 - q * q;
  return bump(q) * (-2.0 * q / (d * d));
}

double bump_pp(double q) {
  if (q <= -1.0 || q >= 1.0) return 0.0;
  double d = 1.0 - q * q;
  return bump_prime(q) * (-2.0 * q / (d * d)) +
         bump(q) * (-2.0 / (d * d) - 8.0 * q * q / (d * d * d));
}

}  // namespace

double pulse_h(const PulseSpec& p, double xi) {
  double mid = -p.r0 + 0.5 * p.width;
  double half = 0.5 * p.width;
  return p.amplitude * bump((xi - mid) / half);
}

double pulse_h_prime(const PulseSpec& p, double xi) {
  double mid = -p.r0 + 0.5 * p.width;
  double half = 0.5 * p.width;
  return p.amplitude * bump_prime((xi - mid) / half) / half;
}

double pulse_k(const PulseSpec& p, double u) {
  if (p.in_width <= 0.0) return 0.0;
  double half = 0.5 * p.in_width;
  return p.amplitude * bump((u - p.in_center) / half);
}

double pulse_k_prime(const PulseSpec& p, double u) {
  if (p.in_width <= 0.0) return 0.0;
  double half = 0.5 * p.in_width;
  return p.amplitude * bump_prime((u - p.in_center) / half) / half;
}

namespace {

double pulse_h_pp(const PulseSpec& p, double xi) {
  double mid = -p.r0 + 0.5 * p.width;
  double half = 0.5 * p.width;
  return p.amplitude * bump_pp((xi - mid) / half) / (half * half);
}

double pulse_k_pp(const PulseSpec& p, double u) {
  if (p.in_width <= 0.0) return 0.0;
  double half = 0.5 * p.in_width;
  return p.amplitude * bump_pp((u - p.in_center) / half) / (half * half);
}

}  // namespace

double flat_oracle_v(const PulseSpec& p, int ell, double s, double x) {
  if (x <= 0.0) {
    // u = s + 2/x -> infinity: incoming pieces vanish
    if (ell == 0) return pulse_h(p, s);
    return pulse_h_prime(p, s);
  }
  double u = s + 2.0 / x;
  if (ell == 0) return pulse_h(p, s) - pulse_h(p, u) + pulse_k(p, u);
  // ell == 1 multipole: outgoing H'(s) + x H(s), incoming K'(u) - x K(u)
  return pulse_h_prime(p, s) + x * pulse_h(p, s) + pulse_k_prime(p, u) - x * pulse_k(p, u);
}

double flat_oracle_vs(const PulseSpec& p, int ell, double s, double x) {
  if (x <= 0.0) return ell == 0 ? pulse_h_prime(p, s) : pulse_h_pp(p, s);
  double u = s + 2.0 / x;
  if (ell == 0) return pulse_h_prime(p, s) - pulse_h_prime(p, u) + pulse_k_prime(p, u);
  return pulse_h_pp(p, s) + x * pulse_h_prime(p, s) + pulse_k_pp(p, u) - x * pulse_k_prime(p, u);
}

double flat_oracle_vx(const PulseSpec& p, int ell, double s, double x) {
  if (x <= 0.0) return ell == 0 ? 0.0 : pulse_h(p, s);
  double u = s + 2.0 / x;
  if (ell == 0) return (pulse_h_prime(p, u) - pulse_k_prime(p, u)) * 2.0 / (x * x);
  return pulse_h(p, s) - pulse_k(p, u) + (2.0 / (x * x)) * (x * pulse_k_prime(p, u) - pulse_k_pp(p, u));
}

double flat_oracle_trace(const PulseSpec& p, int ell, double s) {
  return flat_oracle_vs(p, ell, s, 0.0);
}

ReducedField solve_rescaled_wave(const Model& model, const ReducedGrid& grid,
                                 const PulseSpec& pulse) {
  if (model.kind() != GeometryKind::Scattering || !model.rotationally_symmetric())
    throw Error(Err::ValidationError,
                "reduced solve requires a rotationally symmetric scattering model");
  if (model.dim() != 3)
    throw Error(Err::ValidationError, "reduced solve implemented for n = 3");
  if (grid.mode_ell < 0 || grid.mode_ell > 1)
    throw Error(Err::ValidationError, "mode_ell must be 0 or 1");
  if (grid.nx < 4 || !(grid.ds > 0.0) || !(grid.s_hi > grid.s_lo) || !(grid.x_max > 0.0))
    throw Error(Err::ValidationError, "degenerate reduced grid");
  if (!(pulse.width > 0.0) || !(pulse.r0 > 0.0))
    throw Error(Err::ValidationError, "pulse needs positive radius and width");

  const int nx = grid.nx;
  const double dx = grid.dx();
  const double ds = grid.ds;
  const int nsteps = grid.nsteps();
  const double cfl_c = 2.0 / (grid.x_max * grid.x_max);
  if (ds > cfl_c * dx)
    throw Error(Err::CFLViolation, "ds exceeds the characteristic CFL bound 2 dx / x_max^2");

  const double mu = grid.mode_ell * (grid.mode_ell + 1);

  // coefficient tables: A = c'/c, gamma = x A, mu/c  (n = 3)
  std::vector<double> xs(nx + 1), Acoef(nx + 1), gcoef(nx + 1), mcoef(nx + 1);
  for (int j = 0; j <= nx; ++j) {
    double x = j * dx;
    xs[j] = x;
    double c, dc;
    model.radial_conformal(x, c, dc);
    Acoef[j] = dc / c;
    gcoef[j] = x * Acoef[j];
    mcoef[j] = mu / c;
  }

  // tube data: exact flat closed form at x = x_max (valid for the flat model
  // and for shell perturbations supported strictly below the tube)
  auto tube_v = [&](double s) { return flat_oracle_v(pulse, grid.mode_ell, s, grid.x_max); };
  auto tube_vs = [&](double s) { return flat_oracle_vs(pulse, grid.mode_ell, s, grid.x_max); };
  auto tube_vx = [&](double s) { return flat_oracle_vx(pulse, grid.mode_ell, s, grid.x_max); };

  ReducedField F;
  F.grid = grid;
  F.s_of_step.resize(nsteps + 1);
  F.v.assign(nsteps + 1, std::vector<double>(nx + 1, 0.0));
  F.vs.assign(nsteps + 1, std::vector<double>(nx + 1, 0.0));

  // initial slice from the closed form
  for (int j = 0; j <= nx; ++j) F.v[0][j] = flat_oracle_v(pulse, grid.mode_ell, grid.s_lo, j * dx);
  F.s_of_step[0] = grid.s_lo;

  std::vector<double> b(nx + 1), psi(nx + 1), a(nx + 1);

  // slice derivative: v_s from the intra-slice transport of psi = 2 v_s + x^2 v_x
  auto slice_rhs = [&](const std::vector<double>& v, double s, std::vector<double>& out) {
    for (int j = 1; j < nx; ++j) b[j] = (v[j + 1] - v[j - 1]) / (2.0 * dx);
    b[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx);
    b[nx] = (3.0 * v[nx] - 4.0 * v[nx - 1] + v[nx - 2]) / (2.0 * dx);

    // d psi / dx = alpha psi + beta, integrated from the tube down to x = 0
    auto alpha = [&](int j) { return -0.5 * Acoef[j]; };
    auto beta = [&](int j) {
      return -0.5 * Acoef[j] * xs[j] * xs[j] * b[j] + (mcoef[j] - gcoef[j]) * v[j];
    };
    psi[nx] = 2.0 * tube_vs(s) + xs[nx] * xs[nx] * tube_vx(s);
    for (int j = nx; j > 0; --j) {
      double rj = alpha(j) * psi[j] + beta(j);
      double denom = 1.0 + 0.5 * dx * alpha(j - 1);
      psi[j - 1] = (psi[j] - 0.5 * dx * (rj + beta(j - 1))) / denom;
    }
    for (int j = 0; j < nx; ++j) out[j] = 0.5 * (psi[j] - xs[j] * xs[j] * b[j]);
    out[nx] = tube_vs(s);
  };

  const double data_scale =
      std::max({1e-12, std::abs(pulse.amplitude), std::abs(pulse.amplitude / pulse.width)});
  std::vector<double> a1(nx + 1), a2(nx + 1), vstar(nx + 1);
  const double ko_eps = 0.2;

  for (int m = 0; m < nsteps; ++m) {
    double s = grid.s_lo + m * ds;
    const std::vector<double>& v = F.v[m];
    std::vector<double>& vn = F.v[m + 1];

    slice_rhs(v, s, a1);
    F.vs[m] = a1;
    for (int j = 0; j <= nx; ++j) vstar[j] = v[j] + ds * a1[j];
    vstar[nx] = tube_v(s + ds);
    slice_rhs(vstar, s + ds, a2);
    for (int j = 0; j <= nx; ++j) vn[j] = v[j] + 0.5 * ds * (a1[j] + a2[j]);
    vn[nx] = tube_v(s + ds);

    // Kreiss-Oliger dissipation on the interior stencil
    std::vector<double>& w = vn;
    static thread_local std::vector<double> tmp;
    tmp = w;
    for (int j = 2; j <= nx - 2; ++j)
      w[j] = tmp[j] - ko_eps / 16.0 *
                          (tmp[j - 2] - 4.0 * tmp[j - 1] + 6.0 * tmp[j] - 4.0 * tmp[j + 1] +
                           tmp[j + 2]);

    F.s_of_step[m + 1] = s + ds;

    double vmax = 0.0;
    for (int j = 0; j <= nx; ++j) vmax = std::max(vmax, std::abs(vn[j]));
    if (vmax > 100.0 * data_scale)
      throw Error(Err::UnstableGrowth, "field grew beyond the stability guard");
  }
  slice_rhs(F.v[nsteps], grid.s_lo + nsteps * ds, a1);
  F.vs[nsteps] = a1;
  return F;
}

RadiationTrace extract_trace_at_column(const ReducedField& field, int column) {
  const int M = int(field.vs.size());
  if (M < 2) throw Error(Err::EmptyTrace, "field has too few slices");
  RadiationTrace tr;
  tr.s_grid.resize(M);
  tr.values.resize(M);
  for (int m = 0; m < M; ++m) {
    tr.s_grid[m] = field.s_of_step[m];
    tr.values[m] = field.vs[m][column];
  }
  return tr;
}

RadiationTrace extract_radiation_field(const ReducedField& field) {
  return extract_trace_at_column(field, 0);
}

double trace_fourier_phase_slope(const RadiationTrace& trace, double s_lo, double s_hi,
                                 double lam_lo, double lam_hi, int nlam) {
  if (trace.values.empty()) throw Error(Err::EmptyTrace, "empty trace");
  double mid = 0.5 * (s_lo + s_hi), half = 0.5 * (s_hi - s_lo);
  double ds = trace.s_grid.size() > 1 ? trace.s_grid[1] - trace.s_grid[0] : 1.0;

  std::vector<double> lam(nlam), mag(nlam);
  std::vector<double> re_v(nlam), im_v(nlam);
  double magmax = 0.0;
  for (int k = 0; k < nlam; ++k) {
    double l = lam_lo + (lam_hi - lam_lo) * k / (nlam - 1);
    double re = 0.0, im = 0.0;
    for (size_t i = 0; i < trace.s_grid.size(); ++i) {
      double s = trace.s_grid[i];
      double w = bump((s - mid) / half);
      double v = trace.values[i] * w * ds;
      re += v * std::cos(l * s);
      im += v * std::sin(l * s);
    }
    lam[k] = l;
    re_v[k] = re;
    im_v[k] = im;
    mag[k] = std::hypot(re, im);
    magmax = std::max(magmax, mag[k]);
  }

  // fit the unwrapped phase only where the spectrum carries weight: stop at
  // the first magnitude dip (pi jumps live at the spectrum zeros) and beyond
  // the pulse band, where the phase is quadrature noise
  std::vector<double> lam_f, ph_f;
  double prev = 0.0, offset = 0.0;
  for (int k = 0; k < nlam; ++k) {
    if (mag[k] < 0.10 * magmax) break;
    double a = std::atan2(im_v[k], re_v[k]);
    if (!lam_f.empty()) {
      double d = a - prev;
      while (d > 3.14159265358979323846) {
        d -= 2 * 3.14159265358979323846;
        offset -= 2 * 3.14159265358979323846;
      }
      while (d < -3.14159265358979323846) {
        d += 2 * 3.14159265358979323846;
        offset += 2 * 3.14159265358979323846;
      }
    }
    prev = a;
    lam_f.push_back(lam[k]);
    ph_f.push_back(a + offset);
  }
  if (lam_f.size() < 8)
    throw Error(Err::EmptyTrace, "trace spectrum too weak in the requested band");

  size_t nf = lam_f.size();
  double ml = 0.0, mp = 0.0;
  for (size_t k = 0; k < nf; ++k) {
    ml += lam_f[k];
    mp += ph_f[k];
  }
  ml /= double(nf);
  mp /= double(nf);
  double spp = 0.0, sll = 0.0;
  for (size_t k = 0; k < nf; ++k) {
    spp += (lam_f[k] - ml) * (ph_f[k] - mp);
    sll += (lam_f[k] - ml) * (lam_f[k] - ml);
  }
  return spp / sll;
}

FrontInfo front_location(const RadiationTrace& trace, double threshold) {
  double peak = 0.0;
  size_t ipeak = 0;
  for (size_t i = 0; i < trace.values.size(); ++i) {
    if (std::abs(trace.values[i]) > peak) {
      peak = std::abs(trace.values[i]);
      ipeak = i;
    }
  }
  if (peak == 0.0) throw Error(Err::EmptyTrace, "trace is identically zero");
  FrontInfo info;
  info.s_peak = trace.s_grid[ipeak];
  info.peak_value = peak;
  double thr = threshold * peak;
  for (size_t i = 0; i < trace.values.size(); ++i) {
    if (std::abs(trace.values[i]) >= thr) {
      if (i == 0) {
        info.s_front = trace.s_grid[0];
      } else {
        // sub-grid crossing by linear interpolation of |trace|
        double lo = std::abs(trace.values[i - 1]), hi = std::abs(trace.values[i]);
        double w = (thr - lo) / std::max(hi - lo, 1e-300);
        info.s_front = trace.s_grid[i - 1] + w * (trace.s_grid[i] - trace.s_grid[i - 1]);
      }
      return info;
    }
  }
  info.s_front = trace.s_grid[ipeak];
  return info;
}

}  // namespace sojourn
