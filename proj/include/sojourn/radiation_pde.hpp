#pragma once

#include <vector>

#include "sojourn/geometry.hpp"

namespace sojourn {

// 1+1 reduced grid in the characteristic coordinates (s, x), x_range = [0, x_max]
// with x = 0 on the grid; mode_ell selects the boundary spherical-harmonic mode.
struct ReducedGrid {
  double s_lo = -9.0;
  double s_hi = -0.5;
  double ds = 0.01;
  double x_max = 0.4;
  int nx = 160;  // dx = x_max / nx
  int mode_ell = 0;

  double dx() const { return x_max / nx; }
  int nsteps() const { return int((s_hi - s_lo) / ds + 0.5); }
};

// Outgoing pulse profile h supported on [-r0, -r0 + width] (leading edge at
// s = -r0), plus an optional incoming bump K(u), u = s + 2/x, for runs that
// exercise the ingoing characteristic family.
struct PulseSpec {
  double r0 = 5.0;
  double width = 0.5;
  double amplitude = 1.0;
  double in_center = 0.0;  // center of K in u; 0 disables
  double in_width = 0.0;
};

double pulse_h(const PulseSpec& p, double xi);
double pulse_h_prime(const PulseSpec& p, double xi);
double pulse_k(const PulseSpec& p, double u);
double pulse_k_prime(const PulseSpec& p, double u);

// Exact solution of the flat reduced equation for the pulse (modes 0 and 1),
// used as initial/tube data and as the comparison oracle.
double flat_oracle_v(const PulseSpec& p, int ell, double s, double x);
double flat_oracle_vs(const PulseSpec& p, int ell, double s, double x);
double flat_oracle_vx(const PulseSpec& p, int ell, double s, double x);
double flat_oracle_trace(const PulseSpec& p, int ell, double s);

struct ReducedField {
  ReducedGrid grid;
  std::vector<double> s_of_step;
  std::vector<std::vector<double>> v;   // v[step][j], x_j = j dx
  std::vector<std::vector<double>> vs;  // d v / d s from the slice constraint
};

struct RadiationTrace {
  std::vector<double> s_grid;
  std::vector<double> values;  // d/ds of the x = 0 trace of the rescaled field
  PulseSpec source;
};

// Characteristic (null-slice) marching solver for the rescaled wave operator
// restricted to one spherical-harmonic mode; tube data at x = x_max is the
// flat closed form (exact for the flat model; for shell-perturbed models the
// perturbation support must stay below the tube, see the model notes).
ReducedField solve_rescaled_wave(const Model& model, const ReducedGrid& grid,
                                 const PulseSpec& pulse);

RadiationTrace extract_radiation_field(const ReducedField& field);

// d/ds trace read one or two cells off the boundary (extraction consistency).
RadiationTrace extract_trace_at_column(const ReducedField& field, int column);

struct FrontInfo {
  double s_front = 0.0;
  double s_peak = 0.0;
  double peak_value = 0.0;
};

// Smallest s where |trace| first exceeds threshold * max|trace|.
FrontInfo front_location(const RadiationTrace& trace, double threshold = 0.05);

// Unwrapped phase slope in lambda of the Fourier transform of the trace
// windowed to [s_lo, s_hi]; the discrete stationary-phase read of the
// dominant sojourn time.
double trace_fourier_phase_slope(const RadiationTrace& trace, double s_lo, double s_hi,
                                 double lam_lo, double lam_hi, int nlam);

}  // namespace sojourn
