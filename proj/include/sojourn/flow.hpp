#pragma once

#include <vector>

#include "sojourn/geometry.hpp"
#include "sojourn/linalg.hpp"
#include "sojourn/ode.hpp"

namespace sojourn {

// A point of the (rescaled) phase space. Interior states carry (z, zeta) and
// the physical time t; collar states carry (x, y, xi, eta) plus the rescaled
// time s and its dual sigma.
struct PhaseState {
  ChartId chart = ChartId::Interior;
  Vecd base;      // Interior: z. Collar: (x, y...)
  Vecd momentum;  // Interior: zeta. Collar: (xi, eta...)
  double s = 0.0;
  double sigma = 0.0;
  double param = 0.0;  // global flow parameter
  double t = 0.0;      // physical (unit-speed) time
};

enum class PathStatus { ReachedBoundary, Trapped, MaxTime };

struct GeodesicPath {
  std::vector<PhaseState> samples;
  PathStatus status = PathStatus::MaxTime;
  double sigma = 0.0;           // conserved dual of s on collar segments
  double dx_dparam_at_exit = 0.0;
  int n = 0;

  // Raw dense data (state + derivative per sample) for interpolation.
  std::vector<OdeState> raw, draw;
  std::vector<ChartId> raw_chart;

  const PhaseState& back() const { return samples.back(); }
};

struct BoundaryLimit {
  double s = 0.0;
  Vecd y;
  double sigma = 0.0;
  Vecd eta;
  double err = 0.0;  // Richardson consistency estimate
};

struct FlowOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double trap_time = 100.0;  // physical-time budget before reporting Trapped
  int max_steps = 400000;
  bool store_samples = true;
};

// Phase-space tangent vectors of the two flows; exposed for the oracle tests.
// Interior packing: [z(n), zeta(n), t]. Collar packing: [x, y(m), s, xi, eta(m)].
void interior_rhs(const Model& model, const OdeState& st, OdeState& d);
void collar_rhs(const Model& model, double sigma, const OdeState& st, OdeState& d);

// Characteristic polynomial p of the rescaled operator at a collar state.
double collar_characteristic(const Model& model, double sigma, const OdeState& st);

// Tangent vector of the flow at a phase-space point, packed like the state.
// Throws ChartInvariantViolated when a collar state is off the characteristic.
OdeState hamilton_rhs(const Model& model, const PhaseState& state);

// Forward geodesic from an interior point with initial covector zeta
// (any positive norm; the unit-speed time is tracked as arclength).
GeodesicPath integrate_geodesic(const Model& model, const Vecd& z, const Vecd& zeta,
                                const FlowOptions& opts = {});

BoundaryLimit boundary_limits(const Model& model, const GeodesicPath& path);

// Linear interpolation of the raw collar state to a given x, scanning the
// stored samples from the end of the path (false when x is never crossed).
bool path_state_at_x(const GeodesicPath& path, double x_target, OdeState& out);

// Packing helpers shared with the branch module.
OdeState pack_interior(const Model& model, const Vecd& z, const Vecd& zeta, double t);
OdeState pack_collar(const Model& model, double x, const Vecd& y, double s, double xi,
                     const Vecd& eta);
PhaseState unpack_state(const Model& model, ChartId chart, double sigma, double param,
                        const OdeState& st);

// Rescaled-momentum map at the interior->collar switch: the transported
// covector is reversed onto the sigma = +|zeta| branch (calibrated so the
// flat model yields s -> -theta.z) and xi picks up the -tau/x^2 (scattering)
// or -tau/x (AH) shift from s = t - 1/x resp. s = t + log x.
void enter_collar(const Model& model, const Vecd& z, const Vecd& zeta, double t, double tau,
                  double& x, Vecd& y, double& s, double& xi, Vecd& eta);
void leave_collar(const Model& model, double x, const Vecd& y, double s, double xi,
                  const Vecd& eta, double sigma, Vecd& z, Vecd& zeta, double& t);

}  // namespace sojourn
