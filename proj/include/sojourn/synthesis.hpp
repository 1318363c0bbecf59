#pragma once

#include <complex>
#include <vector>

#include "sojourn/branches.hpp"

namespace sojourn {

using Cplx = std::complex<double>;

struct LambdaGrid {
  double lo = 10.0;
  double hi = 100.0;
  int count = 4096;

  double step() const { return (hi - lo) / (count - 1); }
  double at(int i) const { return lo + i * step(); }
  bool operator==(const LambdaGrid& o) const {
    return lo == o.lo && hi == o.hi && count == o.count;
  }
};

// Compactly supported bump c * exp(-1/(1-(s/w)^2)) on (-w, w), c chosen so the
// integral is 1.
struct Mollifier {
  double w = 1.0;

  double eval(double s) const;
  double norm_const() const;  // the c prefactor
};

struct TraceConvention {
  GeometryKind kind = GeometryKind::Scattering;
  int n = 3;
};

struct KernelTrace {
  LambdaGrid grid;
  std::vector<Cplx> values;
  TraceConvention convention;
  bool mollified = false;
  double mollifier_w = 0.0;
};

// One branch's contribution at frequency lam (lam != 0): the i^k phase, the
// e^{i lam S} oscillation, the principal-branch (lam/2 pi i)^{(n-1)/2}
// prefactor and |dy/ddir|^{-1/2}; AH traces carry an extra i/(2 lam).
// Negative lam is defined through the conjugation symmetry.
Cplx branch_amplitude(const Branch& b, double lam, const TraceConvention& conv);

KernelTrace synthesize_trace(const Model& model, const BranchSet& set, const LambdaGrid& grid);

// Multiplication by the bump in the s-domain via an FFT pair; requires a
// power-of-two grid fine enough to represent the bump support.
KernelTrace mollify(const KernelTrace& trace, const Mollifier& m);

// Exact flat-space kernel (i lam / 2 pi)^{(n-1)/2} e^{i lam theta.z}; the
// synthesized trace approximates its complex conjugate (adjoint convention).
Cplx euclidean_oracle(const Vecd& z, const Vecd& theta, double lam, int n);

// Closed-form sojourn/phase for the half-space model: log((x^2+|y-y'|^2)/x).
double h3_oracle_phase(double x, const Vecd& y, const Vecd& y_ref);

struct TraceMetrics {
  double rel_l2 = 0.0;
  double phase_slope_diff = 0.0;
  double amp_exponent_diff = 0.0;
};

double phase_slope(const KernelTrace& t);        // unwrapped linear fit d(arg)/d(lam)
double amplitude_exponent(const KernelTrace& t); // log-log fit of |values| vs lam

TraceMetrics compare_traces(const KernelTrace& a, const KernelTrace& b);

}  // namespace sojourn
