#include "sojourn/synthesis.hpp"

#include <algorithm>
#include <cmath>

#include "sojourn/fft.hpp"

namespace sojourn {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double Mollifier::norm_const() const {
  // integral of exp(-1/(1-u^2)) over (-1,1), fixed quadrature
  static const double kBumpIntegral = [] {
    const int N = 20000;
    double s = 0.0;
    for (int i = 0; i < N; ++i) {
      double u = -1.0 + (i + 0.5) * (2.0 / N);
      s += std::exp(-1.0 / (1.0 - u * u)) * (2.0 / N);
    }
    return s;
  }();
  return 1.0 / (w * kBumpIntegral);
}

double Mollifier::eval(double s) const {
  double u = s / w;
  if (u <= -1.0 || u >= 1.0) return 0.0;
  return norm_const() * std::exp(-1.0 / (1.0 - u * u));
}

Cplx branch_amplitude(const Branch& b, double lam, const TraceConvention& conv) {
  if (!b.nondegenerate)
    throw Error(Err::DegenerateBranch, "amplitude undefined on a degenerate branch");
  if (lam == 0.0) throw Error(Err::GridMismatch, "amplitude undefined at lam = 0");
  if (lam < 0.0) return std::conj(branch_amplitude(b, -lam, conv));

  Cplx ik = std::pow(Cplx(0.0, 1.0), b.conj_count);
  Cplx phase = std::exp(Cplx(0.0, lam * b.limit.s));
  // principal branch of (lam / 2 pi i)^{(n-1)/2} for lam > 0
  Cplx base(0.0, -lam / (2.0 * kPi));
  Cplx pref = std::pow(base, 0.5 * (conv.n - 1));
  Cplx amp = ik * phase * pref / std::sqrt(b.jacobian);
  if (conv.kind == GeometryKind::AsympHyperbolic) amp *= Cplx(0.0, 1.0) / (2.0 * lam);
  return amp;
}

KernelTrace synthesize_trace(const Model& model, const BranchSet& set, const LambdaGrid& grid) {
  if (set.branches.empty()) throw Error(Err::NoBranches, "empty branch set");
  if (grid.count < 2 || !(grid.hi > grid.lo))
    throw Error(Err::ValidationError, "frequency grid needs hi > lo and at least two samples");
  for (size_t i = 0; i < set.branches.size(); ++i)
    if (!set.branches[i].nondegenerate)
      throw Error(Err::DegenerateBranch,
                  "branch " + std::to_string(i) +
                      " is degenerate (|dy/ddir| below threshold); synthesis refuses it");

  KernelTrace t;
  t.grid = grid;
  t.convention = TraceConvention{model.kind(), model.dim()};
  t.values.assign(grid.count, Cplx(0.0));
  for (int i = 0; i < grid.count; ++i) {
    double lam = grid.at(i);
    Cplx s(0.0);
    for (const Branch& b : set.branches) s += branch_amplitude(b, lam, t.convention);
    t.values[i] = s;
  }
  return t;
}

KernelTrace mollify(const KernelTrace& trace, const Mollifier& m) {
  if (!(m.w > 0.0)) throw Error(Err::ValidationError, "mollifier width must be positive");
  size_t N = trace.values.size();
  if (!is_pow2(N))
    throw Error(Err::GridTooCoarse, "mollification needs a power-of-two grid");
  double dlam = trace.grid.step();
  double s_max = kPi / dlam;  // representable s range is (-pi/dlam, pi/dlam]
  if (m.w >= s_max)
    throw Error(Err::GridTooCoarse, "grid spacing too coarse for the mollifier support");

  std::vector<Cplx> a = trace.values;
  fft_pow2(a, false);
  // bin k of the forward DFT carries the phase e^{+i lam s_k}, s_k = 2 pi k / (N dlam)
  for (size_t k = 0; k < N; ++k) {
    double kk = (k <= N / 2) ? double(k) : double(k) - double(N);
    double s = -2.0 * kPi * kk / (double(N) * dlam);
    a[k] *= m.eval(s);
  }
  fft_pow2(a, true);

  KernelTrace out = trace;
  out.values = std::move(a);
  out.mollified = true;
  out.mollifier_w = m.w;
  return out;
}

Cplx euclidean_oracle(const Vecd& z, const Vecd& theta, double lam, int n) {
  double tz = dot(theta, z);
  Cplx base(0.0, lam / (2.0 * kPi));  // i lam / 2 pi
  Cplx pref = (lam >= 0.0) ? std::pow(base, 0.5 * (n - 1))
                           : std::conj(std::pow(std::conj(base), 0.5 * (n - 1)));
  return pref * std::exp(Cplx(0.0, lam * tz));
}

double h3_oracle_phase(double x, const Vecd& y, const Vecd& y_ref) {
  double d2 = 0.0;
  for (int i = 0; i < y.size(); ++i) {
    double d = y[i] - y_ref[i];
    d2 += d * d;
  }
  return std::log((x * x + d2) / x);
}

namespace {

// least-squares slope of v against u
double ls_slope(const std::vector<double>& u, const std::vector<double>& v) {
  size_t n = u.size();
  double mu = 0.0, mv = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= double(n);
  mv /= double(n);
  double suv = 0.0, suu = 0.0;
  for (size_t i = 0; i < n; ++i) {
    suv += (u[i] - mu) * (v[i] - mv);
    suu += (u[i] - mu) * (u[i] - mu);
  }
  return suv / suu;
}

}  // namespace

double phase_slope(const KernelTrace& t) {
  size_t N = t.values.size();
  std::vector<double> lam(N), ph(N);
  double prev = std::arg(t.values[0]);
  double offset = 0.0;
  for (size_t i = 0; i < N; ++i) {
    double a = std::arg(t.values[i]);
    if (i > 0) {
      double d = a - prev;
      while (d > kPi) {
        d -= 2.0 * kPi;
        offset -= 2.0 * kPi;
      }
      while (d < -kPi) {
        d += 2.0 * kPi;
        offset += 2.0 * kPi;
      }
    }
    prev = a;
    ph[i] = a + offset;
    lam[i] = t.grid.at(int(i));
  }
  return ls_slope(lam, ph);
}

double amplitude_exponent(const KernelTrace& t) {
  size_t N = t.values.size();
  std::vector<double> ll, la;
  ll.reserve(N);
  la.reserve(N);
  for (size_t i = 0; i < N; ++i) {
    double lam = t.grid.at(int(i));
    double a = std::abs(t.values[i]);
    if (lam > 0.0 && a > 0.0) {
      ll.push_back(std::log(lam));
      la.push_back(std::log(a));
    }
  }
  if (ll.size() < 2) throw Error(Err::EmptyTrace, "trace has no usable amplitude samples");
  return ls_slope(ll, la);
}

TraceMetrics compare_traces(const KernelTrace& a, const KernelTrace& b) {
  if (!(a.grid == b.grid)) throw Error(Err::GridMismatch, "traces use different grids");
  TraceMetrics m;
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    num += std::norm(a.values[i] - b.values[i]);
    den += std::norm(b.values[i]);
  }
  m.rel_l2 = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
  m.phase_slope_diff = phase_slope(a) - phase_slope(b);
  m.amp_exponent_diff = amplitude_exponent(a) - amplitude_exponent(b);
  return m;
}

}  // namespace sojourn
