// Shared helpers for the test and acceptance binaries.
#pragma once

#include <cmath>
#include <vector>

#include "sojourn/branches.hpp"

namespace testsupport {

using namespace sojourn;

inline Vecd unit_covector(const Model& m, const Vecd& z, const Vecd& v) {
  Matd g = m.interior_metric_components(Vec<double>(z));
  Vecd zeta = mul(g, v);
  double nz = m.covector_norm(z, zeta);
  for (int i = 0; i < zeta.size(); ++i) zeta[i] /= nz;
  return zeta;
}

// Independent FD-family oracle for conjugate points: sign changes of
// det[ dz(T)/deps | velocity ] along the truncated interior geodesic family.
inline int fd_family_conjugate_count(const Model& m, const Vecd& z, const Vecd& dir,
                                     int nT = 80) {
  GeodesicPath p = integrate_geodesic(m, z, dir);
  if (p.status != PathStatus::ReachedBoundary) throw Error(Err::Trapped, "no boundary limit");
  double T = 0.0;
  bool has = false;
  for (const PhaseState& ps : p.samples)
    if (ps.chart == ChartId::Collar) {
      T = ps.param;
      has = true;
      break;
    }
  if (!has || T <= 0.0) return 0;

  int n = m.dim();
  auto series = [&](const Vecd& d) {
    std::vector<Vecd> out(nT + 1, Vecd(n));
    OdeState st = pack_interior(m, z, d, 0.0);
    OdeState k1, k2, k3, k4, tmp;
    tmp.dim = st.dim;
    int per = 30;
    double h = T / (nT * per);
    for (int i = 0; i < n; ++i) out[0][i] = st[i];
    for (int k = 1; k <= nT; ++k) {
      for (int s = 0; s < per; ++s) {
        interior_rhs(m, st, k1);
        for (int i = 0; i < st.dim; ++i) tmp.y[i] = st[i] + 0.5 * h * k1[i];
        interior_rhs(m, tmp, k2);
        for (int i = 0; i < st.dim; ++i) tmp.y[i] = st[i] + 0.5 * h * k2[i];
        interior_rhs(m, tmp, k3);
        for (int i = 0; i < st.dim; ++i) tmp.y[i] = st[i] + h * k3[i];
        interior_rhs(m, tmp, k4);
        for (int i = 0; i < st.dim; ++i)
          st.y[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
      }
      for (int i = 0; i < n; ++i) out[k][i] = st[i];
    }
    return out;
  };

  std::vector<Vecd> basis = sphere_tangent_basis(m, z, dir);
  double hfd = 1e-5;
  std::vector<std::vector<Vecd>> plus(n - 1), minus(n - 1);
  for (int a = 0; a < n - 1; ++a) {
    Vecd ep = Vecd::zero(n - 1), em = Vecd::zero(n - 1);
    ep[a] = hfd;
    em[a] = -hfd;
    plus[a] = series(perturb_direction(m, z, dir, basis, ep));
    minus[a] = series(perturb_direction(m, z, dir, basis, em));
  }
  std::vector<Vecd> center = series(dir);

  int zeros = 0;
  double prev = 0.0;
  bool tracking = false;
  for (int k = 1; k <= nT; ++k) {
    Matd M(n);
    for (int a = 0; a < n - 1; ++a)
      for (int i = 0; i < n; ++i) M(i, a) = (plus[a][k][i] - minus[a][k][i]) / (2.0 * hfd);
    for (int i = 0; i < n; ++i) M(i, n - 1) = (center[k][i] - center[k - 1][i]);
    double dk = det(M);
    if (!tracking) {
      if (std::abs(dk) > 1e-12) {
        tracking = true;
        prev = dk;
      }
      continue;
    }
    if (dk * prev < 0.0) ++zeros;
    if (dk != 0.0) prev = dk;
  }
  return zeros;
}

}  // namespace testsupport
