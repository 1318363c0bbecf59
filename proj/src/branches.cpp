#include "sojourn/branches.hpp"

#include <algorithm>
#include <cmath>

namespace sojourn {

namespace {

constexpr double kPi = 3.14159265358979323846;

double wrap_pi(double a) { return std::remainder(a, 2.0 * kPi); }

// Angle between two unit covectors in the g^{-1} inner product at z.
double covector_angle(const Model& model, const Vecd& z, const Vecd& a, const Vecd& b) {
  Matd ginv = inverse(model.interior_metric_components(Vec<double>(z)));
  double ab = dot(a, mul(ginv, b));
  double aa = dot(a, mul(ginv, a));
  double bb = dot(b, mul(ginv, b));
  double c = ab / std::sqrt(aa * bb);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace

Vecd boundary_difference(const Model& model, const Vecd& y, const Vecd& y_ref) {
  Vecd d(y.size());
  for (int i = 0; i < y.size(); ++i) d[i] = y[i] - y_ref[i];
  if (model.kind() == GeometryKind::Scattering && model.dim() == 2) d[0] = wrap_pi(d[0]);
  return d;
}

double boundary_density(const Model& model, const Vecd& y) {
  MetricData h0 = model.collar_metric(0.0, y);
  return std::sqrt(det(h0.components));
}

std::vector<Vecd> sphere_tangent_basis(const Model& model, const Vecd& z, const Vecd& dir) {
  int n = model.dim();
  Matd ginv = inverse(model.interior_metric_components(Vec<double>(z)));
  auto inner = [&](const Vecd& a, const Vecd& b) { return dot(a, mul(ginv, b)); };

  Vecd d0 = dir;
  double nd = std::sqrt(inner(d0, d0));
  for (int i = 0; i < n; ++i) d0[i] /= nd;

  std::vector<Vecd> basis;
  for (int c = 0; c < n && int(basis.size()) < n - 1; ++c) {
    Vecd e(n);
    e[c] = 1.0;
    double p = inner(e, d0);
    for (int i = 0; i < n; ++i) e[i] -= p * d0[i];
    for (const Vecd& b : basis) {
      double q = inner(e, b);
      for (int i = 0; i < n; ++i) e[i] -= q * b[i];
    }
    double ne = std::sqrt(inner(e, e));
    if (ne < 1e-8) continue;
    for (int i = 0; i < n; ++i) e[i] /= ne;
    basis.push_back(e);
  }
  return basis;
}

Vecd perturb_direction(const Model& model, const Vecd& z, const Vecd& dir,
                       const std::vector<Vecd>& basis, const Vecd& eps) {
  int n = model.dim();
  Vecd w = dir;
  for (int a = 0; a < int(basis.size()); ++a)
    for (int i = 0; i < n; ++i) w[i] += eps[a] * basis[a][i];
  double nw = model.covector_norm(z, w);
  for (int i = 0; i < n; ++i) w[i] /= nw;
  return w;
}

Vecd asymptotic_direction_map(const Model& model, const Vecd& z, const Vecd& dir,
                              const FlowOptions& opts) {
  GeodesicPath path = integrate_geodesic(model, z, dir, opts);
  if (path.status != PathStatus::ReachedBoundary)
    throw Error(Err::Trapped, "geodesic did not reach the boundary chart");
  return boundary_limits(model, path).y;
}

namespace {

// Candidate start directions: unit covectors covering S*_z.
std::vector<Vecd> start_directions(const Model& model, const Vecd& z, int count) {
  int n = model.dim();
  Matd g = model.interior_metric_components(Vec<double>(z));
  std::vector<Vecd> dirs;
  dirs.reserve(count);
  if (n == 2) {
    for (int k = 0; k < count; ++k) {
      double phi = 2.0 * kPi * k / count;
      Vecd v{std::cos(phi), std::sin(phi)};
      Vecd zeta = mul(g, v);
      double nz = model.covector_norm(z, zeta);
      for (int i = 0; i < n; ++i) zeta[i] /= nz;
      dirs.push_back(zeta);
    }
  } else {
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
      double t = 1.0 - 2.0 * (k + 0.5) / count;
      double rho = std::sqrt(std::max(0.0, 1.0 - t * t));
      double phi = golden * k;
      Vecd v{rho * std::cos(phi), rho * std::sin(phi), t};
      Vecd zeta = mul(g, v);
      double nz = model.covector_norm(z, zeta);
      for (int i = 0; i < n; ++i) zeta[i] /= nz;
      dirs.push_back(zeta);
    }
  }
  return dirs;
}

struct NewtonResult {
  bool converged = false;
  Vecd dir;
  BoundaryLimit limit;
  double residual = 0.0;
  int iters = 0;
  bool jac_singular = false;
};

NewtonResult newton_refine(const Model& model, const Vecd& z, const Vecd& y_target, Vecd dir,
                           const BranchOptions& opts) {
  int m = model.bdim();
  NewtonResult res;
  double h = opts.fd_step;

  auto shoot = [&](const Vecd& d, BoundaryLimit& lim) -> bool {
    try {
      GeodesicPath p = integrate_geodesic(model, z, d, opts.flow);
      if (p.status != PathStatus::ReachedBoundary) return false;
      lim = boundary_limits(model, p);
      return true;
    } catch (const Error&) {
      return false;
    }
  };

  BoundaryLimit lim;
  if (!shoot(dir, lim)) return res;
  Vecd G = boundary_difference(model, lim.y, y_target);
  double gn = norm2(G);

  for (int it = 0; it < opts.max_newton; ++it) {
    if (gn <= opts.newton_tol) {
      res.converged = true;
      res.dir = dir;
      res.limit = lim;
      res.residual = gn;
      res.iters = it;
      return res;
    }
    std::vector<Vecd> basis = sphere_tangent_basis(model, z, dir);
    Matd J(m);
    bool fd_ok = true;
    for (int a = 0; a < m && fd_ok; ++a) {
      Vecd ep = Vecd::zero(m), em = Vecd::zero(m);
      ep[a] = h;
      em[a] = -h;
      BoundaryLimit lp, lm;
      if (!shoot(perturb_direction(model, z, dir, basis, ep), lp) ||
          !shoot(perturb_direction(model, z, dir, basis, em), lm)) {
        fd_ok = false;
        break;
      }
      Vecd dy = boundary_difference(model, lp.y, lm.y);
      for (int b = 0; b < m; ++b) J(b, a) = dy[b] / (2.0 * h);
    }
    if (!fd_ok) return res;
    double dJ = det(J);
    if (std::abs(dJ) < 1e-14) {
      res.jac_singular = true;
      res.converged = gn <= 1e3 * opts.newton_tol;
      res.dir = dir;
      res.limit = lim;
      res.residual = gn;
      res.iters = it;
      return res;
    }
    Vecd delta = mul(inverse(J), G);
    for (int a = 0; a < m; ++a) delta[a] = -delta[a];
    double dn = norm2(delta);
    if (dn > 0.5)
      for (int a = 0; a < m; ++a) delta[a] *= 0.5 / dn;

    // damped update
    double scale = 1.0;
    bool improved = false;
    for (int tries = 0; tries < 7; ++tries) {
      Vecd step(m);
      for (int a = 0; a < m; ++a) step[a] = scale * delta[a];
      Vecd cand = perturb_direction(model, z, dir, basis, step);
      BoundaryLimit lc;
      if (shoot(cand, lc)) {
        Vecd Gc = boundary_difference(model, lc.y, y_target);
        double gc = norm2(Gc);
        if (gc < gn || tries == 6) {
          dir = cand;
          lim = lc;
          G = Gc;
          gn = gc;
          improved = true;
          break;
        }
      }
      scale *= 0.5;
    }
    if (!improved) return res;
  }
  if (gn <= opts.newton_tol) {
    res.converged = true;
    res.dir = dir;
    res.limit = lim;
    res.residual = gn;
    res.iters = opts.max_newton;
  }
  return res;
}

// FD boundary-map Jacobian with Richardson refinement; never throws, reports
// the relative disagreement of the two step sizes instead.
double fd_jacobian(const Model& model, const Vecd& z, const Vecd& dir, const BranchOptions& opts,
                   double& rel_err) {
  int m = model.bdim();
  std::vector<Vecd> basis = sphere_tangent_basis(model, z, dir);

  auto ymap = [&](const Vecd& eps) {
    return asymptotic_direction_map(model, z, perturb_direction(model, z, dir, basis, eps),
                                    opts.flow);
  };

  auto matrix_at = [&](double h) {
    Matd D(m);
    for (int a = 0; a < m; ++a) {
      Vecd ep = Vecd::zero(m), em = Vecd::zero(m);
      ep[a] = h;
      em[a] = -h;
      Vecd dy = boundary_difference(model, ymap(ep), ymap(em));
      for (int b = 0; b < m; ++b) D(b, a) = dy[b] / (2.0 * h);
    }
    return D;
  };

  double h = opts.fd_step;
  Matd Dh = matrix_at(h), Dh2 = matrix_at(0.5 * h);
  Matd DR(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) DR(i, j) = (4.0 * Dh2(i, j) - Dh(i, j)) / 3.0;

  Vecd y0 = asymptotic_direction_map(model, z, dir, opts.flow);
  double dens = boundary_density(model, y0);
  double jr = std::abs(det(DR)) * dens;
  double j1 = std::abs(det(Dh)) * dens;
  double j2 = std::abs(det(Dh2)) * dens;
  rel_err = std::abs(j2 - j1) / std::max(std::abs(jr), 1e-12);
  return jr;
}

}  // namespace

double boundary_jacobian(const Model& model, const Vecd& z, const Vecd& dir, double* err_out,
                         const BranchOptions& opts) {
  double rel_err = 0.0;
  double j = fd_jacobian(model, z, dir, opts, rel_err);
  if (err_out) *err_out = rel_err;
  if (rel_err > 1e-3)
    throw Error(Err::JacobianUnstable, "Richardson levels disagree beyond 1e-3 relative");
  return j;
}

BranchSet find_branches(const Model& model, const Vecd& z, const Vecd& y_target,
                        const BranchOptions& opts) {
  int n = model.dim();
  int count = opts.multistart > 0 ? opts.multistart : (n == 2 ? 64 : 256);

  BranchSet set;
  set.z = z;
  set.y_target = y_target;
  set.meta.starts = count;

  std::vector<Vecd> dirs = start_directions(model, z, count);
  std::vector<double> resid(count, 1e300);
  std::vector<bool> valid(count, false);

  for (int k = 0; k < count; ++k) {
    try {
      Vecd y = asymptotic_direction_map(model, z, dirs[k], opts.flow);
      resid[k] = norm2(boundary_difference(model, y, y_target));
      valid[k] = true;
    } catch (const Error&) {
      // trapped or outside chart; not a candidate
    }
  }

  // Local minima of the residual over the direction grid seed the Newton runs.
  std::vector<int> seeds;
  if (n == 2) {
    for (int k = 0; k < count; ++k) {
      if (!valid[k]) continue;
      int l = (k + count - 1) % count, r = (k + 1) % count;
      double rl = valid[l] ? resid[l] : 1e301;
      double rr = valid[r] ? resid[r] : 1e301;
      if (resid[k] <= rl && resid[k] <= rr) seeds.push_back(k);
    }
  } else {
    double nbr = 1.7 * std::sqrt(4.0 * kPi / count);
    double cos_nbr = std::cos(nbr);
    Matd ginv = inverse(model.interior_metric_components(Vec<double>(z)));
    std::vector<Vecd> raised(count);
    for (int k = 0; k < count; ++k) raised[k] = mul(ginv, dirs[k]);
    for (int k = 0; k < count; ++k) {
      if (!valid[k]) continue;
      bool is_min = true;
      for (int l = 0; l < count && is_min; ++l) {
        if (l == k || !valid[l]) continue;
        if (dot(dirs[k], raised[l]) > cos_nbr && resid[l] < resid[k]) is_min = false;
      }
      if (is_min) seeds.push_back(k);
    }
  }
  std::sort(seeds.begin(), seeds.end(), [&](int a, int b) { return resid[a] < resid[b]; });

  std::vector<Branch> found;
  int converged = 0;
  for (int k : seeds) {
    bool near_existing = false;
    for (const Branch& b : found)
      if (covector_angle(model, z, dirs[k], b.dir) < 10.0 * opts.dedupe_radius) near_existing = true;
    if (near_existing) continue;

    NewtonResult nr = newton_refine(model, z, y_target, dirs[k], opts);
    if (!nr.converged) continue;
    ++converged;

    bool dup = false;
    for (Branch& b : found) {
      if (covector_angle(model, z, nr.dir, b.dir) < opts.dedupe_radius) {
        dup = true;
        if (nr.residual < b.newton_residual) {
          b.dir = nr.dir;
          b.limit = nr.limit;
          b.newton_residual = nr.residual;
          b.newton_iters = nr.iters;
        }
        break;
      }
    }
    if (dup) {
      ++set.meta.deduped;
      continue;
    }

    Branch br;
    br.z = z;
    br.dir = nr.dir;
    br.limit = nr.limit;
    br.newton_residual = nr.residual;
    br.newton_iters = nr.iters;
    br.nondegenerate = !nr.jac_singular;
    found.push_back(br);
  }
  set.meta.converged = converged;

  if (found.empty()) throw Error(Err::NoBranchFound, "no geodesic branch reached the target");

  for (Branch& b : found) {
    if (opts.compute_jacobian) {
      double rel = 0.0;
      b.jacobian = fd_jacobian(model, z, b.dir, opts, rel);
      b.jacobian_err = rel;
      if (b.jacobian <= opts.degeneracy_threshold) b.nondegenerate = false;
    }
    if (opts.compute_conjugate) b.conj_count = conjugate_count(model, z, b.dir, opts.flow);
  }

  std::sort(found.begin(), found.end(), [&](const Branch& a, const Branch& b) {
    for (int i = 0; i < n; ++i) {
      if (a.dir[i] < b.dir[i] - 1e-12) return true;
      if (a.dir[i] > b.dir[i] + 1e-12) return false;
    }
    return false;
  });
  set.branches = std::move(found);
  return set;
}

NondegeneracyReport nondegeneracy_check(const Model& model, BranchSet& set,
                                        const BranchOptions& opts) {
  NondegeneracyReport rep;
  for (int i = 0; i < int(set.branches.size()); ++i) {
    Branch& b = set.branches[i];
    if (b.jacobian == 0.0 && opts.compute_jacobian) {
      double rel = 0.0;
      b.jacobian = fd_jacobian(model, set.z, b.dir, opts, rel);
      b.jacobian_err = rel;
    }
    bool ok = b.jacobian > opts.degeneracy_threshold &&
              b.newton_residual <= 10.0 * opts.newton_tol;
    b.nondegenerate = ok;
    if (!ok) {
      rep.degenerate_indices.push_back(i);
      rep.all_nondegenerate = false;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Conjugate points: Jacobi equation on the normal bundle along the interior
// segment, integrated with fixed-step RK4 next to the geodesic.

namespace {

struct JacobiSystem {
  const Model& model;
  int n, m;

  // packing: z(n), zeta(n), E(m*n), A(m*m), B(m*m)
  int dim() const { return 2 * n + m * n + 2 * m * m; }
  int iz(int i) const { return i; }
  int izeta(int i) const { return n + i; }
  int iE(int a, int i) const { return 2 * n + a * n + i; }
  int iA(int a, int b) const { return 2 * n + m * n + a * m + b; }
  int iB(int a, int b) const { return 2 * n + m * n + m * m + a * m + b; }

  void rhs(const std::array<double, 26>& st, std::array<double, 26>& d) const {
    using D = Dual<double, 3>;
    Vec<D> zd(n);
    for (int i = 0; i < n; ++i) zd[i] = D::seed(st[iz(i)], i);
    Mat<D> gd = model.interior_metric_components(zd);

    Matd g(n), ginv(n);
    std::array<Matd, 3> dg;
    for (int c = 0; c < n; ++c) dg[c] = Matd(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        g(i, j) = gd(i, j).val;
        for (int c = 0; c < n; ++c) dg[c](i, j) = gd(i, j).d[c];
      }
    ginv = inverse(g);

    std::array<Matd, 3> gamma;
    for (int k = 0; k < n; ++k) {
      gamma[k] = Matd(n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int l = 0; l < n; ++l)
            s += ginv(k, l) * (dg[i](l, j) + dg[j](i, l) - dg[l](i, j));
          gamma[k](i, j) = 0.5 * s;
        }
    }

    Vecd z(n), zeta(n);
    for (int i = 0; i < n; ++i) {
      z[i] = st[iz(i)];
      zeta[i] = st[izeta(i)];
    }
    Vecd T = mul(ginv, zeta);

    d.fill(0.0);
    for (int i = 0; i < n; ++i) d[iz(i)] = T[i];
    for (int c = 0; c < n; ++c) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s += T[i] * dg[c](i, j) * T[j];
      d[izeta(c)] = 0.5 * s;
    }

    CurvatureData R = model.curvature(z);

    // parallel frame transport and curvature matrix M_ca = <R(E_a,T)T, E_c>
    Matd M(m);
    for (int a = 0; a < m; ++a) {
      Vecd Ea(n);
      for (int i = 0; i < n; ++i) Ea[i] = st[iE(a, i)];
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) s += gamma[i](j, k) * T[j] * Ea[k];
        d[iE(a, i)] = -s;
      }
      Vecd RE(n);
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) s += R.up(i, j, k, l) * T[j] * Ea[k] * T[l];
        RE[i] = s;
      }
      for (int c = 0; c < m; ++c) {
        Vecd Ec(n);
        for (int i = 0; i < n; ++i) Ec[i] = st[iE(c, i)];
        double s = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) s += g(i, j) * RE[i] * Ec[j];
        M(c, a) = s;
      }
    }

    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) {
        d[iA(a, b)] = st[iB(a, b)];
        double s = 0.0;
        for (int c = 0; c < m; ++c) s += M(a, c) * st[iA(c, b)];
        d[iB(a, b)] = -s;
      }
  }
};

int count_jacobi_zeros(const Model& model, const Vecd& z, const Vecd& dir, double t_end,
                       int nsteps) {
  int n = model.dim(), m = n - 1;
  JacobiSystem sys{model, n, m};

  std::array<double, 26> st{};
  for (int i = 0; i < n; ++i) {
    st[sys.iz(i)] = z[i];
    st[sys.izeta(i)] = dir[i];
  }
  std::vector<Vecd> basis = sphere_tangent_basis(model, z, dir);
  Matd ginv = inverse(model.interior_metric_components(Vec<double>(z)));
  for (int a = 0; a < m; ++a) {
    Vecd Ea = mul(ginv, basis[a]);  // raise index: orthonormal normal frame
    for (int i = 0; i < n; ++i) st[sys.iE(a, i)] = Ea[i];
  }
  for (int a = 0; a < m; ++a) st[sys.iB(a, a)] = 1.0;

  double h = t_end / nsteps;
  std::array<double, 26> k1, k2, k3, k4, tmp;
  int zeros = 0;
  double prev_det = 0.0;
  bool tracking = false;

  for (int step = 0; step < nsteps; ++step) {
    sys.rhs(st, k1);
    for (int i = 0; i < sys.dim(); ++i) tmp[i] = st[i] + 0.5 * h * k1[i];
    sys.rhs(tmp, k2);
    for (int i = 0; i < sys.dim(); ++i) tmp[i] = st[i] + 0.5 * h * k2[i];
    sys.rhs(tmp, k3);
    for (int i = 0; i < sys.dim(); ++i) tmp[i] = st[i] + h * k3[i];
    sys.rhs(tmp, k4);
    for (int i = 0; i < sys.dim(); ++i)
      st[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

    Matd A(m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) A(a, b) = st[sys.iA(a, b)];
    double dA = det(A);
    if (!tracking) {
      if (std::abs(dA) > 1e-10) {
        tracking = true;
        prev_det = dA;
      }
      continue;
    }
    if (dA * prev_det < 0.0) ++zeros;
    if (dA != 0.0) prev_det = dA;
  }
  return zeros;
}

}  // namespace

int conjugate_count(const Model& model, const Vecd& z, const Vecd& dir, const FlowOptions& opts,
                    bool check_stability) {
  GeodesicPath path = integrate_geodesic(model, z, dir, opts);
  if (path.status != PathStatus::ReachedBoundary)
    throw Error(Err::Trapped, "geodesic did not reach the boundary");

  double t_end = 0.0;
  bool has_interior = false;
  for (size_t i = 0; i < path.samples.size(); ++i) {
    if (path.samples[i].chart == ChartId::Collar) {
      t_end = path.samples[i].param;
      has_interior = i > 0;
      break;
    }
  }
  if (!has_interior || t_end <= 0.0) return 0;  // launched inside the collar

  int nsteps = std::max(400, int(std::ceil(t_end / 0.01)));
  int k1 = count_jacobi_zeros(model, z, dir, t_end, nsteps);
  if (check_stability) {
    int k2 = count_jacobi_zeros(model, z, dir, t_end, 2 * nsteps);
    if (k1 != k2)
      throw Error(Err::CountUnstable, "conjugate count changed under step halving");
  }
  return k1;
}

// ---------------------------------------------------------------------------
// Variational route: the boundary-map Jacobian from dual-number propagation
// of the full flow (interior leg, rescaled collar leg, x = 0 event).

namespace {

template <int M>
struct VarState {
  using S = Dual<double, M>;
  std::array<S, 10> y{};
  int dim = 0;
};

template <int M>
class VariationalFlow {
 public:
  using S = Dual<double, M>;
  using SV = std::array<S, 10>;

  VariationalFlow(const Model& model) : model_(model), n_(model.dim()), m_(model.dim() - 1) {}

  void interior_rhs(const SV& st, SV& d) const {
    using DS = Dual<S, 3>;
    Vec<DS> zd(n_);
    for (int i = 0; i < n_; ++i) zd[i] = DS::seed(st[i], i);
    Mat<DS> g = model_.interior_metric_components(zd);
    Mat<DS> ginv = inverse(g);

    S nrm2(0.0);
    for (int i = 0; i < n_; ++i) {
      S zdot(0.0);
      for (int j = 0; j < n_; ++j) zdot += ginv(i, j).val * st[n_ + j];
      d[i] = zdot;
      nrm2 += st[n_ + i] * zdot;
    }
    for (int c = 0; c < n_; ++c) {
      S s(0.0);
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) s += ginv(i, j).d[c] * st[n_ + i] * st[n_ + j];
      d[n_ + c] = -0.5 * s;
    }
    d[2 * n_] = sqrt(nrm2);
  }

  void collar_rhs(const SV& st, SV& d, const S& sigma) const {
    using DS = Dual<S, 3>;
    DS xd = DS::seed(st[0], 0);
    Vec<DS> yd(m_);
    for (int a = 0; a < m_; ++a) yd[a] = DS::seed(st[1 + a], 1 + a);
    Mat<DS> h = model_.collar_family(xd, yd);
    Mat<DS> hinv = inverse(h);
    Vec<DS> etad(m_);
    for (int a = 0; a < m_; ++a) etad[a] = DS(st[3 + m_ + a]);
    Vec<DS> he = mul(hinv, etad);
    DS hs = dot(etad, he);

    const S& x = st[0];
    const S& xi = st[2 + m_];
    if (model_.kind() == GeometryKind::Scattering) {
      d[0] = -2.0 * (sigma + x * x * xi);
      d[1 + m_] = -2.0 * xi;
      d[2 + m_] = 2.0 * x * xi * xi + hs.d[0];
      for (int a = 0; a < m_; ++a) {
        d[1 + a] = -2.0 * he[a].val;
        d[3 + m_ + a] = hs.d[1 + a];
      }
    } else {
      d[0] = -2.0 * (sigma + x * xi);
      d[1 + m_] = -2.0 * xi;
      d[2 + m_] = xi * xi + hs.val + x * hs.d[0];
      for (int a = 0; a < m_; ++a) {
        d[1 + a] = -2.0 * x * he[a].val;
        d[3 + m_ + a] = x * hs.d[1 + a];
      }
    }
  }

  template <class F>
  void rk4(const F& f, SV& st, const S& h) const {
    SV k1{}, k2{}, k3{}, k4{}, tmp{};
    f(st, k1);
    for (int i = 0; i < dim_; ++i) tmp[i] = st[i] + 0.5 * h * k1[i];
    f(tmp, k2);
    for (int i = 0; i < dim_; ++i) tmp[i] = st[i] + 0.5 * h * k2[i];
    f(tmp, k3);
    for (int i = 0; i < dim_; ++i) tmp[i] = st[i] + h * k3[i];
    f(tmp, k4);
    for (int i = 0; i < dim_; ++i)
      st[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }

  S x_of_interior(const SV& st) const {
    if (model_.kind() == GeometryKind::AsympHyperbolic) return st[0];
    S r2(0.0);
    for (int i = 0; i < n_; ++i) r2 += st[i] * st[i];
    return 1.0 / sqrt(r2);
  }

  double run(const Vecd& z, const Vecd& dir, double param_switch, double param_total) {
    std::vector<Vecd> basis = sphere_tangent_basis(model_, z, dir);
    Matd g = model_.interior_metric_components(Vec<double>(z));
    Matd ginv = inverse(g);

    // seeded unit covector: normalize_g(dir + eps_a e_a)
    Vec<S> zeta(n_);
    for (int i = 0; i < n_; ++i) {
      S w(dir[i]);
      for (int a = 0; a < m_; ++a) w += S::seed(0.0, a) * basis[a][i];
      zeta[i] = w;
    }
    S nrm2(0.0);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) nrm2 += zeta[i] * ginv(i, j) * zeta[j];
    S nrm = sqrt(nrm2);
    for (int i = 0; i < n_; ++i) zeta[i] = zeta[i] / nrm;
    S tau(1.0);  // normalized

    double x0 = model_.collar_x0();
    double x_back = std::min(1.5 * x0, 0.95 * model_.collar_limit());
    bool in_collar = model_.x_of_interior(z) < x0;

    SV st{};
    dim_ = 2 * n_ + 1;
    auto fint = [&](const SV& a, SV& b) { interior_rhs(a, b); };
    auto fcol = [&](const SV& a, SV& b) { collar_rhs(a, b, tau); };

    if (in_collar) {
      SV sti{};
      for (int i = 0; i < n_; ++i) {
        sti[i] = S(z[i]);
        sti[n_ + i] = zeta[i];
      }
      sti[2 * n_] = S(0.0);
      st = to_collar_state(sti, tau);
    } else {
      for (int i = 0; i < n_; ++i) {
        st[i] = S(z[i]);
        st[n_ + i] = zeta[i];
      }
      st[2 * n_] = S(0.0);
    }

    double h_int = std::min(0.002, std::max(1e-4, param_switch / 400.0));
    double h_col = 0.001;
    int guard = 0;
    (void)param_total;

    while (guard++ < 2000000) {
      if (!in_collar) {
        rk4(fint, st, S(h_int));
        S xv = x_of_interior(st);
        if (value_of(xv) < x0) {
          // dual Newton back onto x = x0
          for (int it = 0; it < 8; ++it) {
            SV d{};
            interior_rhs(st, d);
            S xx = x_of_interior(st);
            S xdot(0.0);
            if (model_.kind() == GeometryKind::AsympHyperbolic) {
              xdot = d[0];
            } else {
              S r2(0.0), zdotz(0.0);
              for (int i = 0; i < n_; ++i) {
                r2 += st[i] * st[i];
                zdotz += st[i] * d[i];
              }
              xdot = -1.0 * zdotz / (r2 * sqrt(r2));
            }
            S dt = (S(x0) - xx) / xdot;
            rk4(fint, st, dt);
            if (std::abs(value_of(x_of_interior(st)) - x0) < 1e-13) break;
          }
          st = to_collar_state(st, tau);
          in_collar = true;
          dim_ = 2 * n_ + 1;
          continue;
        }
      } else {
        rk4(fcol, st, S(h_col));
        if (value_of(st[0]) <= 0.0) {
          for (int it = 0; it < 8; ++it) {
            SV d{};
            collar_rhs(st, d, tau);
            S dt = (S(0.0) - st[0]) / d[0];
            rk4(fcol, st, dt);
            if (std::abs(value_of(st[0])) < 1e-13) break;
          }
          // Jacobian of the y block w.r.t. the seeds, times sqrt(det h0).
          Matd D(m_);
          Vecd yv(m_);
          for (int a = 0; a < m_; ++a) {
            yv[a] = value_of(st[1 + a]);
            for (int b = 0; b < m_; ++b) D(a, b) = st[1 + a].d[b];
          }
          return std::abs(det(D)) * boundary_density(model_, yv);
        }
        if (value_of(st[0]) > x_back) {
          st = to_interior_state(st, tau);
          in_collar = false;
          continue;
        }
      }
    }
    throw Error(Err::IntegratorFailure, "variational flow did not reach the boundary");
  }

 private:
  SV to_collar_state(const SV& sti, const S& tau) const {
    Vec<S> z(n_), zeta(n_);
    for (int i = 0; i < n_; ++i) {
      z[i] = sti[i];
      zeta[i] = sti[n_ + i];
    }
    S t = sti[2 * n_];
    S x;
    Vec<S> y;
    model_.to_collar_coords(z, x, y);
    Mat<S> J = model_.collar_jacobian_of(x, y);
    Vec<S> cov = mul(transpose(J), zeta);
    SV st{};
    st[0] = x;
    for (int a = 0; a < m_; ++a) {
      st[1 + a] = y[a];
      st[3 + m_ + a] = -1.0 * cov[1 + a];
    }
    if (model_.kind() == GeometryKind::Scattering) {
      st[2 + m_] = -1.0 * cov[0] - tau / (x * x);
      st[1 + m_] = t - 1.0 / x;
    } else {
      st[2 + m_] = -1.0 * cov[0] - tau / x;
      st[1 + m_] = t + log(x);
    }
    return st;
  }

  SV to_interior_state(const SV& stc, const S& tau) const {
    S x = stc[0];
    Vec<S> y(m_), eta(m_);
    for (int a = 0; a < m_; ++a) {
      y[a] = stc[1 + a];
      eta[a] = stc[3 + m_ + a];
    }
    S s = stc[1 + m_];
    S xi = stc[2 + m_];
    S xi_rev, t;
    if (model_.kind() == GeometryKind::Scattering) {
      xi_rev = xi + tau / (x * x);
      t = s + 1.0 / x;
    } else {
      xi_rev = xi + tau / x;
      t = s - log(x);
    }
    Vec<S> cov(n_);
    cov[0] = -1.0 * xi_rev;
    for (int a = 0; a < m_; ++a) cov[1 + a] = -1.0 * eta[a];
    Mat<S> J = model_.collar_jacobian_of(x, y);
    Vec<S> zeta = mul(transpose(inverse(J)), cov);
    Vec<S> nh(n_);
    if (model_.kind() == GeometryKind::AsympHyperbolic) {
      SV st{};
      st[0] = x;
      for (int a = 0; a < m_; ++a) st[1 + a] = y[a];
      for (int i = 0; i < n_; ++i) st[n_ + i] = zeta[i];
      st[2 * n_] = t;
      return st;
    }
    if (n_ == 2) {
      nh[0] = cos(y[0]);
      nh[1] = sin(y[0]);
    } else {
      S U = y[0] * y[0] + y[1] * y[1];
      S D = 1.0 + U;
      nh[0] = 2.0 * y[0] / D;
      nh[1] = 2.0 * y[1] / D;
      nh[2] = (1.0 - U) / D;
    }
    SV st{};
    for (int i = 0; i < n_; ++i) {
      st[i] = nh[i] / x;
      st[n_ + i] = zeta[i];
    }
    st[2 * n_] = t;
    return st;
  }

  const Model& model_;
  int n_, m_;
  mutable int dim_ = 0;
};

}  // namespace

double boundary_jacobian_variational(const Model& model, const Vecd& z, const Vecd& dir,
                                     const FlowOptions& opts) {
  GeodesicPath path = integrate_geodesic(model, z, dir, opts);
  if (path.status != PathStatus::ReachedBoundary)
    throw Error(Err::Trapped, "geodesic did not reach the boundary");
  double p_switch = 0.0;
  for (const PhaseState& ps : path.samples)
    if (ps.chart == ChartId::Collar) {
      p_switch = ps.param;
      break;
    }
  double p_total = path.back().param;

  if (model.dim() == 2) {
    VariationalFlow<1> vf(model);
    return vf.run(z, dir, p_switch, p_total);
  }
  VariationalFlow<2> vf(model);
  return vf.run(z, dir, p_switch, p_total);
}

}  // namespace sojourn
