#include "sojourn/geometry.hpp"

#include <cmath>

namespace sojourn {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Wrap an angle to (-pi, pi], shifting by a constant so dual derivatives pass
// through unchanged.
template <class T>
T wrap_angle(const T& th) {
  double v = value_of(th);
  double shift = v - std::remainder(v, 2.0 * kPi);
  return th - T(shift);
}

double get_param(const std::map<std::string, double>& p, const std::string& k, double dflt) {
  auto it = p.find(k);
  return it == p.end() ? dflt : it->second;
}

}  // namespace

Model Model::make(const ModelSpec& spec) {
  Model m;
  m.spec_ = spec;
  m.id_ = spec.id;
  m.n_ = spec.dim;
  if (m.n_ != 2 && m.n_ != 3)
    throw Error(Err::ParamOutOfRange, "dim must be 2 or 3");

  switch (spec.id) {
    case ModelId::FlatEuclidean:
      m.kind_ = GeometryKind::Scattering;
      m.collar_limit_ = 0.8;
      break;
    case ModelId::HyperbolicHn:
      m.kind_ = GeometryKind::AsympHyperbolic;
      m.collar_limit_ = 1e9;
      break;
    case ModelId::PerturbedScattering:
      m.kind_ = GeometryKind::Scattering;
      m.collar_limit_ = 0.6;
      break;
    case ModelId::PerturbedAH:
      m.kind_ = GeometryKind::AsympHyperbolic;
      m.collar_limit_ = 1e9;
      break;
    default:
      throw Error(Err::UnknownModel, "unknown model id");
  }

  if (spec.id == ModelId::PerturbedScattering || spec.id == ModelId::PerturbedAH) {
    m.a_ = get_param(spec.params, "a", 0.0);
    m.w_ = get_param(spec.params, "w", 1.0);
    if (std::abs(m.a_) > 0.3)
      throw Error(Err::ParamOutOfRange,
                  "perturbation amplitude |a| <= 0.3 (documented nontrapping range)");
    double lo = get_param(spec.params, "shell_lo", 0.0);
    double hi = get_param(spec.params, "shell_hi", 0.0);
    if (lo != 0.0 || hi != 0.0) {
      if (!(0.0 < lo && lo < hi && hi <= 0.6))
        throw Error(Err::ParamOutOfRange, "shell profile requires 0 < shell_lo < shell_hi <= 0.6");
      m.shell_ = true;
      m.shell_lo_ = lo;
      m.shell_hi_ = hi;
    }
  } else if (!spec.params.empty()) {
    throw Error(Err::ParamOutOfRange, "exact models take no perturbation parameters");
  }

  m.collar_x0_ = spec.collar_x0;
  double x0_max = std::min(0.5, 0.75 * m.collar_limit_);
  if (!(m.collar_x0_ > 0.0 && m.collar_x0_ <= x0_max))
    throw Error(Err::ParamOutOfRange, "collar_x0 outside the documented validity range");
  return m;
}

bool Model::rotationally_symmetric() const {
  if (id_ == ModelId::FlatEuclidean) return true;
  if (id_ == ModelId::PerturbedScattering) return w_ <= 0.0;  // isotropic profile only
  return false;
}

template <class T>
T Model::conformal_factor(const T& x, const Vec<T>& y) const {
  if (id_ == ModelId::FlatEuclidean || id_ == ModelId::HyperbolicHn) return T(1.0);

  T radial;
  if (shell_) {
    T mid = T(0.5 * (shell_lo_ + shell_hi_));
    T half = T(0.5 * (shell_hi_ - shell_lo_));
    radial = smooth_bump((x - mid) / half);
  } else {
    // x * cutoff: equals x for x <= 0.6, fades out by x = 2 so the interior
    // continuation stays smooth and nondegenerate.
    T chi = 1.0 - smoothstep01((x - 0.6) / 1.4);
    radial = x * chi;
  }

  T profile(1.0);
  if (w_ > 0.0) {
    T y2(0.0);
    for (int i = 0; i < y.size(); ++i) {
      T yi = (kind_ == GeometryKind::Scattering && n_ == 2) ? wrap_angle(y[i]) : y[i];
      y2 += yi * yi;
    }
    profile = exp(-1.0 * y2 / (w_ * w_));
  }
  return 1.0 + a_ * radial * profile;
}

template <class T>
Vec<T> Model::boundary_unit_vector(const Vec<T>& y) const {
  Vec<T> nhat(n_);
  if (n_ == 2) {
    nhat[0] = cos(y[0]);
    nhat[1] = sin(y[0]);
  } else {
    // Stereographic chart of S^2 projected from the south pole (0,0,-1):
    // u = 0 is the north pole, the chart omits a cap around the south pole.
    T U = y[0] * y[0] + y[1] * y[1];
    T D = 1.0 + U;
    nhat[0] = 2.0 * y[0] / D;
    nhat[1] = 2.0 * y[1] / D;
    nhat[2] = (1.0 - U) / D;
  }
  return nhat;
}

Vecd Model::boundary_chart_of_unit(const Vecd& nhat) const {
  Vecd y(n_ - 1);
  if (n_ == 2) {
    y[0] = std::atan2(nhat[1], nhat[0]);
  } else {
    double d = 1.0 + nhat[2];
    if (d < 0.05)
      throw Error(Err::OutsideChart, "direction too close to the stereographic pole");
    y[0] = nhat[0] / d;
    y[1] = nhat[1] / d;
  }
  return y;
}

template <class T>
Mat<T> Model::collar_family(const T& x, const Vec<T>& y) const {
  int m = n_ - 1;
  Mat<T> h(m);
  switch (id_) {
    case ModelId::FlatEuclidean: {
      if (n_ == 2) {
        h(0, 0) = T(1.0);
      } else {
        T U = y[0] * y[0] + y[1] * y[1];
        T lam2 = 4.0 / ((1.0 + U) * (1.0 + U));
        h(0, 0) = lam2;
        h(1, 1) = lam2;
      }
      break;
    }
    case ModelId::HyperbolicHn: {
      for (int i = 0; i < m; ++i) h(i, i) = T(1.0);
      break;
    }
    case ModelId::PerturbedScattering: {
      T c = conformal_factor(x, y);
      if (n_ == 2) {
        h(0, 0) = c;
      } else {
        T U = y[0] * y[0] + y[1] * y[1];
        T lam2 = 4.0 / ((1.0 + U) * (1.0 + U));
        h(0, 0) = c * lam2;
        h(1, 1) = c * lam2;
      }
      break;
    }
    case ModelId::PerturbedAH: {
      T c = conformal_factor(x, y);
      for (int i = 0; i < m; ++i) h(i, i) = c;
      break;
    }
  }
  return h;
}

template <class T>
Mat<T> Model::interior_metric_components(const Vec<T>& z) const {
  Mat<T> g(n_);
  switch (id_) {
    case ModelId::FlatEuclidean: {
      for (int i = 0; i < n_; ++i) g(i, i) = T(1.0);
      break;
    }
    case ModelId::HyperbolicHn: {
      T inv_x2 = 1.0 / (z[0] * z[0]);
      for (int i = 0; i < n_; ++i) g(i, i) = inv_x2;
      break;
    }
    case ModelId::PerturbedScattering: {
      // Pullback of dr^2 + r^2 c(1/r, y) h_base: flat metric plus
      // a * phi(1/r) * profile times the angular projector.
      for (int i = 0; i < n_; ++i) g(i, i) = T(1.0);
      T r2(0.0);
      for (int i = 0; i < n_; ++i) r2 += z[i] * z[i];
      double rv = std::sqrt(value_of(r2));
      if (rv < 0.4) break;  // cutoff makes the perturbation vanish identically here
      T r = sqrt(r2);
      Vec<T> nh(n_);
      for (int i = 0; i < n_; ++i) nh[i] = z[i] / r;
      Vec<T> y(n_ - 1);
      if (n_ == 2) {
        y[0] = atan2(nh[1], nh[0]);
      } else {
        T d = 1.0 + nh[2];
        y[0] = nh[0] / d;
        y[1] = nh[1] / d;
      }
      T c = conformal_factor(1.0 / r, y);
      T pert = c - 1.0;
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) {
          T proj = (i == j ? T(1.0) : T(0.0)) - nh[i] * nh[j];
          g(i, j) += pert * proj;
        }
      break;
    }
    case ModelId::PerturbedAH: {
      Vec<T> y(n_ - 1);
      for (int i = 0; i < n_ - 1; ++i) y[i] = z[i + 1];
      T c = conformal_factor(z[0], y);
      T inv_x2 = 1.0 / (z[0] * z[0]);
      g(0, 0) = inv_x2;
      for (int i = 1; i < n_; ++i) g(i, i) = c * inv_x2;
      break;
    }
  }
  return g;
}

template <class T>
std::array<Mat<T>, 3> Model::christoffels(const Vec<T>& z) const {
  using D = Dual<T, 3>;
  Vec<D> zd(n_);
  for (int i = 0; i < n_; ++i) zd[i] = D::seed(z[i], i);
  Mat<D> gd = interior_metric_components(zd);

  Mat<T> g(n_);
  std::array<Mat<T>, 3> dg;
  for (int c = 0; c < n_; ++c) dg[c] = Mat<T>(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      g(i, j) = gd(i, j).val;
      for (int c = 0; c < n_; ++c) dg[c](i, j) = gd(i, j).d[c];
    }
  Mat<T> ginv = inverse(g);

  std::array<Mat<T>, 3> gamma;
  for (int k = 0; k < n_; ++k) {
    gamma[k] = Mat<T>(n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        T s{};
        for (int l = 0; l < n_; ++l)
          s += ginv(k, l) * (dg[i](l, j) + dg[j](i, l) - dg[l](i, j));
        gamma[k](i, j) = 0.5 * s;
      }
  }
  return gamma;
}

MetricData Model::collar_metric(double x, const Vecd& y) const {
  if (!(x >= 0.0 && x <= collar_limit_))
    throw Error(Err::OutsideChart, "x outside the collar family validity range");
  if (!collar_chart_contains(x, y))
    throw Error(Err::OutsideChart, "boundary point outside the chart domain");

  using D = Dual<double, 3>;
  int m = n_ - 1;
  D xd = D::seed(x, 0);
  Vec<D> yd(m);
  for (int a = 0; a < m; ++a) yd[a] = D::seed(y[a], 1 + a);
  Mat<D> hd = collar_family(xd, yd);

  MetricData out;
  out.ncoords = n_;
  out.components = Matd(m);
  for (int c = 0; c < n_; ++c) out.d_components[c] = Matd(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      out.components(i, j) = hd(i, j).val;
      for (int c = 0; c < n_; ++c) out.d_components[c](i, j) = hd(i, j).d[c];
    }
  out.inverse = inverse(out.components);
  return out;
}

void Model::collar_symbol(double x, const Vecd& y, const Vecd& eta, double& hsym,
                          double& dhsym_dx, Vecd& dhsym_dy, Vecd& hinv_eta) const {
  using D = Dual<double, 3>;
  int m = n_ - 1;
  D xd = D::seed(x, 0);
  Vec<D> yd(m);
  for (int a = 0; a < m; ++a) yd[a] = D::seed(y[a], 1 + a);
  Mat<D> hd = collar_family(xd, yd);
  Mat<D> hdinv = inverse(hd);

  Vec<D> etad(m);
  for (int a = 0; a < m; ++a) etad[a] = D(eta[a]);
  Vec<D> he = mul(hdinv, etad);
  D s = dot(etad, he);

  hsym = s.val;
  dhsym_dx = s.d[0];
  dhsym_dy = Vecd(m);
  hinv_eta = Vecd(m);
  for (int a = 0; a < m; ++a) {
    dhsym_dy[a] = s.d[1 + a];
    hinv_eta[a] = he[a].val;
  }
}

InteriorMetric Model::interior_metric(const Vecd& z) const {
  if (!interior_chart_contains(z))
    throw Error(Err::OutsideChart, "point outside the interior chart");

  using D = Dual<double, 3>;
  Vec<D> zd(n_);
  for (int i = 0; i < n_; ++i) zd[i] = D::seed(z[i], i);
  Mat<D> gd = interior_metric_components(zd);

  InteriorMetric out;
  out.g = Matd(n_);
  for (int c = 0; c < n_; ++c) out.dg[c] = Matd(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      out.g(i, j) = gd(i, j).val;
      for (int c = 0; c < n_; ++c) out.dg[c](i, j) = gd(i, j).d[c];
    }
  out.ginv = inverse(out.g);
  out.gamma = christoffels(Vecd(z));
  return out;
}

double Model::x_of_interior(const Vecd& z) const {
  if (kind_ == GeometryKind::AsympHyperbolic) return z[0];
  double r = norm2(z);
  return r > 0.0 ? 1.0 / r : 1e300;
}

template <class T>
void Model::to_collar_coords(const Vec<T>& z, T& x, Vec<T>& y) const {
  y = Vec<T>(n_ - 1);
  if (kind_ == GeometryKind::AsympHyperbolic) {
    x = z[0];
    for (int a = 0; a < n_ - 1; ++a) y[a] = z[1 + a];
    return;
  }
  T r2(0.0);
  for (int i = 0; i < n_; ++i) r2 += z[i] * z[i];
  T r = sqrt(r2);
  x = 1.0 / r;
  if (n_ == 2) {
    y[0] = atan2(z[1], z[0]);
  } else {
    T d = r + z[2];
    y[0] = z[0] / d;
    y[1] = z[1] / d;
  }
}

template <class T>
Mat<T> Model::collar_jacobian_of(const T& x, const Vec<T>& y) const {
  if (kind_ == GeometryKind::AsympHyperbolic) {
    Mat<T> J(n_);
    for (int i = 0; i < n_; ++i) J(i, i) = T(1.0);
    return J;
  }
  using D = Dual<T, 3>;
  D xd = D::seed(x, 0);
  Vec<D> yd(n_ - 1);
  for (int a = 0; a < n_ - 1; ++a) yd[a] = D::seed(y[a], 1 + a);
  Vec<D> nh = boundary_unit_vector(yd);
  Mat<T> J(n_);
  for (int i = 0; i < n_; ++i) {
    D zi = nh[i] / xd;
    for (int c = 0; c < n_; ++c) J(i, c) = zi.d[c];
  }
  return J;
}

Matd Model::collar_to_interior_jacobian(double x, const Vecd& y) const {
  return collar_jacobian_of(x, y);
}

void Model::transition(const ChartPointd& p, const Vecd& covector, ChartPointd& q,
                       Vecd& covector_out) const {
  if (kind_ == GeometryKind::AsympHyperbolic) {
    // Interior and collar charts coincide on the half-space models.
    double x = p.coords[0];
    if (!(x > 0.0 && x <= collar_limit_))
      throw Error(Err::OutsideOverlap, "point outside the chart overlap");
    q.chart = (p.chart == ChartId::Interior) ? ChartId::Collar : ChartId::Interior;
    q.coords = p.coords;
    covector_out = covector;
    return;
  }

  if (p.chart == ChartId::Interior) {
    double r = norm2(p.coords);
    if (!(r > 0.0) || 1.0 / r > collar_limit_)
      throw Error(Err::OutsideOverlap, "point outside the chart overlap");
    double x = 1.0 / r;
    Vecd nhat(n_);
    for (int i = 0; i < n_; ++i) nhat[i] = p.coords[i] * x;
    Vecd y = boundary_chart_of_unit(nhat);
    Vecd xy(n_);
    xy[0] = x;
    for (int a = 0; a < n_ - 1; ++a) xy[1 + a] = y[a];
    Matd J = collar_to_interior_jacobian(x, y);
    covector_out = mul(transpose(J), covector);
    q.chart = ChartId::Collar;
    q.coords = xy;
  } else {
    double x = p.coords[0];
    if (!(x > 0.0 && x <= collar_limit_))
      throw Error(Err::OutsideOverlap, "point outside the chart overlap");
    Vecd y(n_ - 1);
    for (int a = 0; a < n_ - 1; ++a) y[a] = p.coords[1 + a];
    if (!collar_chart_contains(x, y))
      throw Error(Err::OutsideChart, "boundary point outside the chart domain");
    Vecd nhat(n_);
    {
      Vec<double> yv = y;
      nhat = boundary_unit_vector(yv);
    }
    Vecd z(n_);
    for (int i = 0; i < n_; ++i) z[i] = nhat[i] / x;
    Matd J = collar_to_interior_jacobian(x, y);
    covector_out = mul(transpose(inverse(J)), covector);
    q.chart = ChartId::Interior;
    q.coords = z;
  }
}

CurvatureData Model::curvature(const Vecd& z) const {
  if (!interior_chart_contains(z))
    throw Error(Err::CurvatureUnavailable, "point outside the interior chart");

  // Analytic forms for the two exact models; the dual-number path below
  // covers the perturbed catalog.
  if (id_ == ModelId::FlatEuclidean) {
    CurvatureData R;
    R.n = n_;
    return R;
  }
  if (id_ == ModelId::HyperbolicHn) {
    CurvatureData R;
    R.n = n_;
    double gdiag = 1.0 / (z[0] * z[0]);  // g = delta / x^2
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        for (int k = 0; k < n_; ++k)
          for (int l = 0; l < n_; ++l) {
            double glj = (l == j) ? gdiag : 0.0;
            double gkj = (k == j) ? gdiag : 0.0;
            R.r[i][j][k][l] = -(((i == k) ? glj : 0.0) - ((i == l) ? gkj : 0.0));
          }
    return R;
  }

  using D = Dual<double, 3>;
  Vec<D> zd(n_);
  for (int i = 0; i < n_; ++i) zd[i] = D::seed(z[i], i);
  std::array<Mat<D>, 3> gam = christoffels(zd);

  // R^i_{jkl} = d_k Gamma^i_{lj} - d_l Gamma^i_{kj}
  //           + Gamma^i_{km} Gamma^m_{lj} - Gamma^i_{lm} Gamma^m_{kj}
  CurvatureData R;
  R.n = n_;
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int k = 0; k < n_; ++k)
        for (int l = 0; l < n_; ++l) {
          double v = gam[i](l, j).d[k] - gam[i](k, j).d[l];
          for (int m = 0; m < n_; ++m)
            v += gam[i](k, m).val * gam[m](l, j).val -
                 gam[i](l, m).val * gam[m](k, j).val;
          R.r[i][j][k][l] = v;
        }
  return R;
}

double Model::covector_norm(const Vecd& z, const Vecd& zeta) const {
  Matd g = interior_metric_components(Vec<double>(z));
  Matd ginv = inverse(g);
  return std::sqrt(dot(zeta, mul(ginv, zeta)));
}

void Model::radial_conformal(double x, double& c, double& dc) const {
  if (!rotationally_symmetric())
    throw Error(Err::ValidationError, "model is not rotationally symmetric");
  using D = Dual<double, 1>;
  D xd = D::seed(x, 0);
  Vec<D> y(n_ - 1);  // isotropic profile: y plays no role
  D cd = conformal_factor(xd, y);
  c = cd.val;
  dc = cd.d[0];
}

bool Model::interior_chart_contains(const Vecd& z) const {
  if (kind_ == GeometryKind::AsympHyperbolic) return z[0] > 0.0;
  return true;
}

bool Model::collar_chart_contains(double x, const Vecd& y) const {
  (void)x;
  if (kind_ == GeometryKind::AsympHyperbolic) return true;
  if (n_ == 2) return true;  // angle chart wraps
  return y[0] * y[0] + y[1] * y[1] <= 16.0;
}

// Explicit instantiations for the scalar types used across the project.
using D1 = Dual<double, 1>;
using D2 = Dual<double, 2>;
using D3 = Dual<double, 3>;

template Mat<double> Model::interior_metric_components(const Vec<double>&) const;
template Mat<D3> Model::interior_metric_components(const Vec<D3>&) const;
template Mat<Dual<D3, 3>> Model::interior_metric_components(const Vec<Dual<D3, 3>>&) const;
template Mat<Dual<D1, 3>> Model::interior_metric_components(const Vec<Dual<D1, 3>>&) const;
template Mat<Dual<D2, 3>> Model::interior_metric_components(const Vec<Dual<D2, 3>>&) const;

template Mat<double> Model::collar_family(const double&, const Vec<double>&) const;
template Mat<D3> Model::collar_family(const D3&, const Vec<D3>&) const;
template Mat<Dual<D1, 3>> Model::collar_family(const Dual<D1, 3>&, const Vec<Dual<D1, 3>>&) const;
template Mat<Dual<D2, 3>> Model::collar_family(const Dual<D2, 3>&, const Vec<Dual<D2, 3>>&) const;

template std::array<Mat<double>, 3> Model::christoffels(const Vec<double>&) const;
template std::array<Mat<D3>, 3> Model::christoffels(const Vec<D3>&) const;

template void Model::to_collar_coords(const Vec<double>&, double&, Vec<double>&) const;
template void Model::to_collar_coords(const Vec<D1>&, D1&, Vec<D1>&) const;
template void Model::to_collar_coords(const Vec<D2>&, D2&, Vec<D2>&) const;

template Mat<double> Model::collar_jacobian_of(const double&, const Vec<double>&) const;
template Mat<D1> Model::collar_jacobian_of(const D1&, const Vec<D1>&) const;
template Mat<D2> Model::collar_jacobian_of(const D2&, const Vec<D2>&) const;

}  // namespace sojourn
