#pragma once

#include <array>
#include <map>
#include <string>

#include "sojourn/dual.hpp"
#include "sojourn/errors.hpp"
#include "sojourn/linalg.hpp"

namespace sojourn {

enum class GeometryKind { Scattering, AsympHyperbolic };
enum class ModelId { FlatEuclidean, HyperbolicHn, PerturbedScattering, PerturbedAH };
enum class ChartId { Interior, Collar };

struct ModelSpec {
  ModelId id = ModelId::FlatEuclidean;
  int dim = 3;                            // dimension n of X, 2 or 3
  std::map<std::string, double> params;   // a, w, shell_lo, shell_hi
  double collar_x0 = 0.2;                 // chart-switch threshold
};

// Metric at a point of one chart: components, inverse, and coordinate
// derivatives of the components.
struct MetricData {
  Matd components;
  Matd inverse;
  std::array<Matd, 3> d_components;  // d/d(coord c)
  int ncoords = 0;
};

struct InteriorMetric {
  Matd g;
  Matd ginv;
  std::array<Matd, 3> dg;      // dg[c](i,j) = d g_ij / d z_c
  std::array<Matd, 3> gamma;   // gamma[k](i,j) = Christoffel^k_ij
};

struct ChartPointd {
  ChartId chart = ChartId::Interior;
  Vecd coords;  // Interior: z (n entries). Collar: (x, y...) (n entries)
};

// Full curvature tensor R^i_{jkl} at an interior point.
struct CurvatureData {
  int n = 0;
  double r[3][3][3][3] = {};
  double up(int i, int j, int k, int l) const { return r[i][j][k][l]; }
};

class Model {
 public:
  static Model make(const ModelSpec& spec);  // validates; throws UnknownModel / ParamOutOfRange

  GeometryKind kind() const { return kind_; }
  ModelId id() const { return id_; }
  int dim() const { return n_; }
  int bdim() const { return n_ - 1; }
  double collar_x0() const { return collar_x0_; }
  double collar_limit() const { return collar_limit_; }
  double amplitude() const { return a_; }
  bool rotationally_symmetric() const;
  const ModelSpec& spec() const { return spec_; }

  // Collar metric family h(x, y): components, inverse, d/dx and d/dy of the
  // components; x = 0 gives the boundary metric h0.
  MetricData collar_metric(double x, const Vecd& y) const;

  // Dual-metric symbol data for the rescaled collar flow:
  // hsym = h^{ab} eta_a eta_b and its x / y derivatives.
  void collar_symbol(double x, const Vecd& y, const Vecd& eta, double& hsym,
                     double& dhsym_dx, Vecd& dhsym_dy, Vecd& hinv_eta) const;

  InteriorMetric interior_metric(const Vecd& z) const;

  // Boundary-defining function evaluated in the interior chart.
  double x_of_interior(const Vecd& z) const;

  // Chart transition with covector transport. Throws OutsideOverlap when the
  // point is not in the overlap region.
  void transition(const ChartPointd& p, const Vecd& covector, ChartPointd& q,
                  Vecd& covector_out) const;

  // Jacobian d z / d(x,y) of the collar->interior coordinate map at (x, y).
  Matd collar_to_interior_jacobian(double x, const Vecd& y) const;

  CurvatureData curvature(const Vecd& z) const;

  // Covector norm |zeta|_g at an interior point.
  double covector_norm(const Vecd& z, const Vecd& zeta) const;

  // h(x,y) = c(x) h_base for rotationally symmetric models: c and c'.
  void radial_conformal(double x, double& c, double& dc) const;

  // Templated metric evaluators (used by the dual-number differentiation
  // paths and the variational flow).
  template <class T>
  Mat<T> interior_metric_components(const Vec<T>& z) const;
  template <class T>
  Mat<T> collar_family(const T& x, const Vec<T>& y) const;

  // Interior Christoffels, templated so curvature can differentiate them.
  template <class T>
  std::array<Mat<T>, 3> christoffels(const Vec<T>& z) const;

  // Templated chart-transition pieces, used by the variational (dual-number)
  // flow: interior coords -> collar coords, and the Jacobian dz/d(x,y).
  template <class T>
  void to_collar_coords(const Vec<T>& z, T& x, Vec<T>& y) const;
  template <class T>
  Mat<T> collar_jacobian_of(const T& x, const Vec<T>& y) const;

  bool interior_chart_contains(const Vecd& z) const;
  bool collar_chart_contains(double x, const Vecd& y) const;

 private:
  template <class T>
  T conformal_factor(const T& x, const Vec<T>& y) const;  // c(x,y) of perturbed models
  template <class T>
  Vec<T> boundary_unit_vector(const Vec<T>& y) const;     // scattering: chart point -> unit vector
  Vecd boundary_chart_of_unit(const Vecd& nhat) const;

  ModelSpec spec_;
  GeometryKind kind_ = GeometryKind::Scattering;
  ModelId id_ = ModelId::FlatEuclidean;
  int n_ = 3;
  double a_ = 0.0;
  double w_ = 0.0;        // <= 0 means isotropic profile
  bool shell_ = false;    // radial shell profile instead of x * cutoff
  double shell_lo_ = 0.0, shell_hi_ = 0.0;
  double collar_x0_ = 0.2;
  double collar_limit_ = 0.8;
};

// Smooth cutoff helpers shared by the catalog and the test oracles.
template <class T>
T smoothstep01(const T& u) {
  double uv = value_of(u);
  if (uv <= 0.0) return T(0.0);
  if (uv >= 1.0) return T(1.0);
  T qa = exp(-1.0 / u);
  T qb = exp(-1.0 / (1.0 - u));
  return qa / (qa + qb);
}

template <class T>
T smooth_bump(const T& xi) {  // supported on (-1, 1), max 1 at 0
  double xv = value_of(xi);
  if (xv <= -1.0 || xv >= 1.0) return T(0.0);
  return exp(1.0 - 1.0 / (1.0 - xi * xi));
}

}  // namespace sojourn
