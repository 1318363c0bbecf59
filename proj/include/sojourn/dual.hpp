#pragma once

#include <array>
#include <cmath>
#include <type_traits>

namespace sojourn {

inline double value_of(double x) { return x; }

// Forward-mode dual number carrying a value and up to N partial derivatives.
// Nesting Dual<Dual<double,N>,N> yields exact second derivatives; the metric
// catalog is evaluated on these to obtain Christoffel symbols and curvature
// without finite-difference noise.
template <class T, int N>
struct Dual {
  T val{};
  std::array<T, N> d{};

  Dual() = default;
  Dual(double v) : val(v) {}  // NOLINT: constants promote implicitly
  template <class U = T, class = std::enable_if_t<!std::is_same_v<U, double>>>
  Dual(const T& v) : val(v) {}

  static Dual seed(const T& v, int i) {
    Dual r;
    r.val = v;
    r.d[i] = T(1.0);
    return r;
  }

  Dual operator-() const {
    Dual r;
    r.val = -val;
    for (int i = 0; i < N; ++i) r.d[i] = -d[i];
    return r;
  }
  Dual& operator+=(const Dual& o) {
    val += o.val;
    for (int i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    val -= o.val;
    for (int i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (int i = 0; i < N; ++i) d[i] = d[i] * o.val + val * o.d[i];
    val = val * o.val;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    T inv = T(1.0) / o.val;
    for (int i = 0; i < N; ++i) d[i] = (d[i] - val * inv * o.d[i]) * inv;
    val = val * inv;
    return *this;
  }
};

template <class T, int N>
double value_of(const Dual<T, N>& x) {
  return value_of(x.val);
}

template <class T, int N>
Dual<T, N> operator+(Dual<T, N> a, const Dual<T, N>& b) { return a += b; }
template <class T, int N>
Dual<T, N> operator-(Dual<T, N> a, const Dual<T, N>& b) { return a -= b; }
template <class T, int N>
Dual<T, N> operator*(Dual<T, N> a, const Dual<T, N>& b) { return a *= b; }
template <class T, int N>
Dual<T, N> operator/(Dual<T, N> a, const Dual<T, N>& b) { return a /= b; }

template <class T, int N>
Dual<T, N> operator+(Dual<T, N> a, double b) { return a += Dual<T, N>(b); }
template <class T, int N>
Dual<T, N> operator-(Dual<T, N> a, double b) { return a -= Dual<T, N>(b); }
template <class T, int N>
Dual<T, N> operator*(Dual<T, N> a, double b) { return a *= Dual<T, N>(b); }
template <class T, int N>
Dual<T, N> operator/(Dual<T, N> a, double b) { return a /= Dual<T, N>(b); }

template <class T, int N>
Dual<T, N> operator+(double a, Dual<T, N> b) { return b += Dual<T, N>(a); }
template <class T, int N>
Dual<T, N> operator-(double a, const Dual<T, N>& b) { return Dual<T, N>(a) - b; }
template <class T, int N>
Dual<T, N> operator*(double a, Dual<T, N> b) { return b *= Dual<T, N>(a); }
template <class T, int N>
Dual<T, N> operator/(double a, const Dual<T, N>& b) { return Dual<T, N>(a) / b; }

template <class T, int N>
bool operator<(const Dual<T, N>& a, const Dual<T, N>& b) { return value_of(a) < value_of(b); }
template <class T, int N>
bool operator>(const Dual<T, N>& a, const Dual<T, N>& b) { return value_of(a) > value_of(b); }
template <class T, int N>
bool operator<(const Dual<T, N>& a, double b) { return value_of(a) < b; }
template <class T, int N>
bool operator>(const Dual<T, N>& a, double b) { return value_of(a) > b; }

inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double atan2(double y, double x) { return std::atan2(y, x); }

template <class T, int N>
Dual<T, N> make_chain(const Dual<T, N>& x, const T& f, const T& fprime) {
  Dual<T, N> r;
  r.val = f;
  for (int i = 0; i < N; ++i) r.d[i] = fprime * x.d[i];
  return r;
}

template <class T, int N>
Dual<T, N> exp(const Dual<T, N>& x) {
  T e = exp(x.val);
  return make_chain(x, e, e);
}

template <class T, int N>
Dual<T, N> log(const Dual<T, N>& x) {
  return make_chain(x, log(x.val), T(1.0) / x.val);
}

template <class T, int N>
Dual<T, N> sqrt(const Dual<T, N>& x) {
  T s = sqrt(x.val);
  return make_chain(x, s, T(0.5) / s);
}

template <class T, int N>
Dual<T, N> sin(const Dual<T, N>& x) {
  return make_chain(x, sin(x.val), cos(x.val));
}

template <class T, int N>
Dual<T, N> cos(const Dual<T, N>& x) {
  return make_chain(x, cos(x.val), -sin(x.val));
}

// atan2 with the usual derivative formulas; the branch cut is handled on the
// value part only, which is all the chart code needs away from the seam.
template <class T, int N>
Dual<T, N> atan2(const Dual<T, N>& y, const Dual<T, N>& x) {
  T r2 = x.val * x.val + y.val * y.val;
  Dual<T, N> r;
  r.val = atan2(y.val, x.val);
  for (int i = 0; i < N; ++i) r.d[i] = (x.val * y.d[i] - y.val * x.d[i]) / r2;
  return r;
}

}  // namespace sojourn
